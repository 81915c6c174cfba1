"""Monte-Carlo verification: empirical tails, deviation processes, scaling fits
and the JL probes.

Every routine draws its trials through ``ensembles.map_blocks``: the output
is a pure function of the inputs and the master seed, whatever the number
of worker threads.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry, inequalities, orlicz
from .ensembles import EnsembleSpec, MultiplierSpec, map_blocks, sample_batch
from .errors import DegenerateFit, MeanZeroRequired, SubGaussError
from .geometry import SetSpec
from .inequalities import TailBound
from .laws import K0, DistributionSpec, scaled_bernoulli
from .orlicz import PsiNorm

GRID_POINTS = 64
WILSON_Z = 1.959963984540054  # two-sided 95%
TIGHTNESS_FACTOR = 0.2
JL_FLOOR = 1.0 - math.exp(-0.25)


def wilson_interval(k, n: int, z: float = WILSON_Z):
    """Wilson score interval for k successes out of n (vectorised in k)."""
    k = np.asarray(k, dtype=float)
    phat = k / n
    den = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / den
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / den
    # the limits at k = 0 and k = n are exactly 0 and 1; keep them free of round-off
    lo = np.where(k <= 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k >= n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


def default_grid(values: np.ndarray, bound: Optional[TailBound] = None, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced grid from 0.1 x median to 10 x the bound's regime switch.

    Without a bound (or when the switch lies below the start) the grid ends
    at 10 x the largest observed value.
    """
    v = np.asarray(values, dtype=float)
    med = float(np.median(v)) if v.size else 0.0
    top = float(v.max()) if v.size else 0.0
    lo = 0.1 * med if med > 0 else (0.1 * top if top > 0 else 1e-3)
    hi = 10.0 * bound.switch_point if bound is not None else 10.0 * top
    if not hi > lo:
        hi = max(10.0 * top, 10.0 * lo)
    return np.geomspace(lo, hi, points)


# ---------------------------------------------------------------------------
# containers


@dataclass
class TrialBatch:
    label: str
    seed: int
    values: np.ndarray = field(repr=False)
    t_grid: Optional[np.ndarray] = None
    bound: Optional[TailBound] = None
    psi2: Optional[PsiNorm] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self._sorted = np.sort(self.values)
        if self.t_grid is None:
            self.t_grid = default_grid(self.values, self.bound)
        self.t_grid = np.asarray(self.t_grid, dtype=float)

    @property
    def trials(self) -> int:
        return int(self.values.size)

    @property
    def exceed_counts(self) -> np.ndarray:
        """Number of trials with value >= t for each grid point."""
        return self.trials - np.searchsorted(self._sorted, self.t_grid, side="left")

    @property
    def survival(self) -> np.ndarray:
        return self.exceed_counts / self.trials

    def wilson(self) -> tuple[np.ndarray, np.ndarray]:
        return wilson_interval(self.exceed_counts, self.trials)

    def bound_values(self) -> Optional[np.ndarray]:
        return None if self.bound is None else np.atleast_1d(self.bound(self.t_grid))

    def domination(self, min_bound: Optional[float] = None) -> dict:
        """Compare the Wilson upper limit with the bound where bound >= 10/trials."""
        if self.bound is None:
            raise SubGaussError("batch carries no analytic bound")
        floor = 10.0 / self.trials if min_bound is None else min_bound
        bv = self.bound_values()
        _, hi = self.wilson()
        mask = bv >= floor
        excess = hi[mask] - bv[mask]
        return {
            "checked_points": int(mask.sum()),
            "max_excess": float(excess.max()) if excess.size else 0.0,
            "holds": bool(np.all(excess <= 0.0)),
        }

    def summary(self) -> dict:
        v = self._sorted
        return {"mean": float(v.mean()), "median": float(np.median(v)),
                "q99": float(np.quantile(v, 0.99)), "max": float(v[-1])}

    def to_dict(self) -> dict:
        lo, hi = self.wilson()
        d = {"label": self.label, "seed": self.seed, "trials": self.trials,
             "summary": self.summary(), "t": self.t_grid.tolist(),
             "survival": self.survival.tolist(), "wilson_lo": lo.tolist(),
             "wilson_hi": hi.tolist(), "metadata": self.metadata}
        if self.bound is not None:
            d["bound"] = self.bound.to_dict()
            d["bound_values"] = self.bound_values().tolist()
            d["domination"] = self.domination()
        if self.psi2 is not None:
            d["psi2"] = self.psi2.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        """Columns: t, survival, wilson_lo, wilson_hi, bound (empty if none)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "survival", "wilson_lo", "wilson_hi", "bound"])
        lo, hi = self.wilson()
        bv = self.bound_values()
        for i, t in enumerate(self.t_grid):
            w.writerow([repr(float(t)), repr(float(self.survival[i])), repr(float(lo[i])),
                        repr(float(hi[i])), "" if bv is None else repr(float(bv[i]))])
        return buf.getvalue()


@dataclass
class ScalingFit:
    Ks: np.ndarray
    ms: np.ndarray
    psi2: list
    slope: float
    intercept: float
    residuals: np.ndarray
    alt_slope: float
    alt_intercept: float
    alt_residuals: np.ndarray

    @property
    def regressor(self) -> np.ndarray:
        return self.Ks * np.sqrt(np.log(self.Ks))

    @property
    def rss(self) -> float:
        return float(np.sum(self.residuals ** 2))

    @property
    def alt_rss(self) -> float:
        return float(np.sum(self.alt_residuals ** 2))

    @property
    def prefers_klogk(self) -> bool:
        return self.rss < self.alt_rss

    def to_dict(self) -> dict:
        return {"K": self.Ks.tolist(), "m": self.ms.tolist(),
                "psi2": [p.to_dict() for p in self.psi2],
                "slope": self.slope, "intercept": self.intercept, "rss": self.rss,
                "alt_regressor": "K^2", "alt_slope": self.alt_slope,
                "alt_intercept": self.alt_intercept, "alt_rss": self.alt_rss,
                "prefers_klogk": self.prefers_klogk}


# ---------------------------------------------------------------------------
# scalar sums and quadratic forms


def bernstein_k(law: DistributionSpec) -> float:
    """Smallest admissible K_i for Y = X^2 - E X^2: K_i^2 >= ||Y||_psi1, K_i >= 6/5."""
    psi1 = orlicz.psi1_centered_square(law).value
    return max(inequalities.MIN_BERNSTEIN_K, math.sqrt(psi1))


def hw_k(law: DistributionSpec) -> float:
    """psi_2 norm of the coordinate law, floored at K0."""
    return max(K0, orlicz.psi_norm(law, 2.0).value)


def _as_laws(laws, n: int) -> list[DistributionSpec]:
    if isinstance(laws, DistributionSpec):
        return [laws] * n
    laws = list(laws)
    if len(laws) != n:
        raise SubGaussError("need one law per coefficient")
    return laws


def _sample_columns(laws: list[DistributionSpec], rng: np.random.Generator, count: int) -> np.ndarray:
    if all(l == laws[0] for l in laws):
        return laws[0].sample(rng, (count, len(laws)))
    return np.stack([l.sample(rng, count) for l in laws], axis=1)


def empirical_tail(a, laws, trials: int, t_grid=None, seed: int = 0, threads: int = 1,
                   c: Optional[float] = None) -> TrialBatch:
    """Survival of |sum a_i (X_i^2 - 1)| for unit second-moment X_i.

    The attached bound is the sharpened Bernstein bound with K_i from
    ``bernstein_k`` and the proof-traced constant unless ``c`` is given.
    """
    a = np.asarray(a, dtype=float).ravel()
    laws = _as_laws(laws, a.size)
    for l in laws:
        if abs(l.second_moment() - 1.0) > 1e-12:
            raise SubGaussError(f"{l} does not have unit second moment")
    Ks = np.array([bernstein_k(l) for l in laws])
    bound = inequalities.new_bernstein_bound(a, Ks, c)

    def block(rng, count):
        X = _sample_columns(laws, rng, count)
        return np.abs((X * X - 1.0) @ a)

    vals = map_blocks(block, trials, seed, a.size, threads)
    meta = {"statistic": "bernstein_sum", "a_norm2": float(np.linalg.norm(a)),
            "laws": [str(l) for l in laws[:1]] if len(set(laws)) == 1 else [str(l) for l in laws],
            "K": Ks.tolist() if len(set(Ks.tolist())) > 1 else float(Ks[0])}
    return TrialBatch("bernstein", seed, vals, t_grid, bound, metadata=meta)


def empirical_hw_tail(A, law: DistributionSpec, trials: int, t_grid=None, seed: int = 0,
                      threads: int = 1, c: Optional[float] = None, constants_file=None) -> TrialBatch:
    """Survival of |X^T A X - tr A| for i.i.d. mean-zero unit-variance X_i."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise SubGaussError("A must be square")
    if not law.unit_variance:
        raise SubGaussError(f"{law} is not mean zero with unit variance")
    K = hw_k(law)
    bound = inequalities.new_hanson_wright_bound(A, K, c, constants_file)
    tr = float(np.trace(A))
    n = A.shape[0]

    def block(rng, count):
        X = law.sample(rng, (count, n))
        return np.abs(np.einsum("bi,bi->b", X @ A, X) - tr)

    vals = map_blocks(block, trials, seed, n, threads)
    meta = {"statistic": "hanson_wright", "n": n, "law": str(law), "K": K,
            "frobenius": float(np.linalg.norm(A)), "operator": float(np.linalg.norm(A, 2))}
    return TrialBatch("hanson_wright", seed, vals, t_grid, bound, metadata=meta)


# ---------------------------------------------------------------------------
# deviation of ||B A x|| over sets


def _check_guard(ensemble: EnsembleSpec, B: MultiplierSpec) -> None:
    if B.shape[1] != ensemble.m:
        raise SubGaussError(f"B has {B.shape[1]} columns, ensemble has {ensemble.m} rows")
    if not B.is_diagonal and not ensemble.mean_zero:
        raise MeanZeroRequired("a non-diagonal multiplier needs a mean-zero ensemble")


def _apply(B: MultiplierSpec, A: np.ndarray) -> np.ndarray:
    return A if B.variant == "identity" else B.matrix @ A


def deviation_values(ensemble: EnsembleSpec, B: MultiplierSpec, T: SetSpec, trials: int,
                     seed: int = 0, threads: int = 1) -> np.ndarray:
    _check_guard(ensemble, B)
    if T.n != ensemble.n:
        raise SubGaussError("set and ensemble dimensions differ")
    target = B.frobenius_norm

    def block(rng, count):
        return np.atleast_1d(geometry.exact_sup_deviation(_apply(B, sample_batch(ensemble, rng, count)), T, target))

    return map_blocks(block, trials, seed, ensemble.m * ensemble.n, threads)


def deviation_batch(ensemble: EnsembleSpec, B: MultiplierSpec, T: SetSpec, trials: int,
                    seed: int = 0, threads: int = 1, estimate_psi: bool = True) -> TrialBatch:
    """Per-trial sup_{x in T} | ||BAx|| - ||B||_F ||x|| | with its psi_2 estimate."""
    vals = deviation_values(ensemble, B, T, trials, seed, threads)
    psi = None
    if estimate_psi and trials >= orlicz.MIN_SAMPLES:
        psi = orlicz.psi_norm_from_samples(vals, 2.0, seed=seed)
    meta = {"ensemble": ensemble.label, "m": ensemble.m, "n": ensemble.n, "K": ensemble.K,
            "B": B.variant, "B_frobenius": B.frobenius_norm, "B_operator": B.operator_norm,
            "set": T.variant}
    return TrialBatch("deviation", seed, vals, psi2=psi, metadata=meta)


def concentration_report(ensemble: EnsembleSpec, B: MultiplierSpec, T: SetSpec, u: float,
                         trials: int, seed: int = 0, threads: int = 1,
                         width_trials: int = 10_000, C: Optional[float] = None,
                         constants_file=None) -> dict:
    """Empirical P(sup deviation > RHS) against the allowed 3 exp(-u^2)."""
    vals = deviation_values(ensemble, B, T, trials, seed, threads)
    w, w_ci = geometry.gaussian_width(T, width_trials, seed)
    rad = geometry.radius(T)
    rhs = inequalities.main_theorem_rhs(ensemble.K, B.operator_norm, max(w, 0.0), rad, u, C, constants_file)
    k = int(np.sum(vals > rhs))
    lo, hi = wilson_interval(k, trials)
    allowed = min(1.0, 3.0 * math.exp(-u * u))
    return {"width": w, "width_ci": list(w_ci), "radius": rad, "K": ensemble.K, "u": u,
            "rhs": rhs, "exceed_fraction": k / trials, "wilson_lo": float(lo), "wilson_hi": float(hi),
            "allowed": allowed, "max_deviation": float(vals.max()),
            "holds": bool(lo <= allowed)}


def _scaled_bernoulli_setup(K: float, m: int):
    ens = EnsembleSpec(m, 1, scaled_bernoulli(K))
    return ens, MultiplierSpec.identity(m), SetSpec.singleton([1.0])


def tightness_check(K: float, m: Optional[int] = None, trials: int = 1_000_000, seed: int = 0,
                    threads: int = 1) -> tuple[bool, dict]:
    """psi_2(||X|| - sqrt m) for X with i.i.d. scaled-Bernoulli(K) entries,
    compared with the lower bound 0.2 K sqrt(log K)."""
    if K < 4:
        raise SubGaussError("tightness needs K >= 4")
    need = K * K * math.log(K)
    m = math.ceil(need) if m is None else int(m)
    if m < need:
        raise SubGaussError(f"m = {m} is below K^2 log K = {need:.3f}")
    batch = deviation_batch(*_scaled_bernoulli_setup(K, m), trials, seed, threads)
    floor = TIGHTNESS_FACTOR * K * math.sqrt(math.log(K))
    ok = batch.psi2.ci[0] >= floor
    return ok, {"K": K, "m": m, "trials": trials, "psi2": batch.psi2.to_dict(),
                "lower_bound": floor, "ratio": batch.psi2.value / (K * math.sqrt(math.log(K))),
                "holds": bool(ok)}


def scaling_fit(Ks: Sequence[float], m_rule: Optional[Callable[[float], int]] = None,
                trials: int = 200_000, seed: int = 0, threads: int = 1) -> ScalingFit:
    """Fit deviation psi_2 against K sqrt(log K) and, for comparison, K^2.

    Each K uses a scaled-Bernoulli(K) column with B = I and T = {e_1};
    K index j draws from the stream keyed (seed, j).
    """
    Ks = np.asarray(sorted(float(k) for k in Ks))
    if np.unique(Ks).size < 2:
        raise DegenerateFit("need at least two distinct K values")
    if Ks[0] < 4:
        raise SubGaussError("scaling fit uses scaled-Bernoulli ensembles, which need K >= 4")
    m_rule = m_rule or (lambda K: math.ceil(K * K * math.log(K)))
    ms, psis = [], []
    for j, K in enumerate(Ks):
        m = int(m_rule(K))
        if m < K * K * math.log(K):
            raise SubGaussError(f"m_rule({K:g}) = {m} is below K^2 log K")
        batch = deviation_batch(*_scaled_bernoulli_setup(K, m), trials,
                                int(np.random.SeedSequence(seed, spawn_key=(j,)).generate_state(1)[0]),
                                threads)
        ms.append(m)
        psis.append(batch.psi2)
    y = np.array([p.value for p in psis])
    x1 = Ks * np.sqrt(np.log(Ks))
    x2 = Ks * Ks
    (s1, i1), (s2, i2) = np.polyfit(x1, y, 1), np.polyfit(x2, y, 1)
    if not (np.isfinite(s1) and np.isfinite(s2)):
        raise DegenerateFit("non-finite regression slope")
    return ScalingFit(Ks, np.array(ms), psis, float(s1), float(i1), y - (s1 * x1 + i1),
                      float(s2), float(i2), y - (s2 * x2 + i2))


def increment_psi2(ensemble: EnsembleSpec, B: MultiplierSpec, x, y, trials: int,
                   seed: int = 0, threads: int = 1) -> PsiNorm:
    """psi_2 of Z_x - Z_y with Z_x = ||BAx|| - ||B||_F ||x||."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if np.array_equal(x, y):
        raise SubGaussError("x and y must differ")
    _check_guard(ensemble, B)
    fro = B.frobenius_norm
    P = np.stack([x, y], axis=1)  # (n, 2)
    offset = fro * (np.linalg.norm(x) - np.linalg.norm(y))

    def block(rng, count):
        img = np.linalg.norm(_apply(B, sample_batch(ensemble, rng, count)) @ P, axis=-2)
        return (img[:, 0] - img[:, 1]) - offset

    vals = map_blocks(block, trials, seed, ensemble.m * ensemble.n, threads)
    return orlicz.psi_norm_from_samples(vals, 2.0, seed=seed)


# ---------------------------------------------------------------------------
# Johnson-Lindenstrauss


def _pair_index(k: int):
    return np.triu_indices(k, 1)


def jl_probe(points, law: DistributionSpec, eps: float, delta: float, trials: int,
             seed: int = 0, threads: int = 1, m: Optional[int] = None, K: Optional[float] = None,
             C: Optional[float] = None, constants_file=None) -> dict:
    """Fraction of draws in which (1/sqrt m) A keeps every pairwise distance
    within the factor bracket [1 - eps, 1 + eps].

    Without an explicit ``m`` the dimension comes from ``jl_dimension`` with
    the failure budget split evenly over the pairs (delta / #pairs).
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    npts, n = P.shape
    if npts < 2:
        raise SubGaussError("need at least two points")
    iu = _pair_index(npts)
    npairs = iu[0].size
    ens0 = EnsembleSpec(1, n, law)
    K = ens0.K if K is None else K
    if m is None:
        m = inequalities.jl_dimension(K, eps, delta / npairs, C, constants_file)
    ens = ens0.with_shape(m, n)
    sq = np.sum(P * P, axis=1)
    d0 = (sq[:, None] + sq[None, :] - 2 * P @ P.T)[iu]
    if np.any(d0 <= 0):
        raise SubGaussError("points must be distinct")
    lo2, hi2 = (1 - eps) ** 2, (1 + eps) ** 2

    def block(rng, count):
        A = sample_batch(ens, rng, count)  # (count, m, n)
        out = np.empty(count)
        for i in range(count):
            Y = P @ A[i].T
            sy = np.sum(Y * Y, axis=1)
            r = (sy[:, None] + sy[None, :] - 2 * Y @ Y.T)[iu] / (m * d0)
            out[i] = np.count_nonzero((r < lo2) | (r > hi2))
        return out

    fails = map_blocks(block, trials, seed, m * n, threads)
    success = float(np.mean(fails == 0))
    return {"m": int(m), "n": n, "points": npts, "pairs": int(npairs), "K": K, "eps": eps,
            "delta": delta, "trials": trials, "all_pairs_success": success,
            "pair_failure_rate": float(fails.sum() / (trials * npairs)),
            "holds": bool(success >= 1.0 - delta)}


def jl_optimality_probe(p: float, m: Optional[int] = None, trials: int = 100_000, seed: int = 0,
                        eps: float = 0.5, threads: int = 1) -> dict:
    """Failure frequency of | ||A e_1|| - 1 | >= eps for sparse symmetric
    entries with A_ij^2 ~ Bernoulli(p)/(m p), at the largest m with m p <= 1/2.
    """
    if not 0 < p < 0.25:
        raise SubGaussError("p must lie in (0, 1/4)")
    if not 0 < eps <= 1:
        raise SubGaussError("eps must lie in (0, 1]")
    m = int(math.floor(0.5 / p)) if m is None else int(m)
    if m < 1 or m * p > 0.5:
        raise SubGaussError("need m >= 1 and m p <= 1/2")

    def block(rng, count):
        # signs never change the column norm, so only the support is drawn
        nnz = np.count_nonzero(rng.random((count, m)) < p, axis=1)
        return (np.abs(np.sqrt(nnz / (m * p)) - 1.0) >= eps).astype(float)

    hits = map_blocks(block, trials, seed, m, threads)
    freq = float(hits.mean())
    se = math.sqrt(max(freq * (1 - freq), 1e-300) / trials)
    return {"p": p, "m": m, "eps": eps, "trials": trials, "failure_frequency": freq,
            "stderr": se, "zero_column_probability": (1 - p) ** m,
            "floor": JL_FLOOR, "holds": bool(freq >= 0.2)}
