"""Isotropic sub-Gaussian random matrices and fixed multipliers.

Random streams
--------------
All randomness is derived from a 64-bit master seed through
``numpy.random.SeedSequence`` spawn keys.  Monte-Carlo loops split their
trials into fixed-size blocks; block ``j`` draws from
``SeedSequence(seed, spawn_key=(j,))``.  The block size depends only on the
problem shape, so results never depend on how many worker threads run.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, special

from . import orlicz
from .errors import SubGaussError
from .laws import DistributionSpec

GAUSSIAN_PSI2 = math.sqrt(8.0 / 3.0)

# target number of float64 entries materialised per block of trials
_BLOCK_ENTRIES = 1 << 21
_MAX_BLOCK_TRIALS = 8192

MATRIX_MAGIC = b"SGMX"


# ---------------------------------------------------------------------------
# random streams


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def block_size(entries_per_trial: int) -> int:
    return int(max(1, min(_MAX_BLOCK_TRIALS, _BLOCK_ENTRIES // max(1, entries_per_trial))))


def map_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    trials: int,
    seed: int,
    entries_per_trial: int,
    threads: int = 1,
) -> np.ndarray:
    """Run ``fn(rng, count)`` over trial blocks and concatenate in block order.

    ``fn`` must return one value per trial (first axis of length ``count``).
    """
    bs = block_size(entries_per_trial)
    counts = [min(bs, trials - start) for start in range(0, trials, bs)]

    def run(j: int) -> np.ndarray:
        return fn(stream(seed, j), counts[j])

    if threads > 1 and len(counts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(counts))))
    else:
        parts = [run(j) for j in range(len(counts))]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# the sub-Gaussian parameter


def k_for_standardized_bernoulli(p: float, rtol: float = 1e-12) -> float:
    """Unique K > 1 with K^2 log K = 1/(p(1-p)), found by bisection.

    This K bounds the psi_2 norm of the standardised Bernoulli(p) entry.
    """
    if not 0.0 < p < 1.0:
        raise SubGaussError("p must lie in (0, 1)")
    target = 1.0 / (p * (1.0 - p))
    lo, hi = 1.0, 2.0
    while hi * hi * math.log(hi) < target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid * mid * math.log(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def variance_proxy(law: DistributionSpec) -> float:
    """Smallest sigma with E exp(sX) <= exp(s^2 sigma^2 / 2) for all s, for a
    law with finitely many atoms, as sup_s 2 log E exp(sX) / s^2.

    The s -> 0 limit of the ratio is the variance, so it is included.
    """
    at = law.atoms()
    if at is None:
        raise SubGaussError(f"{law} has no finite atom list")
    v, p = at
    keep = p > 0
    v, logp = v[keep], np.log(p[keep])

    def neg_ratio(log_s):
        s = math.exp(log_s)
        lmgf = float(special.logsumexp(logp + s * v))
        return -2.0 * lmgf / (s * s)

    scale = 1.0 / max(float(np.max(np.abs(v))), 1e-300)
    best = max(-neg_ratio(math.log(scale * k)) for k in np.geomspace(1e-3, 1e3, 121))
    res = optimize.minimize_scalar(neg_ratio, bounds=(math.log(scale * 1e-3), math.log(scale * 1e3)),
                                   method="bounded", options={"xatol": 1e-10})
    return math.sqrt(max(best, -res.fun, law.variance()))


def default_k(law: DistributionSpec) -> float:
    """Sub-Gaussian parameter used for an i.i.d. ensemble with this entry law.

    Every unit marginal <a, x> of i.i.d. mean-zero entries with variance
    proxy sigma^2 has the same mgf domination, and E exp(Z^2/t^2) for such Z
    is at most the Gaussian value, so K = sqrt(8/3) sigma covers all
    directions.  Gaussian rows get sqrt(8/3) sigma exactly; the two
    Bernoulli-type laws use the parameters from their constructions.
    """
    k, x = law.kind, law.param
    if k == "gaussian":
        return GAUSSIAN_PSI2 * x
    if k == "scaled_bernoulli":
        return x
    if k == "std_bernoulli":
        return max(GAUSSIAN_PSI2, k_for_standardized_bernoulli(x))
    if law.mean_zero and law.atoms() is not None:
        return GAUSSIAN_PSI2 * variance_proxy(law)
    return max(GAUSSIAN_PSI2, orlicz.psi_norm(law, 2.0).value)


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class EnsembleSpec:
    m: int
    n: int
    entry_law: DistributionSpec
    K: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.m <= 0 or self.n <= 0:
            raise SubGaussError("ensemble shape must be positive")
        if not self.K:
            object.__setattr__(self, "K", default_k(self.entry_law))
        if not self.label:
            object.__setattr__(self, "label", str(self.entry_law))

    @property
    def mean_zero(self) -> bool:
        return self.entry_law.mean_zero

    @property
    def isotropic(self) -> bool:
        return self.entry_law.unit_variance

    def with_shape(self, m: int, n: int) -> "EnsembleSpec":
        return EnsembleSpec(m, n, self.entry_law, self.K, self.label)


@dataclass(frozen=True)
class MultiplierSpec:
    """Fixed matrix B applied on the left of the random matrix.

    ``variant`` is one of ``identity``, ``diagonal``, ``ortho_projection``
    (projection onto the complement of the all-ones vector) or ``dense``.
    """

    variant: str
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2:
            raise SubGaussError("multiplier must be a matrix")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        if self.operator_norm <= 0:
            raise SubGaussError("multiplier must be nonzero")

    @classmethod
    def identity(cls, m: int) -> "MultiplierSpec":
        return cls("identity", np.eye(m))

    @classmethod
    def diagonal(cls, entries: Sequence[float], l: Optional[int] = None) -> "MultiplierSpec":
        e = np.asarray(entries, dtype=float)
        l = e.size if l is None else l
        B = np.zeros((l, e.size))
        k = min(l, e.size)
        B[np.arange(k), np.arange(k)] = e[:k]
        return cls("diagonal", B)

    @classmethod
    def ortho_projection(cls, m: int) -> "MultiplierSpec":
        if m < 2:
            raise SubGaussError("projection onto 1^perp needs m >= 2")
        return cls("ortho_projection", np.eye(m) - np.full((m, m), 1.0 / m))

    @classmethod
    def dense(cls, entries) -> "MultiplierSpec":
        return cls("dense", np.asarray(entries, dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def is_diagonal(self) -> bool:
        B = self.matrix
        off = B.copy()
        k = min(B.shape)
        off[np.arange(k), np.arange(k)] = 0.0
        return not off.any()

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    @property
    def operator_norm(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(np.diagonal(self.matrix)), initial=0.0))
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def stable_rank(self) -> float:
        return self.frobenius_norm**2 / self.operator_norm**2

    def scaled(self, c: float) -> "MultiplierSpec":
        return MultiplierSpec(self.variant, c * self.matrix)


# ---------------------------------------------------------------------------
# sampling


def sample_matrix(spec: EnsembleSpec, seed: int) -> np.ndarray:
    """Draw one m x n matrix; identical (spec, seed) give identical output."""
    return spec.entry_law.sample(np.random.default_rng(int(seed)), (spec.m, spec.n))


def sample_batch(spec: EnsembleSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent matrices stacked as (count, m, n)."""
    return spec.entry_law.sample(rng, (count, spec.m, spec.n))


@dataclass
class IsotropyReport:
    frobenius_error: float
    threshold: float
    second_moment: np.ndarray
    z_scores: np.ndarray
    mean_abs: float
    mean_threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "frobenius_error": self.frobenius_error,
            "threshold": self.threshold,
            "max_abs_z": float(np.max(np.abs(self.z_scores))),
            "mean_abs": self.mean_abs,
            "mean_threshold": self.mean_threshold,
            "passed": self.passed,
        }


def isotropy_report(spec: EnsembleSpec, trials: int, seed: int) -> IsotropyReport:
    """Compare the averaged row outer product with the identity.

    ``trials`` independent rows are drawn.  The check passes when the
    Frobenius error is at most ``5 n / sqrt(trials)`` and, for mean-zero laws,
    the entry mean is within 5 standard errors of zero.
    """
    if trials < 100:
        raise SubGaussError("isotropy_report needs trials >= 100")
    n = spec.n
    rows = spec.entry_law.sample(np.random.default_rng(int(seed)), (trials, n))
    G = rows.T @ rows / trials
    # per-entry standard error of the mean of a_j a_k
    sq = (rows * rows).T @ (rows * rows) / trials
    var = np.maximum(sq - G * G, 1e-300)
    z = (G - np.eye(n)) / np.sqrt(var / trials)
    err = float(np.linalg.norm(G - np.eye(n)))
    thr = 5.0 * n / math.sqrt(trials)
    mean_abs = float(abs(rows.mean()))
    sd = math.sqrt(max(spec.entry_law.variance(), 1e-300))
    mean_thr = 5.0 * sd / math.sqrt(trials * n)
    ok = err <= thr and (not spec.mean_zero or mean_abs <= mean_thr)
    return IsotropyReport(err, thr, G, z, mean_abs, mean_thr, ok)


# ---------------------------------------------------------------------------
# export


def write_matrix_csv(path, M: np.ndarray) -> None:
    np.savetxt(path, np.asarray(M, dtype=float), delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def write_matrix_binary(path, M: np.ndarray) -> None:
    """Little-endian: 4-byte magic ``SGMX``, uint64 rows, uint64 cols, then
    row-major float64 entries."""
    M = np.ascontiguousarray(M, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC + struct.pack("<QQ", *M.shape))
        fh.write(M.tobytes(order="C"))


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(20)
        if head[:4] != MATRIX_MAGIC:
            raise SubGaussError("not a matrix file (bad magic)")
        l, n = struct.unpack("<QQ", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != l * n:
        raise SubGaussError("matrix file truncated")
    return data.reshape(l, n).astype(float)
