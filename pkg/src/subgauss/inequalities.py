"""Closed-form tail bounds and dimension formulas.

Every two-regime bound is represented by a ``TailBound``
``t -> min(1, 2 exp(-c min(t^2/V, t/S)))``.  Constants carry a provenance
tag: ``proof-traced`` (pinned by a proof), ``fitted`` (calibrated by
Monte-Carlo and frozen in the constants file) or ``user``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from . import constants as _constants
from .errors import BadDelta, BadK, BadMoments, OutOfRange, SubGaussError
from .laws import K0

MIN_BERNSTEIN_K = 6.0 / 5.0
MOMENT_LEMMA_C = 6.0


def k2logk(K: float) -> float:
    return K * K * math.log(K)


def bernstein_constant(first_moment: float = 2.0) -> float:
    """Proof-traced absolute constant c of the sharpened Bernstein bound.

    With moment constant C1 (6 when E|Y| <= 2, else 6 + E|Y|), the mgf step
    gives C0 = (C1 e)^2 and c0 = 1/(2 C1 e), and the Chernoff step
    c = min(1/(4 C0), c0/2).
    """
    C1 = moment_constant(first_moment)
    C0 = (C1 * math.e) ** 2
    c0 = 1.0 / (2.0 * C1 * math.e)
    return min(1.0 / (4.0 * C0), c0 / 2.0)


def moment_constant(first_moment: float = 2.0) -> float:
    if first_moment <= 0:
        raise SubGaussError("first absolute moment bound must be positive")
    return MOMENT_LEMMA_C if first_moment <= 2.0 else MOMENT_LEMMA_C + first_moment


@dataclass(frozen=True)
class TailBound:
    V: float
    S: float
    c: float
    provenance: str = "user"
    name: str = ""

    def __post_init__(self):
        if not (self.V > 0 and self.S > 0 and self.c > 0):
            raise SubGaussError("TailBound needs V, S, c > 0")

    @property
    def switch_point(self) -> float:
        """t at which the two regimes meet (t^2/V = t/S)."""
        return self.V / self.S

    def exponent(self, t):
        t = np.asarray(t, dtype=float)
        return self.c * np.minimum(t * t / self.V, t / self.S)

    def log_value(self, t):
        return np.minimum(0.0, math.log(2.0) - self.exponent(t))

    def __call__(self, t):
        out = np.exp(self.log_value(t))
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, prob: float) -> float:
        """Smallest t with bound(t) <= prob (prob in (0, 1])."""
        if not 0 < prob <= 1:
            raise SubGaussError("prob must lie in (0, 1]")
        e = math.log(2.0 / prob) / self.c
        # exponent/c = min(t^2/V, t/S); invert each branch and take the larger
        return max(math.sqrt(e * self.V), e * self.S)

    def to_dict(self) -> dict:
        return {"name": self.name, "V": self.V, "S": self.S, "c": self.c,
                "provenance": self.provenance, "switch_point": self.switch_point}


@dataclass
class BoundReport:
    name: str
    inputs: dict
    bound: TailBound
    t_grid: np.ndarray
    partner: Optional[TailBound] = None
    extra: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.bound(self.t_grid)

    def to_dict(self) -> dict:
        d = {"name": self.name, "inputs": self.inputs, "bound": self.bound.to_dict(),
             "t": self.t_grid.tolist(), "values": np.atleast_1d(self.values).tolist()}
        if self.partner is not None:
            d["partner"] = self.partner.to_dict()
            d["partner_values"] = np.atleast_1d(self.partner(self.t_grid)).tolist()
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "bound", "partner_bound"])
        pv = self.partner(self.t_grid) if self.partner is not None else None
        for i, t in enumerate(self.t_grid):
            w.writerow([repr(float(t)), repr(float(np.atleast_1d(self.values)[i])),
                        "" if pv is None else repr(float(np.atleast_1d(pv)[i]))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Bernstein and Hanson-Wright


def _proxy(weights_sq: np.ndarray, factors) -> float:
    # exactly rounded, so zero entries and summation order never change the bits
    return math.fsum((np.asarray(weights_sq, dtype=float) * factors).ravel().tolist())


def new_bernstein_bound(a, Ks, c: Optional[float] = None) -> TailBound:
    """Sharpened Bernstein bound for sum a_i Y_i with E|Y_i| <= 2, ||Y_i||_psi1 <= K_i^2.

    V = sum a_i^2 K_i^2 log K_i, S = ||a||_inf K^2 log K with K = max K_i.
    """
    a = np.asarray(a, dtype=float).ravel()
    Ks = np.broadcast_to(np.asarray(Ks, dtype=float), a.shape)
    if not np.any(a):
        raise SubGaussError("a must be nonzero")
    if np.any(Ks < MIN_BERNSTEIN_K):
        raise BadK(f"all K_i must be >= 6/5, got min {Ks.min():g}")
    kk = np.array([k2logk(float(k)) for k in Ks])
    V = _proxy(a * a, kk)
    S = float(np.max(np.abs(a))) * k2logk(float(Ks.max()))
    prov = "proof-traced" if c is None else "user"
    return TailBound(V, S, bernstein_constant() if c is None else c, prov, "new_bernstein")


def standard_bernstein_bound(a, K: float, c: Optional[float] = None) -> TailBound:
    """Classical sub-exponential Bernstein: V = K^4 ||a||_2^2, S = K^2 ||a||_inf."""
    a = np.asarray(a, dtype=float).ravel()
    if not np.any(a):
        raise SubGaussError("a must be nonzero")
    if K <= 0:
        raise SubGaussError("K must be positive")
    V = K**4 * math.fsum((a * a).tolist())
    S = K * K * float(np.max(np.abs(a)))
    prov = "proof-traced" if c is None else "user"
    return TailBound(V, S, bernstein_constant() if c is None else c, prov, "standard_bernstein")


def _opnorm(A: np.ndarray) -> float:
    d = np.diagonal(A)
    if A.shape[0] == A.shape[1] and not (A - np.diag(d)).any():
        return float(np.max(np.abs(d)))
    return float(np.linalg.norm(A, 2))


def _hw_constant(c: Optional[float], constants_file=None) -> tuple[float, str]:
    if c is not None:
        return c, "user"
    return _constants.get("hw_c", constants_file), "fitted"


def new_hanson_wright_bound(A, K: float, c: Optional[float] = None, constants_file=None) -> TailBound:
    """Sharpened Hanson-Wright for unit-variance coordinates with psi_2 <= K.

    V = ||A||_F^2 K^2 log K, S = ||A|| K^2 log K.  Without ``c`` the frozen
    fitted constant is used.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not A.any():
        raise SubGaussError("A must be nonzero")
    if K < K0 * (1 - 1e-12):
        raise BadK(f"K must be >= 1/sqrt(log 2) for unit-variance coordinates, got {K:g}")
    kk = k2logk(K)
    cc, prov = _hw_constant(c, constants_file)
    return TailBound(_proxy(A * A, kk), _opnorm(A) * kk, cc, prov, "new_hanson_wright")


def standard_hanson_wright_bound(A, K: float, c: Optional[float] = None, constants_file=None) -> TailBound:
    """Classical form with K^4 and K^2 in place of K^2 log K."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    cc, prov = _hw_constant(c, constants_file)
    return TailBound(_proxy(A * A, K**4), _opnorm(A) * K * K, cc, prov, "standard_hanson_wright")


def hanson_wright_nonunit(A, K: float, alpha1: float, alpha2: float,
                          c: Optional[float] = None, constants_file=None) -> TailBound:
    """Hanson-Wright for coordinates with second moments in [alpha1^2, alpha2^2].

    With gamma = alpha2/alpha1: V = ||A||_F^2 alpha2^2 gamma^2 K^2 log(K/alpha1),
    S = ||A|| gamma^2 K^2 log(K/alpha1).
    """
    if not (0 < alpha1 <= alpha2 <= K):
        raise BadMoments("need 0 < alpha1 <= alpha2 <= K")
    if K / alpha1 < K0 * (1 - 1e-12):
        raise BadMoments("K/alpha1 is below the unit-variance floor 1/sqrt(log 2)")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not A.any():
        raise SubGaussError("A must be nonzero")
    gamma = alpha2 / alpha1
    kk = K * K * math.log(K / alpha1)
    g2 = gamma * gamma
    cc, prov = _hw_constant(c, constants_file)
    return TailBound(_proxy(A * A, (alpha2 * alpha2 * g2) * kk), _opnorm(A) * (g2 * kk),
                     cc, prov, "hanson_wright_nonunit")


def moment_bound(p: float, K: float, first_moment: float = 2.0) -> float:
    """Upper bound C^p p^p (K^2 log K)^(p-1) on E|Y|^p.

    C = 6 under E|Y| <= 2 and 6 + E|Y| for a larger first-moment bound.
    """
    if p < 1:
        raise SubGaussError("p must be >= 1")
    if K < MIN_BERNSTEIN_K:
        raise BadK("K must be >= 6/5")
    C = moment_constant(first_moment)
    return math.exp(p * math.log(C * p) + (p - 1) * math.log(k2logk(K)))


def main_theorem_rhs(K: float, op_norm_B: float, width: float, rad: float,
                     u: float = 0.0, C: Optional[float] = None, constants_file=None) -> float:
    """C K sqrt(log K) ||B|| (w(T) + u rad(T))."""
    if C is None:
        C = _constants.get("main_C", constants_file)
    return C * K * math.sqrt(math.log(K)) * op_norm_B * (width + u * rad)


# ---------------------------------------------------------------------------
# dimension formulas


def jl_dimension(K: float, eps: float, delta: float, C: Optional[float] = None, constants_file=None) -> int:
    """m = ceil(C K^2 log K eps^-2 log(1/delta))."""
    if not (0 < eps < 1 and 0 < delta < 1):
        raise SubGaussError("eps and delta must lie in (0, 1)")
    if C is None:
        C = _constants.get("jl_C", constants_file)
    return math.ceil(C * k2logk(K) * math.log(1.0 / delta) / (eps * eps))


def nsp_dimension(rho: float, p: float, s: int, n: int, u: float,
                  C: Optional[float] = None, constants_file=None) -> int:
    """m = ceil(C rho^-2 (1/(p(1-p))) (s log(e n/s) + u^2))."""
    if not (0 < rho < 1 and 0 < p < 1):
        raise SubGaussError("rho and p must lie in (0, 1)")
    if C is None:
        C = _constants.get("nsp_C", constants_file)
    return math.ceil(C / (rho * rho) / (p * (1.0 - p)) * (s * math.log(math.e * n / s) + u * u))


def sketch_dimension(K: float, width_sq: float, delta: float,
                     c0: Optional[float] = None, constants_file=None) -> int:
    """m = ceil(c0 K^2 log K w^2 / delta^2)."""
    if not 0 < delta < 1:
        raise SubGaussError("delta must lie in (0, 1)")
    if c0 is None:
        c0 = _constants.get("sketch_c0", constants_file)
    return math.ceil(c0 * k2logk(K) * width_sq / (delta * delta))


def rip_to_rnsp(delta: float) -> tuple[float, float]:
    """RIP(2s, delta) -> l2-rNSP(s, rho', tau') with
    rho' = delta/(sqrt(1-delta^2) - delta/4), tau' = sqrt(1+delta)/(same)."""
    if not 0 < delta < 0.5:
        raise BadDelta("delta must lie in (0, 1/2)")
    den = math.sqrt(1.0 - delta * delta) - delta / 4.0
    rho, tau = delta / den, math.sqrt(1.0 + delta) / den
    assert rho < 2 * delta and tau < 2
    return rho, tau


# ---------------------------------------------------------------------------
# binomial tails


def kl_bernoulli(x: float, y: float) -> float:
    """D(x || y) between Bernoulli(x) and Bernoulli(y)."""
    if not (0 <= x <= 1 and 0 < y < 1):
        raise OutOfRange("kl_bernoulli needs x in [0,1], y in (0,1)")
    return float(special.xlogy(x, x / y) + special.xlogy(1 - x, (1 - x) / (1 - y)))


def binom_tail_exact(m: int, p: float, t: float) -> float:
    """P(Binomial(m, p) >= t) by log-space summation of the pmf."""
    k0 = max(0, math.ceil(t))
    if k0 > m:
        return 0.0
    ks = np.arange(k0, m + 1)
    logpmf = (special.gammaln(m + 1) - special.gammaln(ks + 1) - special.gammaln(m - ks + 1)
              + ks * math.log(p) + (m - ks) * math.log1p(-p))
    return float(min(1.0, math.exp(special.logsumexp(logpmf))))


def binom_tail_lower(m: int, p: float, k: float) -> float:
    """Lower bound on P(Binomial(m, p) >= k - 1), valid for real k in (mp+1, m/2)
    when p < 1/4 and mp >= 1."""
    if not (p < 0.25 and m * p >= 1):
        raise OutOfRange("need p < 1/4 and m p >= 1")
    if not (m * p + 1 < k < m / 2):
        raise OutOfRange(f"k must lie in ({m * p + 1:g}, {m / 2:g})")
    x = k / m
    return math.exp(-m * kl_bernoulli(x, p)) / math.sqrt(8.0 * k * (1.0 - x))


# ---------------------------------------------------------------------------
# scalar inequalities


def appendix_c_check(grid_density: int = 100_000) -> dict:
    """Check the four auxiliary scalar inequalities on dense grids.

    Each entry reports the largest normalised violation
    ``(lhs - rhs) / max(1, |lhs|, |rhs|)``; all must be <= 1e-12.
    """
    if grid_density < 1000:
        raise SubGaussError("grid_density must be >= 1000")

    def worst(lhs, rhs):
        scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        return float(np.max((lhs - rhs) / scale))

    out = {}
    x = np.linspace(-50.0, 50.0, grid_density)
    out["a"] = worst(np.exp(x), x + np.cosh(2 * x))
    x = np.linspace(0.0, 0.5, grid_density, endpoint=False)
    out["b"] = worst((1 - x) ** -0.5, np.exp(x))
    x = np.linspace(-10.0, 50.0, grid_density)
    out["c"] = max(worst(np.minimum(1.0, al * np.exp(-x)), 2 * np.exp(-x / math.log2(al)))
                   for al in (2.0, 4.0, 8.0))
    x = np.linspace(0.0, 1.0, grid_density + 2)[1:-1]
    out["d"] = worst((1 - x) * (2 / (x * (1 - x))) ** (x * x / 2), np.ones_like(x))
    out["max_violation"] = max(out.values())
    out["holds"] = out["max_violation"] <= 1e-12
    return out
