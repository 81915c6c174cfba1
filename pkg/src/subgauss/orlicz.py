"""psi_alpha (Orlicz) norms.

Three routes to ``||X||_{psi_alpha} = inf{t > 0 : E exp(|X|^alpha / t^alpha) <= 2}``:

* ``psi_norm_analytic``: closed forms for the named laws;
* ``psi_norm_from_mgf``: bisection on a supplied map ``t -> E exp(|X|^alpha/t^alpha)``;
* ``psi_norm_from_samples``: the same root with the expectation replaced by a
  sample mean, plus a bootstrap percentile interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import NoFiniteMgf, SubGaussError, TooFewSamples, UnsupportedPair
from .laws import K0, DistributionSpec, scaled_bernoulli_level

LOG2 = math.log(2.0)

BRACKET_LO = 1e-8
BRACKET_HI = 1.0
BRACKET_CAP = 1e8

MIN_SAMPLES = 10_000
N_BOOT = 200
CI_LEVEL = 0.90
# up to this many distinct values the bootstrap draws multinomial counts
# directly; above it, resampled indices are binned (same law, faster)
_MULTINOMIAL_MAX_ATOMS = 4096


@dataclass(frozen=True)
class PsiNorm:
    alpha: float
    value: float
    method: str  # "analytic" | "mgf-root" | "sample-root"
    ci: Optional[tuple[float, float]] = None
    upper_bound: bool = False
    degenerate: bool = False
    n_samples: Optional[int] = None

    @property
    def half_width(self) -> float:
        if self.ci is None:
            return 0.0
        return 0.5 * (self.ci[1] - self.ci[0])

    def to_dict(self) -> dict:
        d = {"alpha": self.alpha, "value": self.value, "method": self.method}
        if self.ci is not None:
            d["ci"] = list(self.ci)
        if self.upper_bound:
            d["upper_bound"] = True
        if self.degenerate:
            d["degenerate"] = True
        if self.n_samples is not None:
            d["n_samples"] = self.n_samples
        return d


# ---------------------------------------------------------------------------
# closed forms


def psi_norm_analytic(d: DistributionSpec, alpha: float = 2.0) -> PsiNorm:
    """Closed-form psi_alpha norm.

    For ``bounded_uniform`` the returned value is the generic bound for
    variables bounded by ``M`` and is flagged ``upper_bound=True``.
    """
    if alpha < 1:
        raise SubGaussError("alpha must be >= 1")
    k, x = d.kind, d.param
    inv = 1.0 / alpha
    value, upper = None, False
    if k == "gaussian" and alpha == 2:
        value = math.sqrt(8.0 / 3.0) * x
    elif k == "rademacher":
        value = (1.0 / LOG2) ** inv
    elif k == "bernoulli01":
        value = math.log1p(1.0 / x) ** -inv
    elif k == "scaled_bernoulli":
        L2 = scaled_bernoulli_level(x)
        value = math.sqrt(L2) * math.log1p(L2) ** -inv
    elif k == "sparse_ternary":
        value = x ** -0.5 * math.log1p(1.0 / x) ** -inv
    elif k == "exponential" and alpha == 1:
        value = 2.0 / x
    elif k == "bounded_uniform":
        value, upper = x * (1.0 / LOG2) ** inv, True
    if value is None:
        raise UnsupportedPair(f"no closed-form psi_{alpha:g} norm for {d}")
    return PsiNorm(alpha=float(alpha), value=value, method="analytic", upper_bound=upper)


def _finite_or_inf(v: float) -> float:
    return v if np.isfinite(v) else math.inf


def mgf_of_power(d: DistributionSpec, alpha: float = 2.0) -> Callable[[float], float]:
    """Return ``t -> E exp(|X|^alpha / t^alpha)`` for a named law.

    Values that diverge are reported as ``inf``.
    """
    at = d.atoms()
    if at is not None:
        v, p = at
        a = np.abs(v) ** alpha

        def discrete(t: float) -> float:
            with np.errstate(over="ignore"):
                return _finite_or_inf(float(np.sum(p * np.exp(a / t**alpha))))

        return discrete

    k, x = d.kind, d.param
    if k == "gaussian":
        if alpha == 2:
            return lambda t: (1.0 - 2.0 * x * x / (t * t)) ** -0.5 if t * t > 2 * x * x else math.inf
        if alpha == 1:
            def g1(t: float) -> float:
                c = x / t
                with np.errstate(over="ignore"):
                    return _finite_or_inf(2.0 * math.exp(min(c * c / 2, 700.0)) * special.ndtr(c))
            return g1
        if alpha > 2:
            return lambda t: math.inf
        return lambda t: _quad(
            lambda u: 2.0 * math.exp(min((x * u / t) ** alpha - u * u / 2, 700.0)) / math.sqrt(2 * math.pi),
            0.0, math.inf)
    if k == "exponential":
        if alpha == 1:
            return lambda t: x / (x - 1.0 / t) if x > 1.0 / t else math.inf
        if alpha > 1:
            return lambda t: math.inf
        return lambda t: _quad(lambda u: x * math.exp(min((u / t) ** alpha - x * u, 700.0)), 0.0, math.inf)
    if k == "bounded_uniform":
        if alpha == 2:
            def u2(t: float) -> float:
                r = x / t
                if r > 26.0:  # erfi overflows
                    return math.inf
                return (math.sqrt(math.pi) / 2.0) * special.erfi(r) / r
            return u2
        return lambda t: _quad(lambda u: math.exp(min((u / t) ** alpha, 700.0)) / x, 0.0, x)
    raise UnsupportedPair(f"no moment generating function available for {d}")


def _quad(f: Callable[[float], float], lo: float, hi: float) -> float:
    val, _ = integrate.quad(f, lo, hi, limit=200)
    return _finite_or_inf(val)


def centered_square_mgf(d: DistributionSpec) -> Callable[[float], float]:
    """``t -> E exp(|X^2 - E X^2| / t)``; the psi_1 norm of the centred square."""
    m2 = d.second_moment()
    at = d.atoms()
    if at is not None:
        v, p = at
        y = np.abs(v * v - m2)

        def discrete(t: float) -> float:
            with np.errstate(over="ignore"):
                return _finite_or_inf(float(np.sum(p * np.exp(y / t))))

        return discrete
    k, x = d.kind, d.param
    if k == "gaussian":
        s2 = x * x

        def gauss(t: float) -> float:
            # Y = s2 (g^2 - 1); split the expectation at |g| = 1
            s = s2 / t
            if s >= 0.5:
                return math.inf
            outer = math.exp(-s) * (1 - 2 * s) ** -0.5 * special.erfc(math.sqrt((1 - 2 * s) / 2))
            inner = math.exp(s) * (1 + 2 * s) ** -0.5 * special.erf(math.sqrt((1 + 2 * s) / 2))
            return outer + inner

        return gauss
    if k == "bounded_uniform":
        return lambda t: _quad(lambda u: math.exp(min(abs(u * u - m2) / t, 700.0)) / x, 0.0, x)
    if k == "exponential":
        return lambda t: math.inf
    raise UnsupportedPair(f"no centred-square mgf for {d}")


# ---------------------------------------------------------------------------
# root finding


def psi_norm_from_mgf(
    mgf_of_power: Callable[[float], float],
    alpha: float = 2.0,
    tol: float = 1e-9,
    cap: float = BRACKET_CAP,
) -> PsiNorm:
    """Solve E exp(|X|^alpha/t^alpha) = 2 by bracketing bisection in log t."""
    if tol <= 0:
        raise SubGaussError("tol must be positive")

    def above(t: float) -> bool:
        try:
            v = mgf_of_power(t)
        except OverflowError:
            return True
        return not (v <= 2.0)  # nan counts as divergent

    lo, hi = BRACKET_LO, BRACKET_HI
    if not above(lo):
        return PsiNorm(alpha=float(alpha), value=0.0, method="mgf-root", degenerate=True)
    while above(hi):
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            raise NoFiniteMgf(f"E exp(|X|^{alpha:g}/t^{alpha:g}) > 2 for all t <= {cap:g}")
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if above(mid):
            lo = mid
        else:
            hi = mid
    return PsiNorm(alpha=float(alpha), value=math.sqrt(lo * hi), method="mgf-root")


def psi_norm(d: DistributionSpec, alpha: float = 2.0, tol: float = 1e-9) -> PsiNorm:
    """Exact norm of a named law: closed form when one exists, else mgf root."""
    try:
        res = psi_norm_analytic(d, alpha)
        if not res.upper_bound:
            return res
    except UnsupportedPair:
        pass
    return psi_norm_from_mgf(mgf_of_power(d, alpha), alpha, tol)


def psi1_centered_square(d: DistributionSpec, tol: float = 1e-9) -> PsiNorm:
    """||X^2 - E X^2||_{psi_1}, computed from the exact expectation."""
    return psi_norm_from_mgf(centered_square_mgf(d), 1.0, tol)


# ---------------------------------------------------------------------------
# sample estimator


def _log_mean_exp(a: np.ndarray, w: np.ndarray, s: float) -> tuple[float, float]:
    """log(sum w e^{a s} / sum w) and its derivative in s."""
    z = a * s
    zmax = z.max()
    e = w * np.exp(z - zmax)
    tot = e.sum()
    return zmax + math.log(tot) - math.log(w.sum()), float(e @ a) / tot


def _root_bisect(a: np.ndarray, w: np.ndarray, alpha: float, tol: float, cap: float) -> float:
    def above(t: float) -> bool:
        return _log_mean_exp(a, w, t ** -alpha)[0] > LOG2

    lo, hi = BRACKET_LO, BRACKET_HI
    if not above(lo):
        return 0.0
    while above(hi):
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            raise NoFiniteMgf("sample mean of exp(|X|^alpha/t^alpha) exceeds 2 up to the cap")
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if above(mid):
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _root_newton(a: np.ndarray, w: np.ndarray, s0: float, buf: np.ndarray, rtol: float = 1e-9) -> float:
    """Root in s = t^-alpha of log-mean-exp(a s) = log 2; safeguarded Newton.

    ``a`` must be sorted ascending.  The function is convex and increasing
    with value -log 2 at s = 0, so a bracket [0, s_hi] exists whenever some
    weighted a is positive.
    """
    log_w = math.log(w.sum())
    s_lo, s_hi = 0.0, None
    s = s0
    for _ in range(200):
        zmax = a[-1] * s
        np.multiply(a, s, out=buf)
        buf -= zmax
        np.exp(buf, out=buf)
        buf *= w
        tot = buf.sum()
        g = zmax + math.log(tot) - log_w - LOG2
        dg = float(buf @ a) / tot
        if g > 0:
            s_hi = s
        else:
            s_lo = s
        if s_hi is None:
            step = s * 2.0 if s > 0 else 1.0
        else:
            step = s - g / dg if dg > 0 else 0.5 * (s_lo + s_hi)
            if not (s_lo < step < s_hi):
                step = 0.5 * (s_lo + s_hi)
        if abs(step - s) <= rtol * max(s, 1e-300):
            return step
        s = step
    return s


def psi_norm_from_samples(
    xs,
    alpha: float = 2.0,
    tol: float = 1e-9,
    n_boot: int = N_BOOT,
    level: float = CI_LEVEL,
    seed: int = 0,
    min_samples: int = MIN_SAMPLES,
    cap: float = BRACKET_CAP,
) -> PsiNorm:
    """Empirical psi_alpha norm with a bootstrap percentile interval.

    The sample mean is evaluated as a max-shifted log-sum-exp, so large
    ``|x|^alpha / t^alpha`` never overflows.  An all-zero sample returns 0
    flagged ``degenerate``.
    """
    x = np.asarray(xs, dtype=float).ravel()
    n = x.size
    if n < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples, got {n}")
    if tol <= 0:
        raise SubGaussError("tol must be positive")
    a_all = np.abs(x) ** alpha
    a, inverse, counts = np.unique(a_all, return_inverse=True, return_counts=True)
    w = counts.astype(float)
    if a[-1] == 0.0:
        return PsiNorm(alpha=float(alpha), value=0.0, method="sample-root", ci=(0.0, 0.0),
                       degenerate=True, n_samples=n)
    t_hat = _root_bisect(a, w, alpha, tol, cap)
    s_hat = t_hat ** -alpha

    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    probs = counts / n
    buf = np.empty_like(a)
    for b in range(n_boot):
        if a.size <= _MULTINOMIAL_MAX_ATOMS:
            wb = rng.multinomial(n, probs).astype(float)
        else:
            wb = np.bincount(inverse[rng.integers(0, n, n)], minlength=a.size).astype(float)
        top = np.flatnonzero(wb)[-1]
        if a[top] == 0.0:
            boots[b] = 0.0
            continue
        ab, wtop = a[: top + 1], wb[: top + 1]
        boots[b] = _root_newton(ab, wtop, s_hat, buf[: top + 1]) ** (-1.0 / alpha)
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(boots, [tail, 1.0 - tail])
    ci = (float(min(lo, t_hat)), float(max(hi, t_hat)))
    return PsiNorm(alpha=float(alpha), value=t_hat, method="sample-root", ci=ci, n_samples=n)


def k_lower_bound_check(samples_of_unit_variance, seed: int = 0, tol: float = 1e-9) -> bool:
    """True iff the estimated psi_2 norm clears the unit-variance floor K0.

    The precondition is on the second moment E X^2 (within 5% of 1), which
    admits the constant X = 1, the equality case of the floor.
    """
    x = np.asarray(samples_of_unit_variance, dtype=float).ravel()
    m2 = float(np.mean(x * x))
    if abs(m2 - 1.0) > 0.05:
        raise SubGaussError(f"second moment {m2:.4f} is not within 5% of 1")
    est = psi_norm_from_samples(x, 2.0, tol=tol, seed=seed)
    return est.value >= K0 - est.half_width - tol * K0


def empirical_psi(xs, alpha: float = 2.0, tol: float = 1e-12) -> float:
    """Point estimate only: the psi_alpha norm of the empirical measure."""
    a, counts = np.unique(np.abs(np.asarray(xs, dtype=float).ravel()) ** alpha, return_counts=True)
    if a.size == 0 or a[-1] == 0.0:
        return 0.0
    return _root_bisect(a, counts.astype(float), alpha, tol, BRACKET_CAP)


# ---------------------------------------------------------------------------
# property suite


def psi_property_suite(xs, ys=None, alpha: float = 2.0, beta: float = 2.0,
                       powers=(1, 2, 3, 4), rtol: float = 1e-9) -> dict:
    """Check the standard psi_alpha properties on a sample.

    Each property is a statement about an arbitrary law, so it must hold for
    the empirical measure of ``xs`` (and of the pairs ``(xs, ys)``) exactly;
    only root-finding error is tolerated (``rtol``).  Checked:

    a  P(|X| >= t) <= 2 exp(-t^alpha / K^alpha) with K = psi_alpha(X)
    c  psi_1(X^2) = psi_2(X)^2
    d  psi_1(XY) <= psi_2(X) psi_2(Y)
    e  E|X|^p <= (4 p^(1/alpha) psi_alpha(X))^p
    f  psi_alpha(X - E X) <= 7 psi_alpha(X)
    g  psi_alpha(X) <= 3 psi_beta(X) for beta >= alpha

    Returns ``{name: {"lhs", "rhs", "holds"}}`` plus ``"all"``.
    """
    if beta < alpha:
        raise SubGaussError("property (g) needs beta >= alpha")
    x = np.asarray(xs, dtype=float).ravel()
    out: dict = {}

    def record(name, lhs, rhs, equal=False):
        lhs, rhs = float(lhs), float(rhs)
        if equal:
            ok = abs(lhs - rhs) <= rtol * max(abs(rhs), 1e-300) * 10
        else:
            ok = lhs <= rhs * (1 + rtol) + 1e-300
        out[name] = {"lhs": lhs, "rhs": rhs, "holds": bool(ok)}

    K = empirical_psi(x, alpha)
    ax = np.sort(np.abs(x))
    ts = np.quantile(ax, np.linspace(0.0, 1.0, 65))
    surv = 1.0 - np.searchsorted(ax, ts, side="left") / ax.size
    with np.errstate(divide="ignore"):
        ratio = np.where(surv > 0, surv / np.minimum(1.0, 2 * np.exp(-(ts / K) ** alpha)), 0.0)
    record("a", ratio.max(), 1.0)

    k2 = empirical_psi(x, 2.0)
    record("c", empirical_psi(x * x, 1.0), k2 * k2, equal=True)

    if ys is not None:
        y = np.asarray(ys, dtype=float).ravel()
        if y.size != x.size:
            raise SubGaussError("xs and ys must be paired")
        record("d", empirical_psi(x * y, 1.0), k2 * empirical_psi(y, 2.0))

    worst = max(np.mean(ax ** p) / (4.0 * p ** (1.0 / alpha) * K) ** p for p in powers)
    record("e", worst, 1.0)
    record("f", empirical_psi(x - x.mean(), alpha), 7.0 * K)
    record("g", K, 3.0 * empirical_psi(x, beta))
    out["all"] = all(v["holds"] for v in out.values())
    return out
