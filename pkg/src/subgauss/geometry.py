"""Sets T in R^n: Gaussian width, radius and exact deviation suprema."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from scipy import special

from .errors import EnumerationTooLarge, SubGaussError

ENUMERATION_CAP = 100_000


@dataclass(frozen=True)
class SetSpec:
    """``finite`` (explicit points, one per row) or ``sparse_sphere`` (all
    s-sparse unit vectors in R^n).  A singleton is a finite set of size one."""

    variant: str
    n: int
    s: int = 0
    points: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant == "finite":
            P = np.atleast_2d(np.asarray(self.points, dtype=float))
            if P.size == 0:
                raise SubGaussError("finite set must be nonempty")
            P.setflags(write=False)
            object.__setattr__(self, "points", P)
            object.__setattr__(self, "n", P.shape[1])
        elif self.variant == "sparse_sphere":
            if not 1 <= self.s <= self.n:
                raise SubGaussError("sparse sphere needs 1 <= s <= n")
        else:
            raise SubGaussError(f"unknown set variant {self.variant!r}")

    @classmethod
    def finite(cls, points) -> "SetSpec":
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return cls("finite", P.shape[1], points=P)

    @classmethod
    def singleton(cls, x) -> "SetSpec":
        return cls.finite(np.asarray(x, dtype=float)[None, :])

    @classmethod
    def sparse_sphere(cls, n: int, s: int) -> "SetSpec":
        return cls("sparse_sphere", n, s)

    @classmethod
    def from_csv(cls, path) -> "SetSpec":
        return cls.finite(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))

    def translated(self, u) -> "SetSpec":
        if self.variant != "finite":
            raise SubGaussError("only finite sets can be translated")
        return SetSpec.finite(self.points + np.asarray(u, dtype=float))

    def scaled(self, c: float) -> "SetSpec":
        if self.variant != "finite":
            raise SubGaussError("only finite sets can be scaled")
        return SetSpec.finite(c * self.points)

    @property
    def num_supports(self) -> int:
        return math.comb(self.n, self.s)

    def supports(self) -> np.ndarray:
        if self.num_supports > ENUMERATION_CAP:
            raise EnumerationTooLarge(
                f"C({self.n},{self.s}) = {self.num_supports} supports exceeds cap {ENUMERATION_CAP}")
        return np.array(list(combinations(range(self.n), self.s)), dtype=np.intp)


def sup_inner(T: SetSpec, g: np.ndarray) -> np.ndarray:
    """sup_{y in T} <g, y> for each row of ``g`` (shape (..., n))."""
    g = np.asarray(g, dtype=float)
    if T.variant == "finite":
        return (g @ T.points.T).max(axis=-1)
    # the best s-sparse unit vector puts its mass on the s largest |g_i|
    a = np.abs(g)
    if T.s < T.n:
        a = np.partition(a, T.n - T.s, axis=-1)[..., T.n - T.s:]
    return np.sqrt((a * a).sum(axis=-1))


def gaussian_width(T: SetSpec, trials: int = 10_000, seed: int = 0, level: float = 0.95):
    """Monte-Carlo w(T) = E sup <g, y> with a normal-approximation interval.

    Returns ``(estimate, (lo, hi))``.
    """
    if trials < 1000:
        raise SubGaussError("gaussian_width needs trials >= 1000")
    rng = np.random.default_rng(int(seed))
    vals = np.empty(trials)
    chunk = max(1, (1 << 20) // T.n)
    for start in range(0, trials, chunk):
        k = min(chunk, trials - start)
        vals[start:start + k] = sup_inner(T, rng.standard_normal((k, T.n)))
    est = float(vals.mean())
    z = special.ndtri(0.5 + level / 2)
    half = float(z * vals.std(ddof=1) / math.sqrt(trials))
    return est, (est - half, est + half)


def chi_mean(n: int) -> float:
    """E ||g||_2 for g ~ N(0, I_n)."""
    return math.sqrt(2.0) * math.exp(special.gammaln((n + 1) / 2) - special.gammaln(n / 2))


def radius(T: SetSpec) -> float:
    if T.variant == "sparse_sphere":
        return 1.0
    return float(np.linalg.norm(T.points, axis=1).max())


def exact_sup_deviation(M: np.ndarray, T: SetSpec, target: float) -> np.ndarray:
    """sup_{x in T} | ||M x||_2 - target ||x||_2 |, exactly.

    ``M`` may carry leading batch axes (shape (..., l, n)).  For the sparse
    sphere, ||M x|| over unit x supported on S ranges over
    [sigma_min(M_S), sigma_max(M_S)], so each support contributes
    max(sigma_max - target, target - sigma_min) (in absolute value).
    Singular values come from eigenvalues of the principal s x s blocks of
    the Gram matrix M^T M.
    """
    M = np.asarray(M, dtype=float)
    if M.shape[-1] != T.n:
        raise SubGaussError(f"matrix has {M.shape[-1]} columns, set lives in R^{T.n}")
    if T.variant == "finite":
        P = T.points
        img = np.linalg.norm(M @ P.T, axis=-2)  # (..., num_points)
        return np.abs(img - target * np.linalg.norm(P, axis=1)).max(axis=-1)
    S = T.supports()
    G = np.swapaxes(M, -1, -2) @ M
    out_shape = G.shape[:-2]
    G = G.reshape((-1, T.n, T.n))
    res = np.empty(G.shape[0])
    # bound memory of the (batch, supports, s, s) stack
    step = max(1, (1 << 22) // (len(S) * T.s * T.s))
    rows, cols = S[:, :, None], S[:, None, :]
    for i in range(0, G.shape[0], step):
        sub = G[i:i + step][:, rows, cols]
        ev = np.linalg.eigvalsh(sub)
        sig = np.sqrt(np.clip(ev, 0.0, None))
        smin, smax = sig[..., 0], sig[..., -1]
        dev = np.maximum(np.abs(smax - target), np.abs(target - smin))
        res[i:i + step] = dev.max(axis=-1)
    return res.reshape(out_shape) if out_shape else res[0]


def sparse_width_bound(n: int, s: int) -> float:
    """Upper bound 4 s log(e n / s) on the squared width of the s-sparse sphere."""
    return 4.0 * s * math.log(math.e * n / s)
