"""Sketch-and-solve for constrained least squares min_{x in C} ||Bx - y||^2.

The sketched problem replaces (B, y) by (AB, Ay) for a random m x n matrix
A.  Quality is always measured on the original objective f.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from . import constants, geometry, inequalities
from .ensembles import EnsembleSpec, map_blocks, sample_batch, sample_matrix
from .errors import RankDeficient, SubGaussError
from .geometry import SetSpec
from .laws import DistributionSpec, gaussian

PG_MAX_ITER = 100_000
PG_TOL = 1e-10
PG_WINDOW = 10


@dataclass(frozen=True)
class Constraint:
    kind: str = "unconstrained"  # unconstrained | nonnegative | l1ball
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unconstrained", "nonnegative", "l1ball"):
            raise SubGaussError(f"unknown constraint {self.kind!r}")
        if self.kind == "l1ball" and not self.radius > 0:
            raise SubGaussError("l1ball needs radius > 0")

    @classmethod
    def parse(cls, text: str) -> "Constraint":
        """Descriptor: ``unconstrained``, ``nonnegative`` or ``l1ball <radius>``
        (``l1ball radius=<r>`` also accepted)."""
        parts = text.replace("=", " ").split()
        if not parts:
            return cls()
        kind = parts[0].lower()
        if kind == "l1ball":
            nums = [p for p in parts[1:] if p != "radius"]
            if len(nums) != 1:
                raise SubGaussError("l1ball descriptor needs one radius")
            return cls("l1ball", float(nums[0]))
        if len(parts) > 1:
            raise SubGaussError(f"constraint {kind!r} takes no arguments")
        return cls(kind)

    def __str__(self) -> str:
        return f"l1ball {self.radius!r}" if self.kind == "l1ball" else self.kind

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "unconstrained":
            return x
        if self.kind == "nonnegative":
            return np.maximum(x, 0.0)
        return project_l1_ball(x, self.radius)


def project_l1_ball(x: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {||x||_1 <= radius} by sorting."""
    a = np.abs(x)
    if a.sum() <= radius:
        return x.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.sign(x) * np.maximum(a - theta, 0.0)


@dataclass
class SketchProblem:
    B: np.ndarray
    y: np.ndarray
    constraint: Constraint = field(default_factory=Constraint)
    law: DistributionSpec = field(default_factory=gaussian)
    m: int = 0

    def __post_init__(self):
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        n, d = self.B.shape
        if not n >= d >= 1:
            raise SubGaussError("need n >= d >= 1")
        if self.y.size != n:
            raise SubGaussError("y must have one entry per row of B")
        if self.m <= 0:
            self.m = n

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(self.m, self.n, self.law)

    def objective(self, x) -> float:
        r = self.B @ x - self.y
        return float(r @ r)


def load_problem(B_path, y_path, constraint="unconstrained", law: Optional[DistributionSpec] = None,
                 m: int = 0) -> SketchProblem:
    """B and y from CSV; ``constraint`` is a descriptor string or a path to one."""
    B = np.loadtxt(B_path, delimiter=",", dtype=float, ndmin=2)
    y = np.loadtxt(y_path, delimiter=",", dtype=float, ndmin=1)
    if isinstance(constraint, Path) or (isinstance(constraint, str) and Path(constraint).is_file()):
        constraint = Path(constraint).read_text()
    return SketchProblem(B, y, Constraint.parse(constraint), law or gaussian(), m)


# ---------------------------------------------------------------------------
# solvers


def _lstsq(B: np.ndarray, y: np.ndarray) -> np.ndarray:
    Q, R = linalg.qr(B, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.min() <= diag.max() * max(B.shape) * np.finfo(float).eps:
        raise RankDeficient("B does not have full column rank")
    return linalg.solve_triangular(R, Q.T @ y)


def _projected_gradient(B, y, constraint: Constraint, tol: float, max_iter: int) -> tuple[np.ndarray, dict]:
    smax = linalg.svdvals(B)[0]
    if smax == 0:
        raise RankDeficient("B is zero")
    step = 1.0 / (smax * smax)
    try:
        x = constraint.project(_lstsq(B, y))
    except RankDeficient:
        x = constraint.project(np.zeros(B.shape[1]))
    r = B @ x - y
    hist = [float(r @ r)]
    it = 0
    for it in range(1, max_iter + 1):
        x = constraint.project(x - step * (B.T @ r))
        r = B @ x - y
        hist.append(float(r @ r))
        if hist[-1] == 0.0:
            break
        if it >= PG_WINDOW and hist[-1 - PG_WINDOW] - hist[-1] <= tol * hist[-1]:
            break
    return x, {"iterations": it, "converged": it < max_iter}


def solve(B, y, constraint: Constraint, tol: float = PG_TOL, max_iter: int = PG_MAX_ITER):
    """argmin over C of ||Bx - y||^2; returns (x, f, info)."""
    if constraint.kind == "unconstrained":
        x = _lstsq(B, y)
        info = {"method": "qr"}
    else:
        x, info = _projected_gradient(B, y, constraint, tol, max_iter)
        info["method"] = "projected-gradient"
    r = B @ x - y
    return x, float(r @ r), info


def solve_original(p: SketchProblem, tol: float = PG_TOL):
    x, f, _ = solve(p.B, p.y, p.constraint, tol)
    return x, f


@dataclass
class OptimalityCertificate:
    f_star: float
    f_hat: float
    delta_achieved: float
    Z1: float
    Z2: float
    certified: bool
    notes: str = ""

    @property
    def lemma_factor(self) -> float:
        """(1 + 2 Z2/Z1)^2, the bound on f(x_hat)/f(x*)."""
        return (1.0 + 2.0 * self.Z2 / self.Z1) ** 2 if self.Z1 > 0 else math.inf

    def lemma_holds(self, tol: float = 1e-8) -> bool:
        return self.f_hat <= self.lemma_factor * self.f_star * (1 + tol) + tol

    def to_dict(self) -> dict:
        return {"f_star": self.f_star, "f_hat": self.f_hat, "delta_achieved": self.delta_achieved,
                "Z1": self.Z1, "Z2": self.Z2, "lemma_factor": self.lemma_factor,
                "lemma_holds": self.lemma_holds(), "certified": self.certified, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def delta_of(f_hat: float, f_star: float, tol: float = 1e-12) -> float:
    if f_star <= tol:
        return 0.0 if f_hat <= tol else math.inf
    return math.sqrt(f_hat / f_star) - 1.0


def residual_direction(p: SketchProblem, x_star: np.ndarray) -> np.ndarray:
    r = p.B @ x_star - p.y
    nr = np.linalg.norm(r)
    if nr == 0:
        # exact fit: any unit vector works, take the first coordinate axis
        e = np.zeros(p.n)
        e[0] = 1.0
        return e
    return r / nr


def z_quantities(p: SketchProblem, A: np.ndarray, u: Optional[np.ndarray] = None,
                 x_star: Optional[np.ndarray] = None, samples: int = 2000, seed: int = 0):
    """(Z1, Z2, certified).

    Unconstrained: the tangent cone is R^d, so with Q an orthonormal basis
    of range(B), Z1 = sigma_min(AQ)^2/m and Z2 = ||Q^T ((1/m) A^T A - I) u||,
    both exact.  Constrained: min/max over ``samples`` random feasible
    directions B(x_i - x*), an uncertified estimate.  ``u`` defaults to the
    normalised optimal residual.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if x_star is None:
        x_star, _ = solve_original(p)
    if u is None:
        u = residual_direction(p, x_star)
    Au = A @ u
    if p.constraint.kind == "unconstrained":
        Q, _ = linalg.qr(p.B, mode="economic")
        AQ = A @ Q
        z1 = float(linalg.svdvals(AQ)[-1] ** 2 / m)
        z2 = float(np.linalg.norm(AQ.T @ Au / m - Q.T @ u))
        return z1, z2, True
    rng = np.random.default_rng(seed)
    scale = max(np.linalg.norm(x_star), 1.0)
    V = []
    for _ in range(samples):
        xi = p.constraint.project(x_star + scale * rng.standard_normal(p.d) * rng.random())
        v = p.B @ (xi - x_star)
        nv = np.linalg.norm(v)
        if nv > 1e-12 * scale:
            V.append(v / nv)
    if not V:
        raise SubGaussError("could not sample any feasible direction")
    V = np.array(V).T  # (n, k)
    AV = A @ V
    z1 = float(np.min(np.sum(AV * AV, axis=0)) / m)
    z2 = float(np.max(np.abs(AV.T @ Au / m - V.T @ u)))
    return z1, z2, False


def solve_sketched(p: SketchProblem, seed: int = 0, tol: float = PG_TOL, A: Optional[np.ndarray] = None,
                   x_star: Optional[np.ndarray] = None, f_star: Optional[float] = None):
    """Solve the sketched problem; returns (x_hat, g_hat, certificate)."""
    if A is None:
        A = sample_matrix(p.ensemble(), seed)
    A = np.asarray(A, dtype=float)
    if A.shape[1] != p.n:
        raise SubGaussError("sketch must have n columns")
    if x_star is None or f_star is None:
        x_star, f_star = solve_original(p, tol)
    x_hat, g_hat, info = solve(A @ p.B, A @ p.y, p.constraint, tol)
    f_hat = p.objective(x_hat)
    z1, z2, cert = z_quantities(p, A, x_star=x_star, seed=seed)
    notes = "exact Z (unconstrained)" if cert else "sampled Z estimate, not certified"
    c = OptimalityCertificate(f_star, f_hat, delta_of(f_hat, f_star), z1, z2, cert, notes)
    return x_hat, g_hat, c


# ---------------------------------------------------------------------------
# dimension and the technical lemma


def range_width_sq(d: int) -> float:
    """Squared Gaussian width of the unit sphere of a d-dimensional subspace."""
    return geometry.chi_mean(d) ** 2


def sketch_dimension_for(p: SketchProblem, delta: float, K: Optional[float] = None,
                         c0: Optional[float] = None, constants_file=None) -> int:
    """Sketch size for an unconstrained problem (tangent cone = R^d)."""
    K = p.ensemble().K if K is None else K
    return inequalities.sketch_dimension(K, range_width_sq(p.d), delta, c0, constants_file)


def lemma_check(T: SetSpec, law: DistributionSpec, delta: float, trials: int, seed: int = 0,
                threads: int = 1, m: Optional[int] = None, C: Optional[float] = None,
                width_trials: int = 10_000, constants_file=None) -> dict:
    """Fraction of draws with sup_T |(1/m)||Ax||^2 - ||x||^2| <= delta."""
    if T.variant != "finite":
        raise SubGaussError("lemma check runs on finite sets")
    rad = geometry.radius(T)
    if rad > 2:
        raise SubGaussError("the lemma needs rad(T) <= 2")
    if not 0 < delta < 1:
        raise SubGaussError("delta must lie in (0, 1)")
    w, _ = geometry.gaussian_width(T, width_trials, seed)
    ens0 = EnsembleSpec(1, T.n, law)
    if m is None:
        if C is None:
            C = constants.get("lemma_C", constants_file)
        m = max(1, math.ceil(C * ens0.K ** 2 * math.log(ens0.K) * max(w, 0.0) ** 2 / delta ** 2))
    ens = ens0.with_shape(m, T.n)
    P = T.points.T
    sq = np.sum(P * P, axis=0)

    def block(rng, count):
        img = sample_batch(ens, rng, count) @ P
        return np.max(np.abs(np.sum(img * img, axis=-2) / m - sq), axis=-1)

    sup = map_blocks(block, trials, seed, m * T.n, threads)
    frac = float(np.mean(sup <= delta))
    return {"m": int(m), "width": w, "radius": rad, "delta": delta, "trials": trials,
            "success_fraction": frac, "max_sup": float(sup.max()), "holds": bool(frac >= 0.9)}
