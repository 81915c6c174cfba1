"""Scalar entry laws used throughout the package.

A ``DistributionSpec`` is a tagged, immutable description of a real random
variable.  Every variant carries at most one parameter, so the spec is just
``(kind, param)``.  Discrete laws expose their atoms, which lets the Orlicz
code evaluate exact expectations instead of sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SubGaussError

#: psi_2 norm of the constant 1, which is also the smallest possible psi_2
#: norm of a unit second-moment variable.
K0 = 1.0 / math.sqrt(math.log(2.0))

KINDS = (
    "gaussian",
    "rademacher",
    "bernoulli01",
    "std_bernoulli",
    "scaled_bernoulli",
    "sparse_ternary",
    "exponential",
    "bounded_uniform",
)

_ALIASES = {
    "normal": "gaussian",
    "bernoulli": "bernoulli01",
    "std-bernoulli": "std_bernoulli",
    "standardized_bernoulli": "std_bernoulli",
    "scaled-bernoulli": "scaled_bernoulli",
    "sparse-ternary": "sparse_ternary",
    "ternary": "sparse_ternary",
    "uniform": "bounded_uniform",
    "bounded-uniform": "bounded_uniform",
    "exp": "exponential",
}

# name of the single parameter of each variant (None: parameter-free)
PARAM_NAMES = {
    "gaussian": "sigma",
    "rademacher": None,
    "bernoulli01": "p",
    "std_bernoulli": "p",
    "scaled_bernoulli": "K",
    "sparse_ternary": "q",
    "exponential": "lam",
    "bounded_uniform": "M",
}


def scaled_bernoulli_level(K: float) -> float:
    """Return L**2 = K**2 log K for the scaled Bernoulli construction."""
    return K * K * math.log(K)


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    param: Optional[float] = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise SubGaussError(f"unknown distribution kind {self.kind!r}")
        if PARAM_NAMES[kind] is None:
            if self.param is not None:
                raise SubGaussError(f"{kind} takes no parameter")
            return
        if self.param is None:
            defaults = {"gaussian": 1.0, "exponential": 1.0}
            if kind not in defaults:
                raise SubGaussError(f"{kind} requires parameter {PARAM_NAMES[kind]}")
            object.__setattr__(self, "param", defaults[kind])
        x = float(self.param)
        object.__setattr__(self, "param", x)
        ok = {
            "gaussian": x > 0,
            # p = 1 is allowed here: it is the constant X = 1, the equality
            # case of the unit-variance psi_2 floor.
            "bernoulli01": 0 < x <= 1,
            "std_bernoulli": 0 < x < 1,
            "scaled_bernoulli": x >= 4,
            "sparse_ternary": 0 < x <= 1,
            "exponential": x > 0,
            "bounded_uniform": x > 0,
        }[kind]
        if not ok:
            raise SubGaussError(f"parameter {PARAM_NAMES[kind]}={x} outside the domain of {kind}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def parse(cls, name: str, **params: float) -> "DistributionSpec":
        kind = _ALIASES.get(name, name)
        if kind not in KINDS:
            raise SubGaussError(f"unknown distribution kind {name!r}")
        pname = PARAM_NAMES[kind]
        extra = set(params) - ({pname} if pname else set())
        if extra:
            raise SubGaussError(f"unexpected parameter(s) for {kind}: {sorted(extra)}")
        return cls(kind, params.get(pname) if pname else None)

    def __str__(self) -> str:
        pname = PARAM_NAMES[self.kind]
        return self.kind if pname is None else f"{self.kind}({pname}={self.param:g})"

    # -- structure ----------------------------------------------------------
    @property
    def is_discrete(self) -> bool:
        return self.atoms() is not None

    def atoms(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Support points and probabilities for discrete laws, else None."""
        k, x = self.kind, self.param
        if k == "rademacher":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if k == "bernoulli01":
            return np.array([0.0, 1.0]), np.array([1.0 - x, x])
        if k == "std_bernoulli":
            p, q = x, 1.0 - x
            return (np.array([-math.sqrt(p / q), math.sqrt(q / p)]), np.array([q, p]))
        if k == "scaled_bernoulli":
            L2 = scaled_bernoulli_level(x)
            L, p = math.sqrt(L2), 1.0 / L2
            return np.array([-L, 0.0, L]), np.array([p / 2, 1.0 - p, p / 2])
        if k == "sparse_ternary":
            v = 1.0 / math.sqrt(x)
            return np.array([-v, 0.0, v]), np.array([x / 2, 1.0 - x, x / 2])
        return None

    def mean(self) -> float:
        k, x = self.kind, self.param
        if k == "bernoulli01":
            return x
        if k == "exponential":
            return 1.0 / x
        return 0.0

    def second_moment(self) -> float:
        k, x = self.kind, self.param
        if k == "gaussian":
            return x * x
        if k == "exponential":
            return 2.0 / (x * x)
        if k == "bounded_uniform":
            return x * x / 3.0
        if k == "bernoulli01":
            return x
        return 1.0

    def variance(self) -> float:
        return self.second_moment() - self.mean() ** 2

    @property
    def mean_zero(self) -> bool:
        return self.mean() == 0.0

    @property
    def unit_variance(self) -> bool:
        return self.mean_zero and abs(self.second_moment() - 1.0) < 1e-12

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """E f(X) for discrete laws (exact finite sum)."""
        at = self.atoms()
        if at is None:
            raise SubGaussError(f"{self} is not discrete")
        v, p = at
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.sum(p * f(v)))

    # -- sampling -------------------------------------------------------------
    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        k, x = self.kind, self.param
        if k == "gaussian":
            return x * rng.standard_normal(size)
        if k == "exponential":
            return rng.exponential(1.0 / x, size)
        if k == "bounded_uniform":
            return rng.uniform(-x, x, size)
        if k == "rademacher":
            return np.where(rng.random(size) < 0.5, -1.0, 1.0)
        u = rng.random(size)
        if k == "bernoulli01":
            return (u < x).astype(float)
        if k == "std_bernoulli":
            p, q = x, 1.0 - x
            return np.where(u < p, math.sqrt(q / p), -math.sqrt(p / q))
        # ternary laws: one uniform decides both the zero pattern and the sign
        if k == "scaled_bernoulli":
            L2 = scaled_bernoulli_level(x)
            amp, p = math.sqrt(L2), 1.0 / L2
        else:
            amp, p = 1.0 / math.sqrt(x), x
        out = np.zeros(np.shape(u))
        out[u < p / 2] = -amp
        out[(u >= p / 2) & (u < p)] = amp
        return out


def gaussian(sigma: float = 1.0) -> DistributionSpec:
    return DistributionSpec("gaussian", sigma)


def rademacher() -> DistributionSpec:
    return DistributionSpec("rademacher")


def bernoulli01(p: float) -> DistributionSpec:
    return DistributionSpec("bernoulli01", p)


def std_bernoulli(p: float) -> DistributionSpec:
    return DistributionSpec("std_bernoulli", p)


def scaled_bernoulli(K: float) -> DistributionSpec:
    return DistributionSpec("scaled_bernoulli", K)


def sparse_ternary(q: float) -> DistributionSpec:
    return DistributionSpec("sparse_ternary", q)


def exponential(lam: float = 1.0) -> DistributionSpec:
    return DistributionSpec("exponential", lam)


def bounded_uniform(M: float) -> DistributionSpec:
    return DistributionSpec("bounded_uniform", M)
