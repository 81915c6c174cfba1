"""Null space property certification for 0-1 Bernoulli matrices.

A 0/1 matrix is standardised entrywise, projected onto the complement of
the all-ones vector and normalised; exhaustive RIP over supports then
transfers to the l2-robust null space property.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import inequalities
from .ensembles import map_blocks, stream
from .errors import DeltaTooLarge, EnumerationTooLarge, HypothesisUnmet, SubGaussError
from .geometry import ENUMERATION_CAP

NSP_U = math.sqrt(math.log(30.0))  # 3 exp(-u^2) = 0.1


def standardize(A01, p: float) -> np.ndarray:
    if not 0 < p < 1:
        raise SubGaussError("p must lie in (0, 1)")
    return (np.asarray(A01, dtype=float) - p) / math.sqrt(p * (1 - p))


def ones_complement_projector(m: int) -> np.ndarray:
    return np.eye(m) - np.full((m, m), 1.0 / m)


def normalized_matrix(A01, p: float) -> np.ndarray:
    """(1/sqrt(m-1)) P Atilde with P the projector onto 1_m^perp."""
    At = standardize(A01, p)
    m = At.shape[0]
    if m < 2:
        raise SubGaussError("need m >= 2")
    # P X = X - column means, which is exactly what the projector does
    return (At - At.mean(axis=0, keepdims=True)) / math.sqrt(m - 1)


@dataclass
class RipReport:
    s: int  # support size enumerated (twice the NSP sparsity)
    m: int
    n: int
    p: float
    delta_achieved: float
    sigma_max: np.ndarray = field(repr=False)
    sigma_min: np.ndarray = field(repr=False)
    supports_enumerated: int = 0

    @property
    def worst_support(self) -> int:
        return int(np.argmax(np.maximum(self.sigma_max - 1, 1 - self.sigma_min)))

    def to_dict(self) -> dict:
        return {"s": self.s, "m": self.m, "n": self.n, "p": self.p,
                "delta_achieved": self.delta_achieved,
                "sigma_max": float(self.sigma_max.max()), "sigma_min": float(self.sigma_min.min()),
                "supports_enumerated": self.supports_enumerated}


def rip_constant(M: np.ndarray, order: int) -> RipReport:
    """Exact RIP constant of order ``order`` by SVD of every column subset."""
    m, n = M.shape
    order = min(order, n)
    count = math.comb(n, order)
    if count > ENUMERATION_CAP:
        raise EnumerationTooLarge(f"C({n},{order}) = {count} supports exceeds cap {ENUMERATION_CAP}")
    S = np.array(list(combinations(range(n), order)), dtype=np.intp)
    sub = np.swapaxes(M[:, S], 0, 1)  # (supports, m, order)
    sv = np.linalg.svd(sub, compute_uv=False)
    smax, smin = sv[:, 0], sv[:, -1]
    delta = float(np.max(np.maximum(smax - 1.0, 1.0 - smin)))
    return RipReport(order, m, n, float("nan"), max(delta, 0.0), smax, smin, len(S))


def projected_rip(A01, p: float, s: int) -> RipReport:
    """RIP of order 2s of the normalised projected matrix."""
    M = normalized_matrix(A01, p)
    rep = rip_constant(M, 2 * s)
    rep.p = p
    return rep


def rnsp_certificate(report: RipReport, rho_target: float) -> dict:
    """Transfer RIP(2s, delta) to l2-rNSP(s, rho', tau') and scale tau to the
    unnormalised 0-1 matrix: tau = 2 / (sqrt(m-1) sqrt(p(1-p)))."""
    d = report.delta_achieved
    if d >= 0.5:
        raise DeltaTooLarge(f"delta = {d:g} is not below 1/2")
    rho, tau_n = (0.0, 1.0) if d == 0 else inequalities.rip_to_rnsp(d)
    p, m = report.p, report.m
    tau = 2.0 / (math.sqrt(m - 1) * math.sqrt(p * (1 - p)))
    return {"delta": d, "rho": rho, "tau_normalized": tau_n, "tau": tau,
            "rho_target": rho_target, "holds": bool(rho < rho_target)}


def nsp_trials(n: int, s: int, p: float, rho: float, seeds: int, seed: int = 0,
               m: int | None = None, C: float | None = None, threads: int = 1,
               constants_file=None) -> dict:
    """Fraction of sampled 0-1 matrices whose projected RIP constant is at
    most rho/2, which makes the transferred rho' smaller than rho."""
    if m is None:
        m = inequalities.nsp_dimension(rho, p, s, n, NSP_U, C, constants_file)

    def block(rng, count):
        out = np.empty(count)
        for i in range(count):
            out[i] = projected_rip((rng.random((m, n)) < p).astype(float), p, s).delta_achieved
        return out

    deltas = map_blocks(block, seeds, seed, m * n * math.comb(n, min(2 * s, n)), threads)
    frac = float(np.mean(deltas <= rho / 2))
    return {"n": n, "s": s, "p": p, "rho": rho, "m": int(m), "u": NSP_U, "seeds": seeds,
            "success_fraction": frac, "median_delta": float(np.median(deltas)),
            "max_delta": float(deltas.max()), "holds": bool(frac >= 0.9)}


def failure_probe(m: int, p: float, trials: int, seed: int = 0, threads: int = 1) -> dict:
    """Frequency of two identical degenerate columns when m p < 1/2 (zero
    columns) or m (1-p) < 1/2 (all-ones columns, i.e. zero columns of 1 - A).

    On every such draw v = e_1 - e_2 lies in the null space, so with
    S = {1, 2} the rNSP inequality reads sqrt 2 <= 0 and fails.  Only the
    first two columns are drawn since the event depends on nothing else.
    """
    if not 0 < p < 1 or m < 1:
        raise SubGaussError("need m >= 1 and p in (0, 1)")
    if m * p < 0.5:
        complement, expected = False, (1 - p) ** (2 * m)
    elif m * (1 - p) < 0.5:
        complement, expected = True, p ** (2 * m)
    else:
        raise HypothesisUnmet("need m p < 1/2 or m (1-p) < 1/2")
    v = np.array([1.0, -1.0])

    def block(rng, count):
        cols = (rng.random((count, m, 2)) < p).astype(float)
        D = 1.0 - cols if complement else cols
        hit = ~D.any(axis=(1, 2))
        # witness: A v = 0 exactly whenever the event occurs
        if hit.any() and np.any(cols[hit] @ v):
            raise AssertionError("witness vector is not in the null space")
        return hit.astype(float)

    hits = map_blocks(block, trials, seed, 2 * m, threads)
    freq = float(hits.mean())
    sigma = math.sqrt(expected * (1 - expected) / trials)
    z = (freq - expected) / sigma if sigma > 0 else 0.0
    return {"m": m, "p": p, "trials": trials, "path": "complement" if complement else "zero-columns",
            "frequency": freq, "expected": expected, "sigma": sigma, "z": z,
            "at_least_quarter": bool(freq >= 0.25 - 3 * sigma),
            "holds": bool(abs(z) <= 3 and freq >= 0.25 - 3 * sigma)}


def write_01_csv(path, A01) -> None:
    np.savetxt(path, np.asarray(A01, dtype=int), delimiter=",", fmt="%d")


def read_01_csv(path) -> np.ndarray:
    A = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if not np.isin(A, (0.0, 1.0)).all():
        raise SubGaussError("matrix entries must be 0 or 1")
    return A
