"""Fit the unnamed absolute constants once and freeze them.

Every fit runs on the calibration master seed ``CALIBRATION_SEED``, which the
test suite never uses, and aims at a stricter target than the acceptance
checks (success rate 0.99 or 0.97 instead of 0.95 or 0.90, or a halved /
inflated constant).  Run ``python -m subgauss.calibrate [--out FILE]``.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import constants, geometry, montecarlo, nullspace, sketch
from .ensembles import EnsembleSpec, MultiplierSpec
from .geometry import SetSpec
from .laws import gaussian, rademacher, scaled_bernoulli, sparse_ternary, std_bernoulli

CALIBRATION_SEED = 918_273_645


def _seed(*key: int) -> int:
    return int(np.random.SeedSequence(CALIBRATION_SEED, spawn_key=key).generate_state(1)[0])


def largest_dominating_c(batch: montecarlo.TrialBatch) -> float:
    """Largest c with 2 exp(-c h(t)) >= Wilson upper limit at every grid t
    where at least one trial exceeded t."""
    b = batch.bound
    h = np.minimum(batch.t_grid ** 2 / b.V, batch.t_grid / b.S)
    _, hi = batch.wilson()
    ok = (batch.exceed_counts > 0) & (hi < 1.0)
    if not ok.any():
        return math.inf
    return float(np.min(np.log(2.0 / hi[ok]) / h[ok]))


def fit_hw_c(trials: int = 200_000, log=print) -> float:
    rng = np.random.default_rng(_seed(1))
    n = 20
    G = rng.standard_normal((n, n))
    u = rng.standard_normal(n)
    u /= np.linalg.norm(u)
    off = G - np.diag(np.diag(G))
    mats = {"identity": np.eye(n), "dense": G, "rank1": np.outer(u, u), "offdiag": off}
    laws = [gaussian(), rademacher(), std_bernoulli(0.1), sparse_ternary(0.1), scaled_bernoulli(4)]
    best = math.inf
    for i, law in enumerate(laws):
        for j, (name, A) in enumerate(mats.items()):
            b = montecarlo.empirical_hw_tail(A, law, trials, seed=_seed(2, i, j), c=1.0)
            c = largest_dominating_c(b)
            log(f"  hw {law} {name}: c <= {c:.4f}")
            best = min(best, c)
    return best / 2.0


def _grid(lo: float, hi: float) -> list[float]:
    """Geometric search grid, 5% steps, three significant digits."""
    n = int(math.ceil(math.log(hi / lo) / math.log(1.05))) + 1
    return [float(f"{lo * 1.05 ** k:.3g}") for k in range(n)]


def _smallest_passing(grid, passes, log, name):
    for v in grid:
        ok, info = passes(v)
        log(f"  {name}={v:.4g}: {info}")
        if ok:
            return v
    raise RuntimeError(f"no {name} on the grid reached the calibration target")


def fit_jl_C(seeds: int = 200, log=print) -> float:
    pts = np.random.default_rng(_seed(3)).standard_normal((100, 256))

    def passes(C):
        r = montecarlo.jl_probe(pts, rademacher(), 0.2, 0.05, seeds, seed=_seed(4), C=C)
        return r["all_pairs_success"] >= 0.99, f"m={r['m']} success={r['all_pairs_success']:.3f}"

    return _smallest_passing(_grid(0.3, 3.0), passes, log, "jl_C")


def fit_sketch_c0(seeds: int = 200, log=print) -> float:
    rng = np.random.default_rng(_seed(5))
    B = rng.standard_normal((400, 10))
    y = B @ rng.standard_normal(10) + rng.standard_normal(400)
    base = sketch.SketchProblem(B, y)
    xs, fs = sketch.solve_original(base)

    def passes(c0):
        m = sketch.sketch_dimension_for(base, 0.1, c0=c0)
        p = sketch.SketchProblem(B, y, m=m)
        ds = np.array([sketch.solve_sketched(p, seed=_seed(6, s), x_star=xs, f_star=fs)[2].delta_achieved
                       for s in range(seeds)])
        frac = float(np.mean(ds <= 0.1))
        return frac >= 0.97, f"m={m} success={frac:.3f}"

    return _smallest_passing(_grid(0.02, 1.0), passes, log, "sketch_c0")


def fit_nsp_C(seeds: int = 100, log=print) -> float:
    def passes(C):
        rs = [nullspace.nsp_trials(12, 2, p, 0.5, seeds, seed=_seed(7, k), C=C) for k, p in enumerate((0.3, 0.5))]
        fr = [r["success_fraction"] for r in rs]
        return min(fr) >= 0.97, f"m={[r['m'] for r in rs]} success={fr}"

    return _smallest_passing(_grid(0.3, 5.0), passes, log, "nsp_C")


def lemma_set(seed: int) -> SetSpec:
    P = np.random.default_rng(seed).standard_normal((20, 64))
    return SetSpec.finite(2.0 * P / np.linalg.norm(P, axis=1, keepdims=True) * np.linspace(0.2, 1.0, 20)[:, None])


def fit_lemma_C(trials: int = 200, log=print) -> float:
    T = lemma_set(_seed(8))

    def passes(C):
        r = sketch.lemma_check(T, gaussian(), 0.5, trials, seed=_seed(9), C=C)
        return r["success_fraction"] >= 0.97, f"m={r['m']} success={r['success_fraction']:.3f}"

    return _smallest_passing(_grid(0.1, 100.0), passes, log, "lemma_C")


def fit_increment_C(pairs: int = 20, trials: int = 20_000, log=print) -> float:
    rng = np.random.default_rng(_seed(10))
    ens = EnsembleSpec(10, 8, gaussian())
    B = MultiplierSpec.identity(10)
    L = ens.K * math.sqrt(math.log(ens.K))
    worst = 0.0
    for k in range(pairs):
        x, y = rng.standard_normal((2, 8))
        x /= np.linalg.norm(x)
        y /= np.linalg.norm(y)
        psi = montecarlo.increment_psi2(ens, B, x, y, trials, seed=_seed(11, k))
        worst = max(worst, psi.ci[1] / (L * B.operator_norm * np.linalg.norm(x - y)))
    log(f"  increment ratio max = {worst:.4f}")
    return 1.25 * worst


def fit_main_C(trials: int = 20_000, log=print) -> float:
    configs = [
        (EnsembleSpec(30, 10, gaussian()), SetSpec.sparse_sphere(10, 2)),
        (EnsembleSpec(30, 10, rademacher()), SetSpec.sparse_sphere(10, 2)),
        (EnsembleSpec(30, 10, scaled_bernoulli(4)), SetSpec.sparse_sphere(10, 2)),
        (EnsembleSpec(30, 64, gaussian()), lemma_set(_seed(12))),
    ]
    worst = 0.0
    for k, (ens, T) in enumerate(configs):
        B = MultiplierSpec.identity(ens.m)
        vals = montecarlo.deviation_values(ens, B, T, trials, seed=_seed(13, k))
        w, _ = geometry.gaussian_width(T, 20_000, _seed(14, k))
        rad = geometry.radius(T)
        L = ens.K * math.sqrt(math.log(ens.K))
        for u in (1.0, 1.5, 2.0):
            q = np.quantile(vals, 1.0 - 3.0 * math.exp(-u * u) / 2.0)
            worst = max(worst, q / (L * B.operator_norm * (w + u * rad)))
    log(f"  main ratio max = {worst:.4f}")
    return 1.25 * worst


def calibrate(log=print) -> dict:
    out = {}
    log("hw_c")
    out["hw_c"] = (fit_hw_c(log=log), "fitted: min dominating c over 20 HW batches, halved")
    log("jl_C")
    out["jl_C"] = (fit_jl_C(log=log), "fitted: smallest grid C with all-pairs success >= 0.99")
    log("sketch_c0")
    out["sketch_c0"] = (fit_sketch_c0(log=log), "fitted: smallest grid c0 with delta<=0.1 in >= 97% of seeds")
    log("nsp_C")
    out["nsp_C"] = (fit_nsp_C(log=log), "fitted: smallest grid C with RIP<=rho/2 in >= 97% of seeds")
    log("lemma_C")
    out["lemma_C"] = (fit_lemma_C(log=log), "fitted: smallest grid C with squared deviation<=delta in >= 97%")
    log("increment_C")
    out["increment_C"] = (fit_increment_C(log=log), "fitted: max increment ratio over 20 pairs, x1.25")
    log("main_C")
    out["main_C"] = (fit_main_C(log=log), "fitted: max quantile ratio at half the allowed failure rate, x1.25")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m subgauss.calibrate")
    ap.add_argument("--out", default=str(constants.default_path()))
    args = ap.parse_args(argv)
    values = calibrate(log=lambda s: print(s, file=sys.stderr))
    values = {k: (float(f"{v:.6g}"), note) for k, (v, note) in values.items()}
    constants.write(args.out, values)
    print(constants.format_constants(values), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
