"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python tests/test_acceptance.py``.  Seeds here are disjoint from the
calibration seed that produced the frozen constants.
"""
import json
import math
import sys
import time

import numpy as np
import pytest

from subgauss import cli, geometry, inequalities, montecarlo, nullspace, orlicz, sketch
from subgauss.calibrate import CALIBRATION_SEED
from subgauss.laws import (K0, exponential, gaussian, rademacher, scaled_bernoulli, sparse_ternary,
                           std_bernoulli)

SEED = 31_415_926
assert SEED != CALIBRATION_SEED

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(n: int, ok: bool, detail: str, budget: float):
        elapsed = time.perf_counter() - start
        within = elapsed < budget
        line = (f"criterion {n:2d}: {'PASS' if ok and within else 'FAIL'}  {detail}  "
                f"[{elapsed:.1f}s / budget {budget:g}s]")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line

    return emit


def _seed(k: int) -> int:
    return int(np.random.SeedSequence(SEED, spawn_key=(k,)).generate_state(1)[0])


def test_c01_psi_golden_values(report):
    cases = [(gaussian(), 2.0, math.sqrt(8 / 3)), (rademacher(), 2.0, 1 / math.sqrt(math.log(2))),
             (exponential(1.0), 1.0, 2.0), (exponential(3.0), 1.0, 2 / 3)]
    errs = []
    for law, alpha, golden in cases:
        a = orlicz.psi_norm_analytic(law, alpha).value
        r = orlicz.psi_norm_from_mgf(orlicz.mgf_of_power(law, alpha), alpha).value
        errs += [abs(a - golden) / golden, abs(r - golden) / golden]
    worst = max(errs)
    report(1, worst <= 1e-6, f"max relative error {worst:.2e}", 1.0)


def test_c02_unit_variance_floor(report):
    laws = [gaussian(), rademacher(), std_bernoulli(0.1), scaled_bernoulli(4), sparse_ternary(0.2)]
    rows, ok = [], True
    for k, law in enumerate(laws):
        x = law.sample(np.random.default_rng(_seed(200 + k)), 1_000_000)
        r = orlicz.psi_norm_from_samples(x, 2.0, seed=_seed(210 + k), n_boot=50)
        good = r.value >= 1.201 - r.half_width
        ok &= good
        rows.append(f"{law}={r.value:.4f}+-{r.half_width:.4f}")
    report(2, ok, "; ".join(rows), 30.0)


def test_c03_tightness(report):
    rows, ok = [], True
    for k, K in enumerate((4.0, 8.0, 12.0)):
        good, r = montecarlo.tightness_check(K, trials=1_000_000, seed=_seed(300 + k))
        ok &= good
        rows.append(f"K={K:g} m={r['m']} psi2={r['psi2']['value']:.3f} >= {r['lower_bound']:.3f}")
    report(3, ok, "; ".join(rows), 300.0)


def test_c04_scaling_fit(report):
    fit = montecarlo.scaling_fit([4.0, 6.0, 8.0, 12.0], trials=200_000, seed=_seed(400))
    report(4, fit.rss < fit.alt_rss,
           f"rss(K sqrt log K)={fit.rss:.3e} vs rss(K^2)={fit.alt_rss:.3e} slope={fit.slope:.3f}", 300.0)


def test_c05_bound_domination(report):
    rng = np.random.default_rng(_seed(500))
    a = rng.standard_normal(30)
    a /= np.linalg.norm(a)
    A = rng.standard_normal((20, 20))
    rows, ok = [], True
    for k, law in enumerate((gaussian(), scaled_bernoulli(4), std_bernoulli(0.1))):
        bern = montecarlo.empirical_tail(a, law, 1_000_000, seed=_seed(510 + k))
        hw = montecarlo.empirical_hw_tail(A, law, 1_000_000, seed=_seed(520 + k))
        assert bern.bound.provenance == "proof-traced" and hw.bound.provenance == "fitted"
        for name, b in (("bernstein", bern), ("hw", hw)):
            d = b.domination()
            ok &= d["holds"] and d["checked_points"] > 0
            rows.append(f"{law}/{name}: {d['checked_points']} pts excess {d['max_excess']:.2e}")
    report(5, ok, "; ".join(rows), 600.0)


def test_c06_diagonal_consistency(report):
    rng = np.random.default_rng(_seed(600))
    ok = True
    for K in (K0, 1.5, 2.0, 4.0, 10.0):
        a = rng.standard_normal(50)
        a[rng.random(50) < 0.2] = 0.0
        hw = inequalities.new_hanson_wright_bound(np.diag(a), K, c=inequalities.bernstein_constant())
        bern = inequalities.new_bernstein_bound(a, K)
        ok &= hw.V == bern.V and hw.S == bern.S
    report(6, ok, "V and S bitwise equal for 5 values of K", 1.0)


def test_c07_binomial_lower_bound(report):
    worst, ok = math.inf, True
    for m, p in ((50, 0.1), (200, 0.05)):
        lo, hi = m * p + 1, m / 2
        for k in np.linspace(lo, hi, 52)[1:-1]:
            exact = inequalities.binom_tail_exact(m, p, k - 1)
            bound = inequalities.binom_tail_lower(m, p, k)
            ok &= exact >= bound
            worst = min(worst, exact / bound)
    report(7, ok, f"min exact/bound ratio {worst:.3f} over 100 k values", 1.0)


def test_c08_appendix_c(report):
    r = inequalities.appendix_c_check(100_000)
    report(8, r["holds"], f"max normalised violation {r['max_violation']:.2e}", 1.0)


def test_c09_property_suite(report):
    cases = [(gaussian(), 2.0), (rademacher(), 2.0), (std_bernoulli(0.3), 2.0),
             (sparse_ternary(0.2), 2.0), (exponential(), 1.0)]
    ok, rows = True, []
    for k, (law, alpha) in enumerate(cases):
        rng = np.random.default_rng(_seed(900 + k))
        r = orlicz.psi_property_suite(law.sample(rng, 200_000), law.sample(rng, 200_000), alpha=alpha)
        ok &= r["all"]
        rows.append(f"{law}:{'ok' if r['all'] else 'fail'}")
    report(9, ok, " ".join(rows), 60.0)


def test_c10_jl(report):
    pts = np.random.default_rng(_seed(1000)).standard_normal((100, 256))
    t0 = time.perf_counter()
    r = montecarlo.jl_probe(pts, rademacher(), 0.2, 0.05, 200, seed=_seed(1001))
    probe_ok = r["all_pairs_success"] >= 0.95
    t_probe = time.perf_counter() - t0
    t0 = time.perf_counter()
    o = montecarlo.jl_optimality_probe(0.1, trials=1_000_000, seed=_seed(1002))
    t_opt = time.perf_counter() - t0
    ok = probe_ok and o["failure_frequency"] >= 0.2 and t_probe < 120 and t_opt < 10
    report(10, ok, f"m={r['m']} success={r['all_pairs_success']:.3f} ({t_probe:.1f}s); "
                   f"optimality m={o['m']} failure={o['failure_frequency']:.4f} "
                   f"floor={o['floor']:.4f} ({t_opt:.1f}s)", 130.0)


def test_c11_sketch(report):
    rng = np.random.default_rng(_seed(1100))
    B = rng.standard_normal((400, 10))
    y = B @ rng.standard_normal(10) + rng.standard_normal(400)
    base = sketch.SketchProblem(B, y)
    m = sketch.sketch_dimension_for(base, 0.1)
    p = sketch.SketchProblem(B, y, m=m)
    xs, fs = sketch.solve_original(p)
    deltas, lemma = [], True
    for k in range(200):
        _, _, cert = sketch.solve_sketched(p, seed=_seed(1110 + k), x_star=xs, f_star=fs)
        lemma &= cert.certified and cert.lemma_holds()
        deltas.append(cert.delta_achieved)
    frac = float(np.mean(np.array(deltas) <= 0.1))
    report(11, lemma and frac >= 0.9,
           f"m={m} certificate on all seeds={lemma} delta<=0.1 in {frac:.3f}", 180.0)


def test_c12_nsp(report):
    rows, ok = [], True
    for k, p in enumerate((0.3, 0.5)):
        r = nullspace.nsp_trials(12, 2, p, 0.5, 100, seed=_seed(1200 + k))
        ok &= r["success_fraction"] >= 0.9
        rows.append(f"p={p} m={r['m']} success={r['success_fraction']:.2f}")
    for d in np.linspace(0.001, 0.499, 200):
        rho, tau = inequalities.rip_to_rnsp(float(d))
        ok &= rho < 2 * d and tau < 2
    f = nullspace.failure_probe(4, 0.1, 100_000, seed=_seed(1210))
    ok &= abs(f["frequency"] - 0.9 ** 8) <= 3 * f["sigma"]
    rows.append(f"probe freq={f['frequency']:.4f} vs {0.9 ** 8:.5f} (z={f['z']:.2f})")
    report(12, ok, "; ".join(rows), 180.0)


# one configuration per subcommand, sized so several commands span multiple blocks
CLI_RUNS = [
    ["psi", "dist=std_bernoulli", "p=0.2", "method=samples", "--trials", "30000"],
    ["width", "n=12", "s=3", "--trials", "5000"],
    ["tail", "m=20", "dist=rademacher", "--trials", "30000"],
    ["hw", "n=10", "dist=gaussian", "--trials", "30000"],
    ["concentrate", "m=20", "n=8", "--trials", "20000"],
    ["scaling", "Ks=4,6,8", "--trials", "20000"],
    ["tightness", "K=4", "--trials", "50000"],
    ["jl", "points=20", "dim=64", "--trials", "40"],
    ["jl", "mode=optimality", "--trials", "50000"],
    ["sketch", "n=200", "d=5", "--trials", "20"],
    ["nsp", "n=8", "s=1", "--trials", "20"],
    ["nsp", "mode=probe", "m=4", "p=0.1", "--trials", "50000"],
    ["binom", "m=200", "p=0.05", "k=20"],
    ["appendixc"],
]


def test_c13_cli_determinism(report):
    assert {r[0] for r in CLI_RUNS} == set(cli.COMMANDS)
    bad = []
    for argv in CLI_RUNS:
        outs = [cli.run([*argv, "--no-timestamp", "--threads", str(t), "--out", "/dev/null"]) for t in (1, 1, 8, 8)]
        codes = {o[0] for o in outs}
        texts = {o[1] for o in outs}
        if len(texts) != 1 or len(codes) != 1 or codes == {cli.EXIT_USAGE} or "timestamp" in json.loads(outs[0][1]):
            bad.append(argv[0])
    report(13, not bad, f"{len(CLI_RUNS)} configurations identical at threads 1 and 8"
                        + (f"; differing: {bad}" if bad else ""), 120.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
