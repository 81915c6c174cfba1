import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize

from subgauss import inequalities, nullspace, sketch
from subgauss.errors import DeltaTooLarge, EnumerationTooLarge, HypothesisUnmet, RankDeficient, SubGaussError
from subgauss.geometry import SetSpec
from subgauss.laws import gaussian, rademacher
from subgauss.sketch import Constraint, SketchProblem


def _problem(n=60, d=4, seed=0, **kw):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, d))
    y = B @ rng.standard_normal(d) + rng.standard_normal(n)
    return SketchProblem(B, y, **kw)


class TestConstraint:
    def test_parse(self):
        assert Constraint.parse("l1ball 2.5") == Constraint("l1ball", 2.5)
        assert Constraint.parse("l1ball radius=3") == Constraint("l1ball", 3.0)
        assert Constraint.parse("nonnegative").kind == "nonnegative"
        with pytest.raises(SubGaussError):
            Constraint.parse("box 1")
        with pytest.raises(SubGaussError):
            Constraint.parse("l1ball")

    @given(arrays(float, st.integers(1, 20), elements=st.floats(-50, 50)), st.floats(0.01, 20))
    def test_l1_projection_optimal(self, x, r):
        z = sketch.project_l1_ball(x, r)
        assert np.abs(z).sum() <= r * (1 + 1e-9) + 1e-12
        # variational inequality: <x - z, w - z> <= 0 at the vertices w = +-r e_i
        for i in range(x.size):
            for s in (-1, 1):
                w = np.zeros_like(x)
                w[i] = s * r
                assert (x - z) @ (w - z) <= 1e-7 * max(1.0, np.abs(x).max()) ** 2


class TestSolvers:
    def test_unconstrained_matches_lstsq(self):
        p = _problem()
        x, f = sketch.solve_original(p)
        ref = np.linalg.lstsq(p.B, p.y, rcond=None)[0]
        assert np.allclose(x, ref, atol=1e-10)

    def test_nonnegative_matches_nnls(self):
        p = _problem(seed=1, constraint=Constraint("nonnegative"))
        x, f = sketch.solve_original(p)
        ref, rn = optimize.nnls(p.B, p.y)
        assert f == pytest.approx(rn * rn, rel=1e-8)

    def test_l1_matches_slsqp(self):
        p = _problem(d=3, seed=2, constraint=Constraint("l1ball", 0.5))
        x, f = sketch.solve_original(p)
        res = optimize.minimize(p.objective, np.zeros(3), method="SLSQP",
                                constraints=[{"type": "ineq", "fun": lambda v: 0.5 - np.abs(v).sum()}])
        assert f <= res.fun * (1 + 1e-6)
        assert np.abs(x).sum() <= 0.5 + 1e-9

    def test_rank_deficient(self):
        B = np.ones((5, 2))
        with pytest.raises(RankDeficient):
            sketch.solve_original(SketchProblem(B, np.arange(5.0)))

    def test_shapes(self):
        with pytest.raises(SubGaussError):
            SketchProblem(np.ones((2, 3)), np.ones(2))


class TestCertificate:
    @given(st.integers(0, 2**31))
    @settings(max_examples=20)
    def test_lemma_holds_unconstrained(self, seed):
        p = _problem(seed=seed % 1000, m=15)
        _, _, cert = sketch.solve_sketched(p, seed=seed)
        assert cert.certified and cert.lemma_holds()
        assert cert.delta_achieved >= -1e-12

    def test_full_sketch_orthogonal(self):
        p = _problem(n=20, d=3, seed=3)
        Q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((20, 20)))
        _, _, cert = sketch.solve_sketched(p, A=math.sqrt(20) * Q)
        assert cert.delta_achieved == pytest.approx(0.0, abs=1e-10)
        assert cert.Z1 == pytest.approx(1.0) and cert.Z2 == pytest.approx(0.0, abs=1e-10)

    def test_constrained_not_certified(self):
        p = _problem(seed=5, constraint=Constraint("nonnegative"), m=30)
        _, _, cert = sketch.solve_sketched(p, seed=6)
        assert not cert.certified and "not certified" in cert.notes

    def test_delta_of(self):
        assert sketch.delta_of(4.0, 1.0) == pytest.approx(1.0)
        assert sketch.delta_of(0.0, 0.0) == 0.0

    def test_dimension(self):
        p = _problem(d=10)
        m = sketch.sketch_dimension_for(p, 0.1, c0=1.0)
        K = math.sqrt(8 / 3)
        assert m == math.ceil(K * K * math.log(K) * sketch.range_width_sq(10) / 0.01)
        assert sketch.range_width_sq(4) == pytest.approx(1.8799712059732507 ** 2)

    def test_lemma_check(self):
        P = np.random.default_rng(7).standard_normal((5, 16))
        T = SetSpec.finite(P / np.linalg.norm(P, axis=1, keepdims=True))
        r = sketch.lemma_check(T, rademacher(), 0.5, 200, seed=8, width_trials=2000)
        assert r["holds"]
        with pytest.raises(SubGaussError):
            sketch.lemma_check(T.scaled(3.0), gaussian(), 0.5, 10)

    def test_load_problem(self, tmp_path):
        p = _problem(n=10, d=2)
        np.savetxt(tmp_path / "B.csv", p.B, delimiter=",")
        np.savetxt(tmp_path / "y.csv", p.y, delimiter=",")
        (tmp_path / "c.txt").write_text("l1ball 1.5\n")
        q = sketch.load_problem(tmp_path / "B.csv", tmp_path / "y.csv", str(tmp_path / "c.txt"))
        assert q.constraint == Constraint("l1ball", 1.5) and np.allclose(q.B, p.B)


class TestNullspace:
    def test_normalization_centres_columns(self):
        A = (np.random.default_rng(0).random((10, 6)) < 0.3).astype(float)
        M = nullspace.normalized_matrix(A, 0.3)
        assert np.allclose(M.sum(axis=0), 0.0)
        P = nullspace.ones_complement_projector(10)
        At = nullspace.standardize(A, 0.3)
        assert np.allclose(M, P @ At / 3.0)

    def test_rip_of_orthonormal_is_zero(self):
        Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((8, 8)))
        r = nullspace.rip_constant(Q, 3)
        assert r.delta_achieved == pytest.approx(0.0, abs=1e-12) and r.supports_enumerated == 56

    def test_rip_matches_brute_force(self):
        M = np.random.default_rng(2).standard_normal((6, 5)) / math.sqrt(6)
        r = nullspace.rip_constant(M, 2)
        ref = 0.0
        for i in range(5):
            for j in range(i + 1, 5):
                s = np.linalg.svd(M[:, [i, j]], compute_uv=False)
                ref = max(ref, s[0] - 1, 1 - s[-1])
        assert r.delta_achieved == pytest.approx(ref, rel=1e-12)

    def test_enumeration_cap(self):
        with pytest.raises(EnumerationTooLarge):
            nullspace.rip_constant(np.ones((3, 60)), 5)

    def test_certificate(self):
        rep = nullspace.RipReport(4, 50, 12, 0.5, 0.25, np.ones(1), np.ones(1))
        c = nullspace.rnsp_certificate(rep, 0.5)
        assert c["rho"] == pytest.approx(0.2760156215034254)
        assert c["tau"] == pytest.approx(2 / (7 * 0.5))
        assert c["holds"]
        rep.delta_achieved = 0.6
        with pytest.raises(DeltaTooLarge):
            nullspace.rnsp_certificate(rep, 0.5)

    def test_rnsp_inequality_on_random_vectors(self):
        # ||v_S|| <= rho/sqrt(s) ||v_Sc||_1 + tau ||M v|| with S the s largest entries
        rng = np.random.default_rng(3)
        m, n, s = 120, 8, 1
        A = (rng.random((m, n)) < 0.5).astype(float)
        rep = nullspace.projected_rip(A, 0.5, s)
        if rep.delta_achieved >= 0.5:
            pytest.skip("draw did not certify")
        rho, _ = inequalities.rip_to_rnsp(rep.delta_achieved)
        M = nullspace.normalized_matrix(A, 0.5)
        for _ in range(200):
            v = rng.standard_normal(n)
            Mv = M @ v
            S = np.argsort(-np.abs(v))[:s]
            Sc = np.setdiff1d(np.arange(n), S)
            _, tau = inequalities.rip_to_rnsp(rep.delta_achieved)
            assert np.linalg.norm(v[S]) <= rho / math.sqrt(s) * np.abs(v[Sc]).sum() + tau * np.linalg.norm(Mv) + 1e-9

    def test_nsp_trials_small(self):
        r = nullspace.nsp_trials(8, 1, 0.5, 0.5, 10, seed=4)
        assert r["m"] == inequalities.nsp_dimension(0.5, 0.5, 1, 8, nullspace.NSP_U, 0.921)
        assert 0 <= r["success_fraction"] <= 1

    def test_nsp_thread_invariance(self):
        a = nullspace.nsp_trials(8, 1, 0.3, 0.5, 8, seed=5, m=30, threads=1)
        b = nullspace.nsp_trials(8, 1, 0.3, 0.5, 8, seed=5, m=30, threads=4)
        assert a == b

    def test_failure_probe(self):
        r = nullspace.failure_probe(4, 0.1, 50_000, seed=6)
        assert r["expected"] == pytest.approx(0.9 ** 8)
        assert r["holds"] and r["path"] == "zero-columns"

    def test_failure_probe_complement(self):
        r = nullspace.failure_probe(1, 0.9, 50_000, seed=7)
        assert r["path"] == "complement" and r["expected"] == pytest.approx(0.81)
        assert r["holds"]

    def test_failure_probe_hypothesis(self):
        with pytest.raises(HypothesisUnmet):
            nullspace.failure_probe(10, 0.5, 100)

    def test_csv_roundtrip(self, tmp_path):
        A = (np.random.default_rng(8).random((4, 5)) < 0.5).astype(float)
        nullspace.write_01_csv(tmp_path / "a.csv", A)
        assert np.array_equal(nullspace.read_01_csv(tmp_path / "a.csv"), A)
        (tmp_path / "b.csv").write_text("0,2\n1,0\n")
        with pytest.raises(SubGaussError):
            nullspace.read_01_csv(tmp_path / "b.csv")
