import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subgauss import inequalities as ineq
from subgauss.errors import BadDelta, BadK, BadMoments, OutOfRange, SubGaussError
from subgauss.laws import K0

import oracles

C_PROOF = 0.0009398283558098103

finite = st.floats(-10, 10, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-6)


def test_proof_traced_constant():
    C1 = 6.0
    assert ineq.bernstein_constant() == min(1 / (4 * (C1 * math.e) ** 2), 1 / (4 * C1 * math.e))
    assert ineq.bernstein_constant() == pytest.approx(C_PROOF, rel=1e-15)
    assert ineq.bernstein_constant(3.0) < ineq.bernstein_constant()
    assert ineq.moment_constant(3.0) == 9.0


class TestTailBound:
    def test_regimes_and_clip(self):
        b = ineq.TailBound(4.0, 2.0, 0.5)
        assert b.switch_point == 2.0
        assert b(0.0) == 1.0
        assert b(1.0) == min(1.0, 2 * math.exp(-0.5 * 0.25))
        assert b(10.0) == pytest.approx(2 * math.exp(-0.5 * 5.0))

    def test_log_space_no_underflow(self):
        b = ineq.TailBound(1.0, 1.0, 1.0)
        assert b.log_value(1e4) == pytest.approx(math.log(2) - 1e4)

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 2), st.floats(1e-6, 1.0))
    def test_inverse(self, V, S, c, prob):
        b = ineq.TailBound(V, S, c)
        t = b.inverse(prob)
        assert b(t) <= prob * (1 + 1e-9)
        if prob < 1:
            assert b(t * (1 - 1e-6)) > prob * (1 - 1e-6)

    @given(st.floats(1e-2, 1e2), st.floats(1e-2, 1e2), st.floats(0, 50), st.floats(0, 50))
    def test_monotone(self, V, S, t1, t2):
        b = ineq.TailBound(V, S, 0.3)
        lo, hi = sorted((t1, t2))
        assert b(hi) <= b(lo)

    def test_standard_examples(self):
        b = ineq.standard_bernstein_bound([1.0, 0.0], 2.0)
        assert (b.V, b.S) == (16.0, 4.0) and b.c == C_PROOF
        r = ineq.new_bernstein_bound([1.0], 8.0).V / ineq.standard_bernstein_bound([1.0], 8.0).V
        assert r == pytest.approx(math.log(8) / 64, rel=1e-14)

    def test_rejects_nonpositive(self):
        with pytest.raises(SubGaussError):
            ineq.TailBound(0.0, 1.0, 1.0)


class TestBernstein:
    def test_single_coordinate(self):
        b = ineq.new_bernstein_bound([1.0, 0.0, 0.0], 2.0)
        assert b.V == pytest.approx(4 * math.log(2), rel=1e-15)
        assert b.S == pytest.approx(4 * math.log(2), rel=1e-15)
        assert b.c == C_PROOF and b.provenance == "proof-traced"

    def test_bad_k(self):
        with pytest.raises(BadK):
            ineq.new_bernstein_bound([1.0, 1.0], [1.3, 1.1])

    def test_user_constant(self):
        b = ineq.new_bernstein_bound([1.0], 2.0, c=0.2)
        assert b.c == 0.2 and b.provenance == "user"

    @given(arrays(float, st.integers(1, 12), elements=finite), st.floats(1.2, 20))
    def test_variance_proxy_never_larger(self, a, K):
        assume(np.any(a))
        new, old = ineq.new_bernstein_bound(a, K), ineq.standard_bernstein_bound(a, K)
        assert new.V <= old.V * (1 + 1e-12)
        # log K / K^2 peaks at 1/(2e)
        assert new.V / old.V <= 1 / (2 * math.e) + 1e-12

    @given(arrays(float, st.integers(1, 12), elements=finite), st.floats(1.2, 20), st.floats(1e-3, 1e3))
    def test_homogeneity(self, a, K, lam):
        assume(np.any(a))
        b1, b2 = ineq.new_bernstein_bound(a, K), ineq.new_bernstein_bound(lam * a, K)
        assert b2.V == pytest.approx(lam * lam * b1.V, rel=1e-12)
        assert b2.S == pytest.approx(lam * b1.S, rel=1e-12)
        t = b1.switch_point
        assert b2(lam * t) == pytest.approx(b1(t), rel=1e-9)


class TestHansonWright:
    def test_diagonal_equals_bernstein_bitwise(self):
        rng = np.random.default_rng(0)
        for K in (K0, 1.7, 4.0, 11.3):
            a = rng.standard_normal(30)
            a[::4] = 0.0
            hw = ineq.new_hanson_wright_bound(np.diag(a), K, c=C_PROOF)
            bern = ineq.new_bernstein_bound(a, K)
            assert hw.V == bern.V and hw.S == bern.S
            t = np.linspace(0, 5 * bern.switch_point, 100)
            assert np.array_equal(hw(t), bern(t))

    def test_uses_frozen_constant(self):
        b = ineq.new_hanson_wright_bound(np.eye(3), 2.0)
        assert b.provenance == "fitted" and b.c == pytest.approx(0.113947)

    def test_k_floor(self):
        with pytest.raises(BadK):
            ineq.new_hanson_wright_bound(np.eye(2), 1.1)
        ineq.new_hanson_wright_bound(np.eye(2), K0)

    def test_standard_form(self):
        A = np.array([[1.0, 2.0], [0.0, -1.0]])
        b = ineq.standard_hanson_wright_bound(A, 2.0, c=1.0)
        assert b.V == pytest.approx(6.0 * 16.0)
        assert b.S == pytest.approx(np.linalg.norm(A, 2) * 4.0)

    @given(st.floats(K0, 10.0))
    def test_variance_proxy_never_larger(self, K):
        A = np.random.default_rng(1).standard_normal((5, 5))
        new, old = ineq.new_hanson_wright_bound(A, K, c=0.1), ineq.standard_hanson_wright_bound(A, K, c=0.1)
        assert new.V <= old.V
        assert new.V / old.V == pytest.approx(math.log(K) / K**2, rel=1e-12)

    def test_nonunit_reduces_to_unit(self):
        A = np.random.default_rng(2).standard_normal((4, 4))
        u = ineq.new_hanson_wright_bound(A, 3.0, c=0.1)
        n = ineq.hanson_wright_nonunit(A, 3.0, 1.0, 1.0, c=0.1)
        assert n.V == pytest.approx(u.V, rel=1e-14) and n.S == pytest.approx(u.S, rel=1e-14)

    def test_nonunit_formula(self):
        A = np.eye(2)
        b = ineq.hanson_wright_nonunit(A, 4.0, 0.5, 1.0, c=1.0)
        kk = 16 * math.log(8.0)
        assert b.V == pytest.approx(2 * 1.0 * 4.0 * kk)
        assert b.S == pytest.approx(4.0 * kk)

    def test_nonunit_bad_moments(self):
        with pytest.raises(BadMoments):
            ineq.hanson_wright_nonunit(np.eye(2), 2.0, 1.0, 0.5)
        with pytest.raises(BadMoments):
            ineq.hanson_wright_nonunit(np.eye(2), 1.0, 1.0, 1.0)


class TestMomentBound:
    def test_value(self):
        assert ineq.moment_bound(2, 2.0) == pytest.approx(399.2527760025285, rel=1e-13)
        assert ineq.moment_bound(2, 2.0) == pytest.approx(144 * 4 * math.log(2) * 1, rel=1e-13)

    def test_larger_first_moment(self):
        assert ineq.moment_bound(1, 2.0, first_moment=4.0) == pytest.approx(10.0)

    def test_bad_k(self):
        with pytest.raises(BadK):
            ineq.moment_bound(2, 1.0)


class TestDimensions:
    def test_jl(self):
        m = ineq.jl_dimension(2.0, 0.5, 0.01, C=1.0)
        assert m == math.ceil(4 * math.log(2) * math.log(100) / 0.25)

    def test_nsp(self):
        m = ineq.nsp_dimension(0.5, 0.5, 2, 12, 1.0, C=1.0)
        assert m == math.ceil(4 / 0.25 * (2 * math.log(6 * math.e) + 1))

    def test_sketch(self):
        assert ineq.sketch_dimension(2.0, 10.0, 0.1, c0=1.0) == math.ceil(4 * math.log(2) * 10 / 0.01)

    def test_main_rhs(self):
        v = ineq.main_theorem_rhs(4.0, 2.0, 3.0, 1.0, u=2.0, C=1.0)
        assert v == pytest.approx(4 * math.sqrt(math.log(4)) * 2 * 5)

    def test_domain(self):
        with pytest.raises(SubGaussError):
            ineq.jl_dimension(2.0, 1.5, 0.1, C=1.0)
        with pytest.raises(SubGaussError):
            ineq.sketch_dimension(2.0, 1.0, 0.0, c0=1.0)


class TestRipToRnsp:
    def test_value(self):
        rho, tau = ineq.rip_to_rnsp(0.25)
        assert rho == pytest.approx(0.2760156215034254, rel=1e-14)
        assert tau == pytest.approx(1.2343793850670237, rel=1e-14)

    @given(st.floats(1e-9, 0.5, exclude_max=True))
    def test_envelope(self, d):
        rho, tau = ineq.rip_to_rnsp(d)
        assert 0 < rho < 2 * d and 0 < tau < 2

    @pytest.mark.parametrize("d", [0.0, 0.5, 0.7, -0.1])
    def test_domain(self, d):
        with pytest.raises(BadDelta):
            ineq.rip_to_rnsp(d)


class TestBinomial:
    def test_kl(self):
        assert ineq.kl_bernoulli(0.2, 0.1) == pytest.approx(0.04440300758688223, rel=1e-13)
        assert ineq.kl_bernoulli(0.0, 0.3) == pytest.approx(-math.log(0.7))

    @given(st.floats(0, 1), st.floats(0.01, 0.99))
    def test_kl_oracle(self, x, y):
        assert ineq.kl_bernoulli(x, y) == pytest.approx(oracles.kl(x, y), rel=1e-10, abs=1e-14)

    def test_exact_tail(self):
        assert ineq.binom_tail_exact(50, 0.1, 9) == pytest.approx(0.057867205718094256, rel=1e-12)

    @given(st.integers(1, 300), st.floats(0.001, 0.999), st.floats(-5, 310))
    def test_exact_tail_oracle(self, m, p, t):
        assert ineq.binom_tail_exact(m, p, t) == pytest.approx(oracles.binom_sf_at_least(m, p, t),
                                                               rel=1e-9, abs=1e-300)

    def test_lower_value(self):
        assert ineq.binom_tail_lower(50, 0.1, 10) == pytest.approx(0.013574097185798389, rel=1e-13)

    @given(st.integers(20, 400), st.floats(0.01, 0.249), st.floats(0, 1))
    def test_lower_is_lower(self, m, p, frac):
        assume(m * p >= 1)
        lo, hi = m * p + 1, m / 2
        assume(hi - lo > 1e-6)
        k = lo + (hi - lo) * (0.001 + 0.998 * frac)
        assert ineq.binom_tail_lower(m, p, k) <= oracles.binom_sf_at_least(m, p, k - 1)

    def test_lower_domain(self):
        with pytest.raises(OutOfRange):
            ineq.binom_tail_lower(50, 0.3, 20)
        with pytest.raises(OutOfRange):
            ineq.binom_tail_lower(50, 0.1, 5)
        with pytest.raises(OutOfRange):
            ineq.binom_tail_lower(5, 0.1, 2)


class TestAppendixC:
    def test_holds(self):
        r = ineq.appendix_c_check(100_000)
        assert r["holds"] and r["max_violation"] <= 1e-12
        # inequality (d) has slack in the interior
        x = 0.5
        assert (1 - x) * (2 / (x * (1 - x))) ** (x * x / 2) == pytest.approx(0.6484197773255048, rel=1e-14)

    def test_grid_floor(self):
        with pytest.raises(SubGaussError):
            ineq.appendix_c_check(10)


class TestReport:
    def test_csv_and_json(self):
        b = ineq.new_bernstein_bound([1.0, 1.0], 2.0)
        p = ineq.standard_bernstein_bound([1.0, 1.0], 2.0)
        r = ineq.BoundReport("x", {"K": 2.0}, b, np.array([0.0, 1.0, 2.0]), partner=p)
        rows = list(csv.reader(io.StringIO(r.to_csv())))
        assert rows[0] == ["t", "bound", "partner_bound"] and len(rows) == 4
        assert float(rows[2][1]) == b(1.0)
        d = json.loads(r.to_json())
        assert d["bound"]["provenance"] == "proof-traced" and len(d["partner_values"]) == 3
