import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicoop import ValidationError
from semicoop.profitops import (
    CascadeParams,
    build_ladder,
    cascade_derivative,
    cascade_limit,
    cascade_sum,
    cascade_weighted_closed_form,
    commutator,
    geometric_sum_from_one,
    geometric_sum_from_zero,
)


class TestLadder:
    def test_two_level_commutator(self):
        ladder = build_ladder(2)
        assert np.array_equal(
            commutator(ladder.lowering, ladder.raising), np.diag([1.0, -1.0])
        )

    @pytest.mark.parametrize("d", [2, 3, 5, 9])
    def test_raising_commutes_with_itself(self, d):
        ladder = build_ladder(d)
        assert np.abs(commutator(ladder.raising, ladder.raising)).max() == 0.0
        assert np.abs(commutator(ladder.lowering, ladder.lowering)).max() == 0.0

    def test_identity_below_truncation(self):
        # root-valued matrix elements square back to integers within one ulp
        ladder = build_ladder(5)
        comm = commutator(ladder.lowering, ladder.raising)
        assert np.allclose(np.diag(comm)[:4], np.ones(4), rtol=0, atol=1e-14)

    def test_two_level_relation_exact(self):
        ladder = build_ladder(2)
        deviation = commutator(ladder.lowering, ladder.raising) - np.eye(2)
        expected = np.zeros((2, 2))
        expected[-1, -1] = -2.0
        assert np.array_equal(deviation, expected)

    @pytest.mark.parametrize("d", [2, 4, 7])
    def test_truncated_canonical_relation(self, d):
        ladder = build_ladder(d)
        deviation = commutator(ladder.lowering, ladder.raising) - np.eye(d)
        expected = np.zeros((d, d))
        expected[-1, -1] = -float(d)
        assert np.allclose(deviation, expected, rtol=0, atol=1e-14)

    def test_shutdown_state_annihilated(self):
        ladder = build_ladder(6)
        assert np.abs(ladder.lowering[:, 0]).max() == 0.0
        top = np.zeros(6)
        top[-1] = 1.0
        assert np.abs(ladder.raising @ top).max() == 0.0

    def test_cross_firm_commutators_vanish(self):
        ladder = build_ladder(3)
        low_0 = ladder.embed(ladder.lowering, 0, 2)
        raise_1 = ladder.embed(ladder.raising, 1, 2)
        assert np.abs(commutator(low_0, raise_1)).max() == 0.0

    def test_profit_state_signs(self):
        ladder = build_ladder(3)
        plus = ladder.profit_state(+1)
        minus = ladder.profit_state(-1)
        assert np.array_equal(plus + minus, 2.0 * ladder.raising)
        with pytest.raises(ValidationError):
            ladder.profit_state(0)

    def test_dimension_floor(self):
        with pytest.raises(ValidationError):
            build_ladder(1)


class TestCascade:
    def test_single_sale_half_life(self):
        params = CascadeParams(consumers=1, sales=1, kappa=np.log(2.0))
        assert cascade_sum(params) == pytest.approx(0.5, rel=1e-15)

    def test_large_kappa_kills_cascade(self):
        params = CascadeParams(consumers=3, sales=10, kappa=500.0)
        assert cascade_sum(params) < 1e-200

    def test_identical_consumers_add(self):
        one = cascade_sum(CascadeParams(1, 7, 0.3))
        two = cascade_sum(CascadeParams(2, (7, 7), 0.3))
        assert two == pytest.approx(2.0 * one, rel=1e-15)

    @pytest.mark.parametrize("kappa", [0.1, 0.7, 2.0, 5.0])
    @pytest.mark.parametrize("theta", [1, 13, 500, 10000])
    def test_closed_form_matches_bruteforce(self, kappa, theta):
        brute = cascade_sum(CascadeParams(1, theta, kappa))
        closed = cascade_weighted_closed_form(theta, kappa)
        assert abs(brute - closed) <= 1e-12 * abs(closed)

    def test_geometric_sums_are_offset_by_one_term(self):
        # the version starting at zero carries one extra leading "1"
        theta, kappa = 9, 0.4
        from_one = geometric_sum_from_one(theta, kappa)
        from_zero = geometric_sum_from_zero(theta, kappa)
        brute = sum(np.exp(-r * kappa) for r in range(1, theta + 1))
        assert from_one == pytest.approx(brute, rel=1e-14)
        assert from_zero == pytest.approx(
            sum(np.exp(-r * kappa) for r in range(theta)), rel=1e-14
        )

    @given(st.floats(0.05, 4.0), st.floats(0.05, 4.0))
    @settings(max_examples=60, deadline=None)
    def test_sum_monotone_decreasing_in_kappa(self, k1, k2):
        lo, hi = sorted((k1, k2))
        if hi - lo < 1e-9:
            return
        params_lo = CascadeParams(1, 50, lo)
        params_hi = CascadeParams(1, 50, hi)
        assert cascade_sum(params_lo) > cascade_sum(params_hi)

    @given(st.integers(1, 200), st.integers(1, 200))
    @settings(max_examples=60, deadline=None)
    def test_sum_monotone_in_sales(self, t1, t2):
        lo, hi = sorted((t1, t2))
        if lo == hi:
            return
        assert cascade_sum(CascadeParams(1, lo, 0.2)) < cascade_sum(
            CascadeParams(1, hi, 0.2)
        )

    def test_parameter_validation(self):
        with pytest.raises(ValidationError):
            CascadeParams(0, 1, 0.5)
        with pytest.raises(ValidationError):
            CascadeParams(1, 0, 0.5)
        with pytest.raises(ValidationError):
            CascadeParams(1, 1, -0.5)
        with pytest.raises(ValidationError):
            CascadeParams(2, (3,), 0.5)


class TestCascadeLimit:
    def test_half_life_value(self):
        assert cascade_limit(np.log(2.0)) == pytest.approx(1.0, rel=1e-15)

    def test_large_kappa_vanishes(self):
        assert cascade_limit(200.0) < 1e-80

    def test_laurent_expansion_near_zero(self):
        kappa = 0.01
        assert cascade_limit(kappa) == pytest.approx(1.0 / kappa - 0.5, rel=1e-2)

    def test_matches_unweighted_tail(self):
        kappa = 0.3
        tail = geometric_sum_from_one(10_000, kappa)
        assert cascade_limit(kappa) == pytest.approx(tail, rel=1e-12)

    def test_defining_identity_machine_precision(self):
        for kappa in (0.05, 0.9, 3.0):
            lhs = cascade_limit(kappa) * (1.0 - np.exp(-kappa))
            assert lhs == pytest.approx(np.exp(-kappa), rel=1e-14)

    def test_domain(self):
        with pytest.raises(ValidationError):
            cascade_limit(0.0)


class TestCascadeDerivative:
    def test_small_kappa_value(self):
        result = cascade_derivative(0.01)
        assert result.value == pytest.approx(-1.0 / 0.01**2 + 1.0 / 12.0, rel=1e-12)
        assert result.expansion_regime
        assert not result.divergent

    @pytest.mark.parametrize("kappa,rel_tol", [(0.01, 1e-3), (0.1, 1e-2)])
    def test_matches_finite_difference_of_limit(self, kappa, rel_tol):
        h = 1e-6 * kappa
        fd = (cascade_limit(kappa + h) - cascade_limit(kappa - h)) / (2 * h)
        result = cascade_derivative(kappa)
        assert abs(result.value - fd) <= rel_tol * abs(fd)

    def test_divergence_flag_fires(self):
        assert cascade_derivative(1e-7).divergent

    def test_out_of_regime_flagged(self):
        result = cascade_derivative(2.5)
        assert not result.expansion_regime

    def test_domain(self):
        with pytest.raises(ValidationError):
            cascade_derivative(-0.1)
