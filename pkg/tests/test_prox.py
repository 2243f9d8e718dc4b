import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bisect_root, linf_prox_full_grid, linf_prox_level_scan
from unmix import (
    LpThresholdParams,
    LqShrinkParams,
    brute_force_prox_1d,
    shrink_lq,
    threshold_half_closed_form,
    threshold_linf,
    threshold_lp,
)

# oracle-derived roots, frozen (bisection re-derives them below)
ROOT_HALF_A1_X2 = 1.8144020185805389     # t + 0.25 t^(-1/2) = 2
ROOT_Q4_B05_X3 = 1.2134116627622296      # t + t^3 = 3
TAU_HALF_A1 = 0.9449407874211548         # (54^(1/3)/4) * 1^(2/3)


def lp_forward(t, p, alpha):
    return t + 0.5 * alpha * p * np.sign(t) * np.abs(t) ** (p - 1.0)


class TestLpParams:
    def test_gamma_tau_formulas(self):
        params = LpThresholdParams(p=0.5, alpha=1.0)
        assert params.gamma_alpha == pytest.approx((1.0 * 0.5) ** (1 / 1.5), rel=1e-14)
        assert params.tau_alpha == pytest.approx(1.5 * params.gamma_alpha, rel=1e-14)
        assert params.tau_alpha == pytest.approx(TAU_HALF_A1, abs=1e-12)

    def test_tau_equals_forward_map_at_gamma(self):
        for p in (0.1, 0.3, 0.5, 0.8, 0.95):
            for alpha in (0.01, 0.3, 2.0):
                params = LpThresholdParams(p=p, alpha=alpha)
                assert params.tau_alpha == pytest.approx(
                    lp_forward(params.gamma_alpha, p, alpha), rel=1e-12)
                assert params.t_alpha < params.gamma_alpha

    def test_degenerate_conventions(self):
        soft = LpThresholdParams(p=1.0, alpha=0.8)
        assert soft.tau_alpha == 0.4 and soft.gamma_alpha == 0.0 and soft.t_alpha == 0.0
        hard = LpThresholdParams(p=0.0, alpha=0.81)
        assert hard.tau_alpha == hard.gamma_alpha == pytest.approx(0.9)

    def test_rejects_bad_domain(self):
        with pytest.raises(ValueError):
            LpThresholdParams(p=1.5, alpha=1.0)
        with pytest.raises(ValueError):
            LpThresholdParams(p=0.5, alpha=0.0)


class TestThresholdLp:
    def test_soft_threshold(self):
        params = LpThresholdParams(p=1.0, alpha=1.0)
        assert threshold_lp(2.0, params) == 1.5
        assert threshold_lp(-2.0, params) == -1.5
        assert threshold_lp(0.4, params) == 0.0

    def test_hard_threshold(self):
        params = LpThresholdParams(p=0.0, alpha=1.0)
        assert threshold_lp(0.9, params) == 0.0
        assert threshold_lp(1.5, params) == 1.5
        assert threshold_lp(1.0, params) == 1.0  # boundary keeps the input

    def test_half_power_root_matches_bisection_oracle(self):
        params = LpThresholdParams(p=0.5, alpha=1.0)
        oracle = bisect_root(lambda t: lp_forward(t, 0.5, 1.0) - 2.0,
                             params.gamma_alpha, 2.0)
        assert oracle == pytest.approx(ROOT_HALF_A1_X2, abs=1e-12)
        assert threshold_lp(2.0, params) == pytest.approx(oracle, abs=1e-10)

    def test_below_jump_is_zero(self):
        params = LpThresholdParams(p=0.5, alpha=1.0)
        assert threshold_lp(0.9, params) == 0.0

    def test_jump_tie_takes_nonzero_branch(self):
        for p in (0.3, 0.5, 0.8):
            params = LpThresholdParams(p=p, alpha=0.7)
            out = threshold_lp(params.tau_alpha, params)
            assert out >= params.gamma_alpha - 1e-12
            assert threshold_lp(-params.tau_alpha, params) == -out

    def test_vector_input(self, rng):
        # batch and scalar evaluation may differ by an ulp (the Newton stop
        # is collective over the batch) but must agree to root tolerance
        params = LpThresholdParams(p=0.5, alpha=0.3)
        xs = rng.uniform(-4, 4, size=50)
        vec = threshold_lp(xs, params)
        assert vec.shape == xs.shape
        for i, x in enumerate(xs):
            assert vec[i] == pytest.approx(threshold_lp(float(x), params), abs=1e-11)

    def test_rejects_non_finite(self):
        params = LpThresholdParams(p=0.5, alpha=1.0)
        with pytest.raises(ValueError):
            threshold_lp(np.nan, params)
        with pytest.raises(ValueError):
            threshold_lp(np.inf, params)

    @given(x=st.floats(-50, 50), p=st.sampled_from([0.0, 0.2, 0.5, 0.8, 1.0]),
           alpha=st.sampled_from([0.01, 0.1, 1.0, 5.0]))
    def test_odd_symmetry(self, x, p, alpha):
        params = LpThresholdParams(p=p, alpha=alpha)
        assert threshold_lp(-x, params) == -threshold_lp(x, params)

    @given(x=st.floats(-50, 50), p=st.sampled_from([0.1, 0.3, 0.5, 0.8, 0.99]),
           alpha=st.sampled_from([0.01, 0.1, 1.0, 5.0]))
    def test_gap_property(self, x, p, alpha):
        params = LpThresholdParams(p=p, alpha=alpha)
        out = threshold_lp(x, params)
        assert out == 0.0 or abs(out) >= params.gamma_alpha - 1e-12

    @given(x=st.floats(-20, 20), a=st.floats(0.01, 5), b=st.floats(0.01, 5))
    def test_soft_threshold_semigroup(self, x, a, b):
        inner = threshold_lp(x, LpThresholdParams(p=1.0, alpha=a))
        twice = threshold_lp(inner, LpThresholdParams(p=1.0, alpha=b))
        once = threshold_lp(x, LpThresholdParams(p=1.0, alpha=a + b))
        assert twice == pytest.approx(once, abs=1e-12 * max(1.0, abs(x)))


class TestHalfClosedForm:
    def test_zero_input(self):
        assert threshold_half_closed_form(0.0, 1.0) == 0.0

    def test_threshold_location_matches_tau(self):
        # the closed form's own jump location equals the generic tau for p = 1/2
        for alpha in (0.1, 1.0, 3.0):
            closed = np.cbrt(54.0) / 4.0 * alpha ** (2.0 / 3.0)
            generic = LpThresholdParams(p=0.5, alpha=alpha).tau_alpha
            assert closed == pytest.approx(generic, rel=1e-12)
        assert np.cbrt(54.0) / 4.0 * 0.1 ** (2.0 / 3.0) == pytest.approx(0.203582, abs=1e-6)

    def test_value_at_two(self):
        assert threshold_half_closed_form(2.0, 1.0) == pytest.approx(
            ROOT_HALF_A1_X2, abs=1e-10)

    def test_agrees_with_generic_root_finder(self):
        for alpha in (0.01, 0.1, 1.0):
            params = LpThresholdParams(p=0.5, alpha=alpha)
            xs = np.linspace(-5, 5, 2001)
            gap = np.abs(threshold_half_closed_form(xs, alpha)
                         - threshold_lp(xs, params))
            assert float(np.max(gap)) <= 1e-8

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            threshold_half_closed_form(np.nan, 1.0)
        with pytest.raises(ValueError):
            threshold_half_closed_form(1.0, -1.0)


class TestShrinkLq:
    def test_q2_closed_form(self):
        assert shrink_lq(1.0, LqShrinkParams(q=2.0, beta=1.0)) == 0.5

    def test_q4_matches_bisection_oracle(self):
        oracle = bisect_root(lambda t: t + t ** 3 - 3.0, 0.0, 3.0)
        assert oracle == pytest.approx(ROOT_Q4_B05_X3, abs=1e-12)
        assert shrink_lq(3.0, LqShrinkParams(q=4.0, beta=0.5)) == pytest.approx(
            oracle, abs=1e-10)

    def test_beta_zero_identity_scaled(self):
        for q in (2.0, 3.5, 10.0):
            params = LqShrinkParams(q=q, beta=0.0, epsilon=0.5)
            assert shrink_lq(3.0, params) == pytest.approx(2.0)

    def test_coeff_formula(self):
        params = LqShrinkParams(q=4.0, beta=0.5, epsilon=1.0)
        assert params.coeff == pytest.approx(0.5 * 4.0 / (2.0 * 2.0 ** 3.0))

    @given(x=st.floats(-30, 30), q=st.sampled_from([2.0, 3.0, 4.0, 10.0]),
           beta=st.sampled_from([0.0, 0.1, 1.0, 4.0]),
           eps=st.sampled_from([0.0, 0.5]))
    def test_odd_and_contractive_toward_zero(self, x, q, beta, eps):
        params = LqShrinkParams(q=q, beta=beta, epsilon=eps)
        out = shrink_lq(x, params)
        assert shrink_lq(-x, params) == -out
        assert abs(out) <= abs(x) / (1.0 + eps) + 1e-12

    @given(a=st.floats(-20, 20), b=st.floats(-20, 20),
           q=st.sampled_from([2.0, 3.0, 4.0, 8.0]),
           beta=st.sampled_from([0.05, 0.5, 2.0]))
    def test_non_expansive(self, a, b, q, beta):
        params = LqShrinkParams(q=q, beta=beta)
        gap = abs(shrink_lq(a, params) - shrink_lq(b, params))
        assert gap <= abs(a - b) + 1e-10

    def test_rejects_bad_domain(self):
        with pytest.raises(ValueError):
            LqShrinkParams(q=1.5, beta=1.0)
        with pytest.raises(ValueError):
            LqShrinkParams(q=np.inf, beta=1.0)


class TestThresholdLinf:
    def test_clip_one_leader(self):
        assert np.array_equal(threshold_linf([3.0, 1.0], 2.0), [2.0, 1.0])

    def test_symmetric_pair(self):
        assert np.allclose(threshold_linf([1.0, 1.0], 1.0), [0.75, 0.75])

    def test_small_mass_goes_to_zero(self):
        out = threshold_linf([0.1, -0.2, 0.05], 1.0)
        assert np.array_equal(out, np.zeros(3))

    def test_boundary_mass_goes_to_zero(self):
        assert np.array_equal(threshold_linf([0.3, -0.2], 1.0), np.zeros(2))

    def test_single_entry_is_scalar_soft_threshold(self):
        assert threshold_linf([2.0], 1.0)[0] == pytest.approx(1.5)
        assert np.array_equal(threshold_linf([0.4], 1.0), [0.0])

    def test_signs_preserved(self):
        out = threshold_linf([-3.0, 1.0], 2.0)
        assert np.array_equal(out, [-2.0, 1.0])

    def test_matches_level_scan_oracle(self, rng):
        for _ in range(60):
            dim = int(rng.integers(2, 5))
            x = rng.uniform(-3, 3, size=dim)
            beta = float(rng.uniform(0.1, 4.0))
            ours = threshold_linf(x, beta)
            oracle, step = linf_prox_level_scan(x, beta)
            assert np.max(np.abs(ours - oracle)) <= 2 * step

    def test_matches_full_grid_oracle_2d(self, rng):
        for _ in range(10):
            x = rng.uniform(-2, 2, size=2)
            beta = float(rng.uniform(0.2, 3.0))
            ours = threshold_linf(x, beta)
            oracle, step = linf_prox_full_grid(x, beta)
            assert np.max(np.abs(ours - oracle)) <= 2 * step

    def test_objective_never_above_candidates(self, rng):
        def objective(v, x, beta):
            return float(np.sum((v - x) ** 2) + beta * np.max(np.abs(v)))

        for _ in range(200):
            dim = int(rng.integers(1, 6))
            x = rng.uniform(-3, 3, size=dim)
            beta = float(rng.uniform(0.05, 5.0))
            out = threshold_linf(x, beta)
            best = objective(out, x, beta)
            assert best <= objective(x, x, beta) + 1e-12
            assert best <= objective(np.zeros(dim), x, beta) + 1e-12
            for _ in range(10):
                assert best <= objective(out + rng.normal(0, 0.01, dim), x, beta) + 1e-12

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            threshold_linf([1.0, 2.0], 0.0)
        with pytest.raises(ValueError):
            threshold_linf(np.zeros((2, 2)), 1.0)
        with pytest.raises(ValueError):
            threshold_linf([np.nan, 1.0], 1.0)


class TestBruteForceOracle:
    def test_matches_soft_threshold(self):
        params = LpThresholdParams(p=1.0, alpha=1.0)
        assert brute_force_prox_1d(2.0, params) == pytest.approx(1.5, abs=1e-3)

    def test_matches_half_power_root(self):
        params = LpThresholdParams(p=0.5, alpha=1.0)
        assert brute_force_prox_1d(2.0, params) == pytest.approx(
            ROOT_HALF_A1_X2, abs=1e-6)

    def test_matches_lq_root(self):
        params = LqShrinkParams(q=4.0, beta=0.5)
        assert brute_force_prox_1d(3.0, params) == pytest.approx(
            ROOT_Q4_B05_X3, abs=1e-4)

    def test_objective_tie_at_jump(self):
        params = LpThresholdParams(p=0.5, alpha=1.0)
        x = params.tau_alpha

        def objective(t):
            return (t - x) ** 2 + params.alpha * abs(t) ** params.p

        assert objective(0.0) == pytest.approx(objective(params.gamma_alpha), abs=1e-6)
        out = brute_force_prox_1d(x, params)
        assert min(abs(out), abs(out - params.gamma_alpha)) <= 1e-4

    def test_spot_equivalence_with_threshold_lp(self, rng):
        for p, alpha in ((0.3, 0.1), (0.5, 1.0), (0.8, 0.01)):
            params = LpThresholdParams(p=p, alpha=alpha)
            xs = rng.uniform(-5, 5, size=60)
            for x in xs:
                if abs(abs(x) - params.tau_alpha) < 1e-6:
                    continue
                assert brute_force_prox_1d(float(x), params) == pytest.approx(
                    threshold_lp(float(x), params), abs=1e-4)
