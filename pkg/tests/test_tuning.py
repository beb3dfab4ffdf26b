import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from upt.errors import NegativeRadicandError, NoExceedanceError, TuningError
from upt.tuning import (
    data_driven_params,
    estimate_theta_r,
    ideal_params,
    ideal_params_from_tau,
    q_interval,
    resolve_K,
    zeta_exponent,
)


def t2_star_reference(p, theta, r, alpha, K):
    """Independent evaluation written in terms of sqrt(r*theta)."""
    L = np.log(p)
    s = 2 * np.sqrt(r * theta)  # r + theta - zeta
    zeta = r + theta - s
    M = alpha * np.sqrt(np.pi) * s / (np.power(2 * np.e, K) * np.sqrt(r) * (1 - alpha))
    return np.sqrt(2 * (theta - zeta) * L + (4 * r / s) * ((K - 0.5) * np.log(L) - np.log(M)))


def population_tail(p, theta, tau, t):
    """Exceedance fraction and mean exceedance of |N(beta_i, 1)| for the two-point prior."""
    pi1 = p**-theta
    F1 = stats.norm.sf(t - tau) + stats.norm.cdf(-t - tau)
    F0 = 2 * stats.norm.sf(t)
    m1 = tau * stats.norm.sf(t - tau) + stats.norm.pdf(t - tau) - tau * stats.norm.cdf(-t - tau) + stats.norm.pdf(t + tau)
    m0 = 2 * stats.norm.pdf(t)
    return pi1 * F1 + (1 - pi1) * F0, pi1 * m1 + (1 - pi1) * m0


class TestIdeal:
    def test_reference_value(self):
        p, theta = 5000, 0.5
        r = 36 / (2 * math.log(p))
        tp = ideal_params(p, theta, r, alpha=0.05, K=5)
        assert r == pytest.approx(2.113, abs=1e-3)
        assert tp.t2 == pytest.approx(t2_star_reference(p, theta, r, 0.05, 5), rel=1e-10)
        assert tp.t3 == pytest.approx(6.0, abs=1e-12)
        assert tp.t1 == pytest.approx(math.sqrt(math.log(p)), rel=1e-14)
        assert tp.zeta == pytest.approx((math.sqrt(r) - math.sqrt(theta)) ** 2)

    def test_boundary_r_equals_theta(self):
        p, theta = 1000, 0.6
        with pytest.warns(RuntimeWarning):
            tp = ideal_params(p, theta, theta, alpha=0.1, K=3)
        assert tp.zeta == 0.0
        L = math.log(p)
        second = 2 * ((3 - 0.5) * math.log(L) - math.log(tp.M))
        assert tp.t2**2 == pytest.approx(2 * theta * L + second, rel=1e-12)

    def test_scale_p_squared(self):
        a = ideal_params(100, 0.4, 1.5)
        b = ideal_params(100**2, 0.4, 1.5)
        assert b.t1**2 == pytest.approx(2 * a.t1**2)
        assert b.t3**2 == pytest.approx(2 * a.t3**2)

    @given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
    def test_zeta_identity(self, theta, r):
        assert r + theta - zeta_exponent(theta, r) == pytest.approx(2 * math.sqrt(r * theta), rel=1e-10)

    @given(st.floats(0.1, 0.9), st.floats(1.01, 4.0), st.floats(0.01, 0.4))
    def test_t2_decreasing_in_alpha(self, theta, ratio, alpha):
        r = theta * ratio
        lo = ideal_params(5000, theta, r, alpha=alpha, clamp=True)
        hi = ideal_params(5000, theta, r, alpha=alpha * 1.5, clamp=True)
        assert hi.t2 <= lo.t2

    def test_negative_radicand(self):
        with pytest.raises(NegativeRadicandError) as exc:
            ideal_params(5000, 0.05, 20.0, alpha=0.5, K=1)
        assert exc.value.radicand < 0
        with pytest.warns(RuntimeWarning):
            assert ideal_params(5000, 0.05, 20.0, alpha=0.5, K=1, clamp=True).t2 == 0.0

    def test_q_default_and_check(self):
        assert ideal_params(1000, 0.5, 2.0).q == 0.5
        lo, hi = q_interval(0.5, 2.0, 0.0, 0.1)
        assert hi == 0.5 and lo == pytest.approx(0.5 - zeta_exponent(0.5, 2.0))
        with pytest.raises(TuningError):
            ideal_params(1000, 0.5, 2.0, q=0.6, delta0=0.0, eta=0.1)

    def test_input_validation(self):
        with pytest.raises(TuningError):
            ideal_params(2, 0.5, 2.0)
        with pytest.raises(TuningError):
            ideal_params(1000, 0.5, 2.0, alpha=1.0)

    def test_from_tau(self):
        assert ideal_params_from_tau(5000, 0.5, 8.0).t3 == pytest.approx(8.0)

    def test_audit_block(self):
        text = ideal_params(1000, 0.5, 2.0).audit()
        keys = [line.split("=", 1)[0] for line in text.splitlines()]
        assert keys == ["t1", "t2", "t3", "zeta", "q", "K", "alpha", "M", "source", "theta_used", "r_used"]

    def test_scaled_t1(self):
        tp = ideal_params(1000, 0.5, 2.0)
        assert tp.scaled_t1(0.9).t1 == pytest.approx(0.9 * tp.t1)
        assert tp.scaled_t1(0.9).t2 == tp.t2


class TestEstimates:
    def test_exact_theta(self):
        p = 10_000
        y = np.zeros(p)
        y[:100] = 5.0
        est = estimate_theta_r(y, 3.0)
        assert est.theta_hat == pytest.approx(0.5, abs=1e-12)

    def test_constant_exceedance(self):
        p, c = 10_000, 4.5
        y = np.zeros(p)
        y[:37] = c
        est = estimate_theta_r(y, 1.0)
        assert est.r_hat == pytest.approx(c**2 / (2 * math.log(p)), rel=1e-12)

    def test_one_sided(self):
        y = np.array([5.0, -5.0, 0.0, 0.0])
        assert estimate_theta_r(y, 1.0).f_bar == 0.5
        assert estimate_theta_r(y, 1.0, two_sided=False).f_bar == 0.25

    def test_no_exceedance(self):
        with pytest.raises(NoExceedanceError):
            estimate_theta_r(np.zeros(50), 1.0)

    @given(st.integers(0, 2**31 - 1))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.normal(0, 2, 300)
        a = estimate_theta_r(y, 0.5)
        b = estimate_theta_r(rng.permutation(y), 0.5)
        assert a.theta_hat == pytest.approx(b.theta_hat, rel=1e-12)
        assert a.r_hat == pytest.approx(b.r_hat, rel=1e-12)

    def test_data_driven_all_null(self):
        with pytest.raises(NoExceedanceError):
            data_driven_params(np.zeros(1000))

    def test_data_driven_is_plug_in(self):
        rng = np.random.default_rng(3)
        p, theta, tau = 1_000_000, 0.5, 8.0
        beta = np.where(rng.random(p) < p**-theta, tau, 0.0) * rng.choice([-1, 1], p)
        y = beta + rng.standard_normal(p)
        tp = data_driven_params(y)
        pilot = estimate_theta_r(y, math.sqrt(2 * 0.25 * math.log(p)))
        est = estimate_theta_r(y, math.sqrt(2 * pilot.theta_hat * math.log(p)))
        ref = ideal_params(p, est.theta_hat, est.r_hat, q=pilot.theta_hat)
        assert tp.t2 == pytest.approx(ref.t2, rel=1e-12)
        assert tp.t3 == pytest.approx(ref.t3, rel=1e-12)
        assert tp.source == "estimated"
        # Estimates sit at their population values, which include null exceedances.
        F, mu = population_tail(p, theta, tau, est.t1)
        assert est.theta_hat == pytest.approx(-math.log(F) / math.log(p), abs=0.01)
        assert est.r_hat == pytest.approx((mu / F) ** 2 / (2 * math.log(p)), rel=0.03)

    def test_resolve_K(self):
        assert resolve_K(2) == 5
        assert resolve_K(7) == 7
