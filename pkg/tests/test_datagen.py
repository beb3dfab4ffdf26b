import math

import numpy as np
import pytest
from scipy import stats

from upt.covmodel import CovarianceSpec, build_covariance, factorize
from upt.datagen import (
    RegressionDataset,
    SignalSpec,
    draw_beta,
    draw_design_gaussian,
    draw_design_uniform,
    draw_response,
    draw_signal_pattern_exact,
    replicate_streams,
    simulate_dataset,
)


def _factor(kind="identity", p=4, **kw):
    return factorize(build_covariance(getattr(CovarianceSpec, kind)(p, **kw)))


class TestSignal:
    def test_nonzero_rate(self):
        rng = np.random.default_rng(1)
        p, draws = 1000, 100
        total = sum(int(draw_beta(p, SignalSpec(0.5, tau=4.0), rng)[1].sum()) for _ in range(draws))
        pi1 = 1000**-0.5
        se = math.sqrt(pi1 * (1 - pi1) / (p * draws))
        assert abs(total / (p * draws) - pi1) <= 3 * se

    def test_expected_count_p5000(self):
        rng = np.random.default_rng(2)
        counts = [int(draw_beta(5000, SignalSpec(0.5, tau=6.0), rng)[1].sum()) for _ in range(200)]
        mean = 5000**0.5
        se = math.sqrt(mean) / math.sqrt(len(counts))
        assert abs(np.mean(counts) - mean) <= 3 * se
        assert mean == pytest.approx(70.71, abs=0.01)

    def test_zero_magnitude(self, rng):
        beta, theta = draw_beta(500, SignalSpec(0.2, tau=0.0), rng)
        assert not beta.any()
        assert not theta.any()

    def test_theta_indicates_nonzero(self, rng):
        beta, theta = draw_beta(2000, SignalSpec(0.3, tau=3.0, perturbation=0.5), rng)
        np.testing.assert_array_equal(theta, beta != 0)
        mags = np.abs(beta[beta != 0])
        assert mags.min() >= 2.5 and mags.max() <= 3.5
        assert (beta < 0).any() and (beta > 0).any()

    def test_unsigned(self, rng):
        beta, _ = draw_beta(2000, SignalSpec(0.3, tau=3.0, signed=False), rng)
        assert (beta >= 0).all()

    def test_magnitude_from_r(self):
        spec = SignalSpec(0.5, r=2.0)
        assert spec.magnitude(1000) == pytest.approx(math.sqrt(4 * math.log(1000)))
        assert SignalSpec(0.5, tau=6.0).strength_exponent(5000) == pytest.approx(36 / (2 * math.log(5000)))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SignalSpec(0.5)
        with pytest.raises(ValueError):
            SignalSpec(0.5, r=1.0, tau=2.0)
        with pytest.raises(ValueError):
            SignalSpec(-0.1, tau=1.0)

    def test_exact_count(self, rng):
        pat = draw_signal_pattern_exact(1000, 32, 0.0, True, rng)
        beta = pat.beta(3.0)
        assert np.count_nonzero(beta) == 32
        assert np.count_nonzero(beta < 0) == 16


class TestDesign:
    def test_gaussian_unit_variance(self):
        rng = np.random.default_rng(3)
        f = _factor(p=5)
        vals = np.concatenate([draw_design_gaussian(1, 5, f, rng)[0] for _ in range(20000)])
        se = math.sqrt(2 / vals.size)
        assert abs(vals.var() - 1) <= 3 * se

    def test_gram_converges(self):
        rng = np.random.default_rng(4)
        cov = build_covariance(CovarianceSpec.penta_diag(4))
        X = draw_design_gaussian(10_000, 4, factorize(cov), rng)
        assert np.max(np.abs(X.T @ X - cov.dense())) < 0.05

    def test_determinism(self):
        f = _factor("block_diag", 6, a=0.5)
        a = draw_design_gaussian(20, 6, f, np.random.default_rng(9))
        b = draw_design_gaussian(20, 6, f, np.random.default_rng(9))
        assert a.tobytes() == b.tobytes()

    def test_uniform_moments(self):
        rng = np.random.default_rng(5)
        n = 50
        X = draw_design_uniform(n, 2000, _factor(p=2000), rng)
        v = (math.sqrt(n) * X).ravel()
        assert np.abs(v).max() < math.sqrt(3)
        se = math.sqrt(0.8 / v.size)
        assert abs(np.mean(v**2) - 1) <= 3 * se

    def test_uniform_gram_converges(self):
        rng = np.random.default_rng(6)
        cov = build_covariance(CovarianceSpec.block_diag(4, 0.5))
        X = draw_design_uniform(10_000, 4, factorize(cov), rng)
        assert np.max(np.abs(X.T @ X - cov.dense())) < 0.05

    def test_uniform_identity_factor(self):
        X = draw_design_uniform(1, 7, _factor(p=7), np.random.default_rng(8))
        M = np.random.default_rng(8).uniform(-math.sqrt(3), math.sqrt(3), size=(1, 7))
        np.testing.assert_array_equal(X, M)

    def test_factor_dimension_checked(self, rng):
        with pytest.raises(ValueError):
            draw_design_gaussian(3, 5, _factor(p=4), rng)

    def test_normalize(self, rng):
        X = draw_design_gaussian(30, 8, _factor(p=8), rng, normalize=True)
        np.testing.assert_allclose(np.linalg.norm(X, axis=0), 1.0)


class TestResponse:
    def test_null_is_standard_normal(self):
        rng = np.random.default_rng(7)
        X = np.zeros((10_000, 3))
        Y = draw_response(X, np.zeros(3), rng)
        assert stats.kstest(Y, "norm").pvalue > 0.01

    def test_noiseless(self, rng):
        X = rng.standard_normal((5, 3))
        beta = np.array([1.0, 0.0, -2.0])
        Y = draw_response(X, beta, rng, noise=np.zeros)
        np.testing.assert_array_equal(Y, X @ beta)

    def test_variance(self):
        rng = np.random.default_rng(8)
        Y = draw_response(np.zeros((100_000, 1)), np.zeros(1), rng)
        assert abs(Y.var() - 1) <= 3 * math.sqrt(2 / Y.size)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            draw_response(np.zeros((4, 3)), np.zeros(2), rng)
        with pytest.raises(ValueError):
            draw_response(np.zeros((4, 3)), np.zeros(3), rng, noise=lambda n: np.zeros(n + 1))


class TestStreams:
    def test_deterministic_and_distinct(self):
        a = replicate_streams(11, 0)["noise"].random(5)
        b = replicate_streams(11, 0)["noise"].random(5)
        c = replicate_streams(11, 1)["noise"].random(5)
        d = replicate_streams(11, 0)["design"].random(5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_dataset_round_trip(self, tmp_path):
        ds = simulate_dataset(20, 10, _factor(p=10), SignalSpec(0.3, tau=2.0), 5, 3)
        ds.save(tmp_path)
        back = RegressionDataset.load(tmp_path)
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.Y, ds.Y)
        np.testing.assert_array_equal(back.beta, ds.beta)
        np.testing.assert_array_equal(back.theta, ds.theta)
        assert back.provenance["replicate"] == "3"

    def test_simulate_dataset_bad_design(self):
        with pytest.raises(ValueError):
            simulate_dataset(5, 4, _factor(p=4), SignalSpec(0.3, tau=2.0), 1, 0, design="t")
