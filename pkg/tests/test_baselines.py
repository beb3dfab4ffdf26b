import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from upt.baselines import bh, by, marginal_pvalues

pvals_st = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40).map(np.array)


def bh_naive(p, alpha):
    m = len(p)
    ranked = sorted(range(m), key=lambda i: (p[i], i))
    k = 0
    for j in range(1, m + 1):
        if p[ranked[j - 1]] <= alpha * j / m:
            k = j
    out = [0] * m
    for i in ranked[:k]:
        out[i] = 1
    return out


class TestPValues:
    def test_perfect_fit(self, rng):
        X = rng.standard_normal((20, 3))
        pv = marginal_pvalues(X, 2.0 * X[:, 1] + 1.0)
        assert pv.pvals[1] < 1e-300

    def test_null_uniform(self):
        rng = np.random.default_rng(21)
        X = rng.standard_normal((50, 10_000))
        pv = marginal_pvalues(X, rng.standard_normal(50)).pvals
        ks = stats.kstest(pv, "uniform").statistic
        assert ks < 1.628 / math.sqrt(pv.size)

    def test_hand_ols(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([2.1, 3.9, 6.2, 7.8, 10.1])
        xm, ym = x.mean(), y.mean()
        slope = np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2)
        resid = y - (ym + slope * (x - xm))
        se = math.sqrt(np.sum(resid**2) / 3 / np.sum((x - xm) ** 2))
        pv = marginal_pvalues(x[:, None], y)
        assert pv.tstats[0] == pytest.approx(slope / se, rel=1e-10)
        lr = stats.linregress(x, y)
        assert pv.pvals[0] == pytest.approx(lr.pvalue, rel=1e-8)
        assert pv.dof == 3

    def test_zero_variance(self, rng):
        X = np.column_stack([np.ones(10), rng.standard_normal(10)])
        with pytest.warns(RuntimeWarning):
            pv = marginal_pvalues(X, rng.standard_normal(10))
        assert pv.pvals[0] == 1.0

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            marginal_pvalues(np.ones((2, 1)), np.ones(2))


class TestStepUp:
    def test_bh_example(self):
        np.testing.assert_array_equal(bh([0.001, 0.2, 0.9], 0.05).delta, [1, 0, 0])

    def test_all_ones(self):
        assert not bh(np.ones(10), 0.05).delta.any()

    def test_by_example(self):
        h3 = 1 + 1 / 2 + 1 / 3
        assert 0.05 / h3 == pytest.approx(0.02727, abs=1e-5)
        np.testing.assert_array_equal(by([0.001, 0.2, 0.9], 0.05).delta, [1, 0, 0])

    def test_step_up_not_step_down(self):
        # The second-smallest fails its own cut but the largest passes its cut.
        np.testing.assert_array_equal(bh([0.01, 0.035, 0.04], 0.05).delta, [1, 1, 1])

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            bh([0.1], 0.0)

    @given(pvals_st, st.floats(0.001, 0.5))
    def test_matches_naive(self, p, alpha):
        np.testing.assert_array_equal(bh(p, alpha).delta, bh_naive(list(p), alpha))

    @given(pvals_st, st.floats(0.001, 0.5))
    def test_by_subset_of_bh(self, p, alpha):
        assert np.all(by(p, alpha).delta <= bh(p, alpha).delta)

    @given(pvals_st, st.floats(0.001, 0.5), st.data())
    def test_bh_monotone(self, p, alpha, data):
        i = data.draw(st.integers(0, len(p) - 1))
        lowered = p.copy()
        lowered[i] = data.draw(st.floats(0.0, float(p[i])))
        assert np.all(bh(lowered, alpha).delta >= bh(p, alpha).delta)

    @given(pvals_st, st.floats(0.001, 0.5), st.randoms())
    def test_permutation_equivariant(self, p, alpha, rnd):
        perm = list(range(len(p)))
        rnd.shuffle(perm)
        np.testing.assert_array_equal(bh(p[perm], alpha).delta, bh(p, alpha).delta[perm])

    def test_null_fdr_small(self):
        rng = np.random.default_rng(5)
        reps, alpha = 200, 0.05
        hits = sum(bh(2 * stats.norm.sf(np.abs(rng.standard_normal(500))), alpha).delta.any() for _ in range(reps))
        se = math.sqrt(alpha * (1 - alpha) / reps)
        assert hits / reps <= alpha + max(3 * se, 0.01)
