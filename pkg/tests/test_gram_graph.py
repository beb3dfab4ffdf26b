import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from upt.covmodel import CovarianceSpec, build_covariance, factorize
from upt.datagen import SignalSpec, simulate_dataset
from upt.gram_graph import (
    MarginalStats,
    default_gram_threshold,
    marginal_stats,
    restricted_gram,
    screen,
    write_component_dump,
)


def bfs_components(adj):
    """Connected components of a dense boolean adjacency matrix."""
    seen = np.zeros(adj.shape[0], dtype=bool)
    out = []
    for s in range(adj.shape[0]):
        if seen[s]:
            continue
        comp, queue = [], deque([s])
        seen[s] = True
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in np.flatnonzero(adj[v]):
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        out.append(sorted(comp))
    return sorted(out)


class TestMarginal:
    def test_identity_design(self):
        np.testing.assert_array_equal(marginal_stats(np.eye(3), [1.0, 2.0, 3.0]).y_tilde, [1, 2, 3])

    def test_ones_column(self):
        assert marginal_stats(np.ones((4, 1)), np.ones(4)).y_tilde[0] == 4.0

    def test_naive_loop(self, rng):
        X = rng.standard_normal((50, 20))
        Y = rng.standard_normal(50)
        naive = [sum(X[k, i] * Y[k] for k in range(50)) for i in range(20)]
        assert np.max(np.abs(marginal_stats(X, Y).y_tilde - naive)) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            marginal_stats(np.zeros((3, 2)), np.zeros(4))


class TestScreen:
    def test_two_sided(self):
        np.testing.assert_array_equal(screen(MarginalStats(np.array([3.0, 1.0, -4.0])), 2.5), [0, 2])

    def test_strict(self):
        assert screen(MarginalStats(np.array([2.5, -2.5])), 2.5).size == 0

    def test_infinite(self):
        assert screen(MarginalStats(np.array([1e300, -5.0])), math.inf).size == 0

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            screen(MarginalStats(np.ones(3)), 0.0)

    def test_survivor_count_matches_normal_approximation(self):
        # Each null statistic is roughly N((Omega beta)_i, 1 + |beta|^2 / n).
        p, n, tau = 5000, 1000, 6.0
        cov = build_covariance(CovarianceSpec.block_diag(p, 0.5))
        f = factorize(cov)
        t1 = math.sqrt(math.log(p))
        counts, expected = [], []
        for rep in range(4):
            ds = simulate_dataset(n, p, f, SignalSpec(0.5, tau=tau), 77, rep)
            counts.append(screen(marginal_stats(ds.X, ds.Y), t1).size)
            m = _block_mean(ds.beta, 0.5)
            sd = math.sqrt(1 + ds.beta @ ds.beta / n)
            expected.append(np.sum(stats.norm.sf((t1 - m) / sd) + stats.norm.cdf((-t1 - m) / sd)))
        assert np.mean(counts) == pytest.approx(np.mean(expected), rel=0.1)
        # Well above the range a pure-noise model would suggest.
        assert min(counts) > 400


def _block_mean(beta, a):
    partner = beta.reshape(-1, 2)[:, ::-1].ravel()
    return beta + a * partner


class TestRestrictedGram:
    def test_empty(self, rng):
        g = restricted_gram(rng.standard_normal((5, 4)), [])
        assert g.components == ()
        assert g.max_component_size == 0

    def test_orthogonal_columns(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((100, 100)))
        g = restricted_gram(Q, [3, 40])
        assert [c.tolist() for c in g.components] == [[3], [40]]

    def test_threshold(self):
        assert default_gram_threshold(5000) == pytest.approx(1 / math.log(5000) ** 2)
        assert default_gram_threshold(1) == math.inf

    def test_matches_dense_bfs(self, rng):
        X = rng.standard_normal((30, 10)) / math.sqrt(30)
        g = restricted_gram(X, np.arange(10))
        G = X.T @ X
        adj = np.abs(G) > 1 / math.log(10) ** 2
        np.fill_diagonal(adj, False)
        assert sorted(c.tolist() for c in g.components) == bfs_components(adj)

    def test_strict_edge_threshold(self):
        X = np.array([[1.0, 0.25], [0.0, 1.0]])
        assert len(restricted_gram(X, [0, 1], threshold=0.25).components) == 2
        assert len(restricted_gram(X, [0, 1], threshold=0.2499).components) == 1

    def test_unsorted_survivors(self, rng):
        with pytest.raises(ValueError):
            restricted_gram(rng.standard_normal((4, 4)), [2, 1])

    def test_gram_entries_symmetric(self, rng):
        X = rng.standard_normal((8, 6))
        entries = restricted_gram(X, [0, 2, 5], threshold=0.1).gram_entries
        for (i, j), v in entries.items():
            assert entries[(j, i)] == v

    def test_component_dump(self, rng, tmp_path):
        X = np.eye(4)
        X[0, 1] = 0.9
        g = restricted_gram(X, [0, 1, 3], threshold=0.5)
        path = tmp_path / "dump.csv"
        write_component_dump(path, g)
        assert path.read_text().splitlines() == ["component_id,member_index", "0,1", "0,2", "1,4"]

    @given(st.integers(0, 2**31 - 1), st.integers(3, 40), st.floats(0.05, 0.6))
    def test_restriction_is_induced_subgraph(self, seed, p, thr):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((12, p)) / math.sqrt(12)
        surv = np.flatnonzero(rng.random(p) < 0.5)
        g = restricted_gram(X, surv, threshold=thr)
        G = X.T @ X
        adj = np.abs(G) > thr
        np.fill_diagonal(adj, False)
        sub = adj[np.ix_(surv, surv)]
        expected = [[int(surv[i]) for i in c] for c in bfs_components(sub)] if surv.size else []
        assert sorted(c.tolist() for c in g.components) == sorted(expected)
        for comp in g.components:
            assert list(comp) == sorted(comp)
