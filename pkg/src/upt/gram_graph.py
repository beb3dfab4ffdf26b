"""Marginal statistics, screening and the thresholded Gram graph.

The Gram matrix is only ever formed on the screened columns; its cost is
``O(|U|^2 n)`` instead of ``O(p^2 n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class MarginalStats:
    y_tilde: np.ndarray

    @property
    def p(self):
        return self.y_tilde.shape[0]


def marginal_stats(X, Y) -> MarginalStats:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has shape {X.shape} but Y has length {Y.shape[0]}")
    return MarginalStats(X.T @ Y)


def screen(stats: MarginalStats, t1) -> np.ndarray:
    """Sorted 0-based indices with ``|y_tilde| > t1`` (strict, two-sided)."""
    if not t1 > 0:
        raise ValueError(f"t1 must be positive, got {t1}")
    return np.flatnonzero(np.abs(stats.y_tilde) > t1)


def default_gram_threshold(p):
    """``1 / log(p)^2`` (natural log); infinite for ``p <= 1``."""
    if p <= 1:
        return math.inf
    return 1.0 / math.log(p) ** 2


@dataclass(frozen=True)
class ComponentGraph:
    """Thresholded Gram graph on the survivors of screening.

    ``gram`` is the raw Gram ``X[:, U]' X[:, U]`` in survivor-local indexing;
    ``adjacency`` marks the off-diagonal entries above ``threshold``.
    ``components`` hold global column indices, each sorted, ordered by their
    smallest member.
    """

    p: int
    survivors: np.ndarray
    gram: np.ndarray
    threshold: float
    adjacency: scipy.sparse.csr_matrix
    components: Tuple[np.ndarray, ...]
    local_components: Tuple[np.ndarray, ...]

    @property
    def max_component_size(self):
        return max((len(c) for c in self.components), default=0)

    @property
    def gram_entries(self) -> Dict[Tuple[int, int], float]:
        """Stored entries keyed by global index pairs: diagonals plus kept off-diagonals."""
        out = {}
        u = self.survivors
        for k, i in enumerate(u):
            out[(int(i), int(i))] = float(self.gram[k, k])
        coo = self.adjacency.tocoo()
        for a, b in zip(coo.row, coo.col):
            out[(int(u[a]), int(u[b]))] = float(self.gram[a, b])
        return out

    def component_data(self, k):
        """Local index array and raw Gram block of component ``k``."""
        loc = self.local_components[k]
        return loc, self.gram[np.ix_(loc, loc)]

    def component_table(self) -> List[Tuple[int, int]]:
        """(component_id, member_index) pairs for diagnostic dumps."""
        return [(cid, int(i)) for cid, comp in enumerate(self.components) for i in comp]


def restricted_gram(X, survivors, p: Optional[int] = None, threshold: Optional[float] = None) -> ComponentGraph:
    """Build the thresholded Gram graph restricted to ``survivors``.

    ``threshold`` defaults to :func:`default_gram_threshold` of ``p``
    (``X.shape[1]`` unless given).  Off-diagonal entries are kept when
    ``|G_ij| > threshold``.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1] if p is None else p
    threshold = default_gram_threshold(p) if threshold is None else float(threshold)
    survivors = np.asarray(survivors, dtype=np.intp)
    if survivors.size and (np.any(np.diff(survivors) <= 0) or survivors[0] < 0 or survivors[-1] >= X.shape[1]):
        raise ValueError("survivors must be sorted, unique and within range")
    m = survivors.size
    if m == 0:
        empty = scipy.sparse.csr_matrix((0, 0))
        return ComponentGraph(p, survivors, np.zeros((0, 0)), threshold, empty, (), ())
    Xs = X[:, survivors]
    gram = Xs.T @ Xs
    gram = 0.5 * (gram + gram.T)
    mask = np.abs(gram) > threshold
    np.fill_diagonal(mask, False)
    adjacency = scipy.sparse.csr_matrix(mask)
    _, labels = connected_components(adjacency, directed=False)
    # Order components by smallest member for deterministic output.
    local = {}
    for idx, lab in enumerate(labels):
        local.setdefault(lab, []).append(idx)
    local_components = tuple(np.array(v, dtype=np.intp) for v in sorted(local.values(), key=lambda v: v[0]))
    components = tuple(survivors[c] for c in local_components)
    gram.setflags(write=False)
    return ComponentGraph(p, survivors, gram, threshold, adjacency, components, local_components)


def write_component_dump(path, graph: ComponentGraph, one_based=True):
    """CSV of ``component_id,member_index`` rows."""
    offset = 1 if one_based else 0
    with open(path, "w") as fh:
        fh.write("component_id,member_index\n")
        for cid, idx in graph.component_table():
            fh.write(f"{cid},{idx + offset}\n")
