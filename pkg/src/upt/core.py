"""The UPT pipeline: screen, decompose, and clean each component exhaustively.

Cleaning minimizes, over ``mu`` with coordinates in ``{-t3, 0, t3}`` (or
``{0, t3}`` one-sided),

    f(mu) = 1/2 (y - G mu)' G^{-1} (y - G mu) + pen * ||mu||_0

where ``y`` and ``G`` are the component's slices of ``X'Y`` and ``X'X``.
``pen`` is ``t2^2 / 2`` ("half", default) or ``t2^2`` ("full").
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .decisions import CLEANED_ZERO, SCREENED_OUT, SELECTED, DecisionVector
from .errors import ComponentTooLargeError, UPTError
from .gram_graph import ComponentGraph, MarginalStats, marginal_stats, restricted_gram, screen
from .tuning import TuningParams

SIGN_MODES = ("signed", "one_sided")
PENALTIES = ("half", "full")
DEFAULT_MAX_COMPONENT = 12


@dataclass(frozen=True)
class CleanResult:
    mu: np.ndarray
    objective_value: float
    decisions: np.ndarray


def penalty_weight(t2, penalty="half"):
    if penalty == "half":
        return 0.5 * t2 * t2
    if penalty == "full":
        return t2 * t2
    raise ValueError(f"penalty must be one of {PENALTIES}, got {penalty!r}")


@functools.lru_cache(maxsize=32)
def _candidate_patterns(k, sign_mode):
    levels = (-1, 0, 1) if sign_mode == "signed" else (0, 1)
    table = np.array(list(itertools.product(levels, repeat=k)), dtype=np.int8).reshape(-1, k)
    table.setflags(write=False)
    return table


def clean_component(
    y_tilde_I0,
    gram_I0,
    t2,
    t3,
    sign_mode="signed",
    penalty="half",
    max_size=DEFAULT_MAX_COMPONENT,
) -> CleanResult:
    """Exhaustive L0-penalized search over one component.

    Ties (within rounding) go to fewer nonzeros, then to the lexicographically
    smallest support.

    Raises
    ------
    ComponentTooLargeError
        If the component has more than ``max_size`` nodes.
    UPTError
        If ``gram_I0`` is singular.
    """
    if sign_mode not in SIGN_MODES:
        raise ValueError(f"sign_mode must be one of {SIGN_MODES}, got {sign_mode!r}")
    y = np.asarray(y_tilde_I0, dtype=float).ravel()
    G = np.atleast_2d(np.asarray(gram_I0, dtype=float))
    k = y.shape[0]
    if G.shape != (k, k):
        raise ValueError(f"gram block has shape {G.shape}, expected ({k}, {k})")
    if k > max_size:
        raise ComponentTooLargeError(k, max_size)
    pen = penalty_weight(t2, penalty)
    try:
        chol = scipy.linalg.cho_factor(G, lower=True)
    except np.linalg.LinAlgError:
        raise UPTError("component Gram block is singular or not positive definite") from None
    const = 0.5 * float(y @ scipy.linalg.cho_solve(chol, y))

    patterns = _candidate_patterns(k, sign_mode)
    C = patterns * float(t3)
    nnz = np.count_nonzero(patterns, axis=1)
    obj = const - C @ y + 0.5 * np.einsum("ij,ij->i", C @ G, C) + pen * nnz

    best = obj.min()
    near = np.flatnonzero(obj <= best + 1e-10 * max(1.0, abs(best)))
    if near.size > 1:
        def key(i):
            row = patterns[i]
            return (int(nnz[i]), tuple(np.flatnonzero(row)), tuple(row))

        pick = min(near, key=key)
    else:
        pick = near[0]
    mu = C[pick].astype(float)
    return CleanResult(mu=mu, objective_value=float(obj[pick]), decisions=(patterns[pick] != 0).astype(np.int8))


def objective(y_tilde_I0, gram_I0, mu, t2, penalty="half"):
    """Evaluate the penalized quadratic at ``mu`` directly from its definition."""
    y = np.asarray(y_tilde_I0, dtype=float)
    G = np.atleast_2d(np.asarray(gram_I0, dtype=float))
    mu = np.asarray(mu, dtype=float)
    resid = y - G @ mu
    return 0.5 * float(resid @ np.linalg.solve(G, resid)) + penalty_weight(t2, penalty) * np.count_nonzero(mu)


@dataclass(frozen=True)
class ScreenedData:
    """Everything the cleaning step needs; independent of ``t2`` and ``t3``."""

    stats: MarginalStats
    t1: float
    graph: ComponentGraph


def screen_and_decompose(X, Y, t1, gram_threshold=None, stats: Optional[MarginalStats] = None) -> ScreenedData:
    stats = marginal_stats(X, Y) if stats is None else stats
    survivors = screen(stats, t1)
    graph = restricted_gram(X, survivors, threshold=gram_threshold)
    return ScreenedData(stats, float(t1), graph)


def component_blocks(screened: ScreenedData):
    """``(members, y_block, gram_block)`` for every component."""
    graph = screened.graph
    y = screened.stats.y_tilde
    out = []
    for k, members in enumerate(graph.components):
        _, G = graph.component_data(k)
        out.append((members, y[members], G))
    return out


def clean_blocks(
    p,
    survivors,
    blocks,
    t2,
    t3,
    sign_mode="signed",
    penalty="half",
    max_component=DEFAULT_MAX_COMPONENT,
) -> DecisionVector:
    """Clean precomputed component blocks and assemble the p-vector of decisions."""
    prov = np.full(p, SCREENED_OUT, dtype=np.int8)
    prov[np.asarray(survivors, dtype=np.intp)] = CLEANED_ZERO
    for members, y, G in blocks:
        res = clean_component(y, G, t2, t3, sign_mode, penalty, max_component)
        prov[members[res.decisions == 1]] = SELECTED
    return DecisionVector(delta=(prov == SELECTED).astype(np.int8), provenance=prov)


def clean_graph(
    screened: ScreenedData,
    t2,
    t3,
    sign_mode="signed",
    penalty="half",
    max_component=DEFAULT_MAX_COMPONENT,
) -> DecisionVector:
    """Clean every component of a screened graph."""
    graph = screened.graph
    if graph.max_component_size > max_component:
        raise ComponentTooLargeError(graph.max_component_size, max_component)
    return clean_blocks(
        graph.p, graph.survivors, component_blocks(screened), t2, t3, sign_mode, penalty, max_component
    )


def upt_decide(
    X,
    Y,
    params: TuningParams,
    sign_mode="signed",
    penalty="half",
    max_component=DEFAULT_MAX_COMPONENT,
    gram_threshold=None,
) -> DecisionVector:
    """Run the full pipeline with fixed tuning parameters."""
    screened = screen_and_decompose(X, Y, params.t1, gram_threshold)
    return clean_graph(screened, params.t2, params.t3, sign_mode, penalty, max_component)
