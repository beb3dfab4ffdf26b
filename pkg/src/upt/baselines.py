"""Marginal-regression p-values with Benjamini-Hochberg / Benjamini-Yekutieli."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .decisions import DecisionVector


@dataclass(frozen=True)
class PValueVector:
    pvals: np.ndarray
    tstats: np.ndarray
    dof: int


def marginal_pvalues(X, Y) -> PValueVector:
    """Two-sided slope p-values from ``Y ~ 1 + X[:, i]`` for every column ``i``.

    Constant columns get p-value 1 (and t-statistic 0) with a warning.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = X.shape[0]
    if Y.shape != (n,):
        raise ValueError(f"X has {n} rows but Y has shape {Y.shape}")
    if n < 3:
        raise ValueError("need n >= 3 for a slope t-test with intercept")
    xc = X - X.mean(axis=0)
    yc = Y - Y.mean()
    sxx = np.einsum("ij,ij->j", xc, xc)
    sxy = xc.T @ yc
    syy = float(yc @ yc)
    dof = n - 2

    flat = sxx <= 1e-300
    if flat.any():
        warnings.warn(f"{int(flat.sum())} zero-variance column(s); p-value set to 1", RuntimeWarning, stacklevel=2)
    safe_sxx = np.where(flat, 1.0, sxx)
    slope = sxy / safe_sxx
    rss = syy - slope * sxy
    # Residuals at rounding level are an exact fit.
    exact = rss <= 1e-14 * max(syy, 1e-300)
    se = np.sqrt(np.where(exact, 1.0, rss) / dof / safe_sxx)
    with np.errstate(divide="ignore"):
        t = np.where(exact, np.copysign(np.inf, slope), slope / se)
    t = np.where(flat, 0.0, t)
    pvals = 2.0 * stats.t.sf(np.abs(t), dof)
    pvals = np.clip(np.where(flat, 1.0, pvals), 0.0, 1.0)
    return PValueVector(pvals=pvals, tstats=t, dof=dof)


def _step_up(pvals, level):
    p = np.asarray(pvals, dtype=float)
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    below = p[order] <= level * np.arange(1, m + 1) / m
    reject = np.zeros(m, dtype=np.int8)
    if below.any():
        k = np.flatnonzero(below)[-1] + 1
        reject[order[:k]] = 1
    return DecisionVector(reject)


def bh(pvals, alpha) -> DecisionVector:
    """Benjamini-Hochberg step-up at level ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return _step_up(pvals, alpha)


def by(pvals, alpha) -> DecisionVector:
    """Benjamini-Yekutieli: BH at ``alpha / sum_{i<=m} 1/i``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    m = len(pvals)
    harmonic = float(np.sum(1.0 / np.arange(1, m + 1)))
    return _step_up(pvals, alpha / harmonic)
