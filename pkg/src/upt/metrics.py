"""Confusion counts per replicate and their aggregation into error rates."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def p(self):
        return self.tp + self.fp + self.fn + self.tn


def confusion(theta, delta) -> ConfusionCounts:
    theta = np.asarray(theta).astype(bool)
    delta = np.asarray(delta).astype(bool)
    if theta.shape != delta.shape:
        raise ValueError(f"theta has shape {theta.shape} but delta has shape {delta.shape}")
    tp = int(np.count_nonzero(theta & delta))
    fp = int(np.count_nonzero(~theta & delta))
    fn = int(np.count_nonzero(theta & ~delta))
    return ConfusionCounts(tp, fp, fn, theta.size - tp - fp - fn)


@dataclass(frozen=True)
class MetricsSummary:
    """Replicate-averaged error rates.

    ``fdr``/``fnr`` average per-replicate proportions (0 when the denominator
    is 0); ``mfdr``/``mfnr`` are ratios of replicate-summed counts.  The
    ``*_se`` fields are Monte Carlo standard errors; the ratio estimators use
    the delta method.
    """

    atp: float
    afp: float
    fdr: float
    fnr: float
    mfdr: float
    mfnr: float
    fwer: float
    mean_hamming: float
    rep_count: int
    atp_se: float = 0.0
    afp_se: float = 0.0
    fdr_se: float = 0.0
    mfdr_se: float = 0.0
    mfnr_se: float = 0.0
    fwer_se: float = 0.0

    def as_dict(self):
        return asdict(self)


SUMMARY_FIELDS = tuple(f.name for f in fields(MetricsSummary))


def _se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    return float(x.std(ddof=1) / math.sqrt(x.size))


def _ratio(num, den):
    """Ratio of sums with its delta-method standard error (0/0 -> 0)."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    total = den.sum()
    if total == 0:
        return 0.0, 0.0
    ratio = num.sum() / total
    if num.size < 2:
        return float(ratio), 0.0
    resid = num - ratio * den
    se = math.sqrt(resid.var(ddof=1) / num.size) / den.mean()
    return float(ratio), float(se)


def aggregate(counts: Sequence[ConfusionCounts]) -> MetricsSummary:
    if not counts:
        raise ValueError("cannot aggregate an empty list of counts")
    tp = np.array([c.tp for c in counts], dtype=float)
    fp = np.array([c.fp for c in counts], dtype=float)
    fn = np.array([c.fn for c in counts], dtype=float)
    tn = np.array([c.tn for c in counts], dtype=float)
    fdp = fp / np.maximum(fp + tp, 1.0)
    fnp = fn / np.maximum(fn + tn, 1.0)
    errs = fp + fn
    mfdr, mfdr_se = _ratio(fp, fp + tp)
    mfnr, mfnr_se = _ratio(fn, fn + tn)
    fwer_ind = (errs > 0).astype(float)
    return MetricsSummary(
        atp=float(tp.mean()),
        afp=float(fp.mean()),
        fdr=float(fdp.mean()),
        fnr=float(fnp.mean()),
        mfdr=mfdr,
        mfnr=mfnr,
        fwer=float(fwer_ind.mean()),
        mean_hamming=float(errs.mean()),
        rep_count=len(counts),
        atp_se=_se(tp),
        afp_se=_se(fp),
        fdr_se=_se(fdp),
        mfdr_se=mfdr_se,
        mfnr_se=mfnr_se,
        fwer_se=_se(fwer_ind),
    )


def write_counts_csv(path, rows):
    """Write per-replicate counts; ``rows`` are (key dict, replicate, ConfusionCounts)."""
    rows = list(rows)
    keys = list(rows[0][0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + ["replicate", "tp", "fp", "fn", "tn"])
        for key, rep, c in rows:
            w.writerow([key[k] for k in keys] + [rep, c.tp, c.fp, c.fn, c.tn])
