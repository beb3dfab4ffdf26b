"""Replication loop, mFDR matching and single-dataset analysis."""

from __future__ import annotations

import functools
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import baselines, oracle, tuning
from ..core import ScreenedData, clean_blocks, component_blocks, screen_and_decompose
from ..covmodel import build_covariance, factorize
from ..datagen import (
    draw_design_gaussian,
    draw_design_uniform,
    draw_signal_pattern,
    draw_signal_pattern_exact,
    replicate_streams,
)
from ..decisions import DecisionVector
from ..errors import UPTError
from ..gram_graph import marginal_stats
from ..metrics import ConfusionCounts, aggregate, confusion
from .config import ExperimentConfig
from .tables import ResultRow, ResultsTable

log = logging.getLogger(__name__)

ABORT_FRACTION = 0.05
UPT_METHODS = ("UPT_ideal", "UPT_estimated")
Key = Tuple[str, float, float]


@dataclass
class PreparedUPT:
    """Screened, decomposed data for one UPT variant; ``alpha`` is still free.

    ``t1``, ``t3`` and the component structure do not depend on ``alpha``, so
    re-cleaning at another level only recomputes ``t2``.
    """

    p: int
    theta_used: float
    r_used: float
    q: float
    t1: float
    K: int
    source: str
    survivors: np.ndarray
    blocks: Optional[list]
    max_component_size: int
    error: Optional[str] = None

    def params(self, alpha, clamp=False):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            params = tuning.ideal_params(
                self.p, self.theta_used, self.r_used, alpha=alpha, K=self.K, q=self.q, clamp=clamp,
                source=self.source,
            )
        return params.scaled_t1(self.t1 / params.t1)

    def decide(self, alpha, cfg) -> DecisionVector:
        if self.error is not None:
            raise UPTError(self.error)
        params = self.params(alpha, cfg.clamp)
        return clean_blocks(
            self.p, self.survivors, self.blocks, params.t2, params.t3, cfg.sign_mode, cfg.penalty, cfg.max_component
        )


def _prepare_upt(X, Y, stats, base: tuning.TuningParams, factor, cfg) -> PreparedUPT:
    t1 = base.t1 * factor
    screened: ScreenedData = screen_and_decompose(X, Y, t1, cfg.gram_threshold, stats)
    graph = screened.graph
    K = tuning.resolve_K(graph.max_component_size) if cfg.K == "auto" else int(cfg.K)
    prep = PreparedUPT(
        p=graph.p,
        theta_used=base.theta_used,
        r_used=base.r_used,
        q=base.q,
        t1=t1,
        K=K,
        source=base.source,
        survivors=graph.survivors,
        blocks=None,
        max_component_size=graph.max_component_size,
    )
    if graph.max_component_size > cfg.max_component:
        prep.error = (
            f"ComponentTooLargeError: component of size {graph.max_component_size} "
            f"exceeds cap {cfg.max_component}"
        )
    else:
        prep.blocks = component_blocks(screened)
    return prep


def _base_params(method, config: ExperimentConfig, p, tau, y_tilde):
    cfg = config.tuning
    K = 5 if cfg.K == "auto" else int(cfg.K)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if method == "UPT_ideal":
            return tuning.ideal_params_from_tau(
                p, config.signal.theta, tau, alpha=config.alpha, K=K, q=cfg.q, clamp=cfg.clamp
            )
        return tuning.data_driven_params(
            y_tilde, p, alpha=config.alpha, K=K, q=cfg.q, two_sided=cfg.two_sided_estimates, clamp=cfg.clamp
        )


@dataclass
class ReplicateOutcome:
    replicate: int
    counts: Dict[Key, ConfusionCounts] = field(default_factory=dict)
    errors: Dict[Key, str] = field(default_factory=dict)
    audit: List[str] = field(default_factory=list)
    diagnostics: Dict[Key, dict] = field(default_factory=dict)
    prepared: Dict[Key, PreparedUPT] = field(default_factory=dict)
    thetas: Dict[float, np.ndarray] = field(default_factory=dict)


def experiment_keys(config: ExperimentConfig) -> List[Key]:
    keys = []
    for method in config.methods:
        factors = config.t1_factors if method in UPT_METHODS else (1.0,)
        for tau in config.tau_grid:
            for f in factors:
                keys.append((method, float(tau), float(f)))
    return keys


def _signal_pattern(config: ExperimentConfig, p, rng):
    sig = config.signal
    if sig.exact_count:
        count = math.ceil(p ** (1 - sig.theta))
        return draw_signal_pattern_exact(p, count, sig.perturbation, sig.signed, rng)
    return draw_signal_pattern(p, sig.theta, sig.perturbation, sig.signed, rng)


@functools.lru_cache(maxsize=8)
def _factor(cov_cfg, p):
    return factorize(build_covariance(cov_cfg.spec(p)))


def run_replicate(config: ExperimentConfig, replicate: int, keep_prepared=False) -> ReplicateOutcome:
    """Generate one dataset per tau (sharing design and noise) and run every method."""
    p, n = config.p, config.n_obs
    out = ReplicateOutcome(replicate)
    streams = replicate_streams(config.master_seed, replicate)
    pattern = _signal_pattern(config, p, streams["signal"])
    factor = _factor(config.covariance, p)
    draw = draw_design_gaussian if config.design == "gaussian" else draw_design_uniform
    X = draw(n, p, factor, streams["design"])
    eps = streams["noise"].standard_normal(n)
    cfg = config.tuning

    for tau in config.tau_grid:
        tau = float(tau)
        beta = pattern.beta(tau)
        theta = beta != 0
        Y = X @ beta + eps
        stats = marginal_stats(X, Y)
        if keep_prepared:
            out.thetas[tau] = theta
        pv = None
        for method in config.methods:
            if method in ("BH", "BY"):
                if pv is None:
                    pv = baselines.marginal_pvalues(X, Y)
                rule = baselines.bh if method == "BH" else baselines.by
                out.counts[(method, tau, 1.0)] = confusion(theta, rule(pv.pvals, config.alpha).delta)
            elif method == "oracle":
                r = tau**2 / (2 * math.log(p))
                lam = cfg.oracle_lambda
                if lam is None:
                    lam = p ** (-tuning.zeta_exponent(config.signal.theta, r))
                prior = oracle.DiscretePrior.symmetric(p ** (-config.signal.theta), tau)
                fdr = oracle.exact_local_fdr(X, Y, prior)
                out.counts[(method, tau, 1.0)] = confusion(theta, oracle.oracle_decide(fdr, lam).delta)
            else:
                _run_upt(method, config, X, Y, stats, theta, tau, out, keep_prepared)
    return out


def _run_upt(method, config, X, Y, stats, theta, tau, out: ReplicateOutcome, keep_prepared):
    p = config.p
    try:
        base = _base_params(method, config, p, tau, stats.y_tilde)
    except UPTError as exc:
        for f in config.t1_factors:
            out.errors[(method, tau, float(f))] = f"{type(exc).__name__}: {exc}"
        return
    for f in config.t1_factors:
        key = (method, tau, float(f))
        prep = _prepare_upt(X, Y, stats, base, float(f), config.tuning)
        out.diagnostics[key] = {
            "survivors": int(prep.survivors.size),
            "max_component_size": prep.max_component_size,
            "theta_used": prep.theta_used,
            "r_used": prep.r_used,
            "screen_lost": int(np.count_nonzero(theta & (np.abs(stats.y_tilde) <= prep.t1))),
            "signals": int(np.count_nonzero(theta)),
        }
        if keep_prepared:
            out.prepared[key] = prep
        try:
            params = prep.params(config.alpha, config.tuning.clamp)
            header = f"# replicate={out.replicate} method={method} tau={tau:g} t1_factor={f:g}\n"
            out.audit.append(header + params.audit())
            delta = prep.decide(config.alpha, config.tuning).delta
        except UPTError as exc:
            out.errors[key] = str(exc) if prep.error else f"{type(exc).__name__}: {exc}"
            continue
        out.counts[key] = confusion(theta, delta)


def _run_one(args):
    config, rep, keep = args
    return run_replicate(config, rep, keep)


def run_replicates(config: ExperimentConfig, workers=1, keep_prepared=False) -> List[ReplicateOutcome]:
    """All replicates in replicate order, regardless of ``workers``."""
    jobs = [(config, rep, keep_prepared) for rep in range(config.reps)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, config.reps // (4 * workers))))


def summarize(config: ExperimentConfig, outcomes: List[ReplicateOutcome], keys=None, alpha=None) -> ResultsTable:
    rows = []
    for key in keys or experiment_keys(config):
        counts = [o.counts[key] for o in outcomes if key in o.counts]
        errors = [o.errors[key] for o in outcomes if key in o.errors]
        status = "ok"
        summary = None
        if len(errors) > ABORT_FRACTION * len(outcomes):
            status = "aborted"
            log.warning("%s tau=%g factor=%g aborted: %d/%d replicates failed (%s)",
                        *key, len(errors), len(outcomes), errors[0])
        elif counts:
            summary = aggregate(counts)
        else:
            status = "empty"
        rows.append(
            ResultRow(
                method=key[0],
                tau=key[1],
                t1_factor=key[2],
                status=status,
                n_errors=len(errors),
                nominal_alpha=config.alpha if alpha is None else alpha.get(key, config.alpha),
                summary=summary,
                first_error=errors[0] if errors else "",
            )
        )
    meta = {"config": config.name, "config_digest": config.digest(), "master_seed": config.master_seed,
            "reps": config.reps}
    return ResultsTable(rows=rows, metadata=meta, replicates=outcomes)


def run_experiment(config: ExperimentConfig, workers=1) -> ResultsTable:
    """Run every replicate and aggregate per (method, tau, t1_factor).

    A key whose replicates fail in more than 5% of cases is reported with
    status ``aborted`` and no metrics; other keys are unaffected.
    """
    return summarize(config, run_replicates(config, workers))


@dataclass(frozen=True)
class MatchResult:
    tau: float
    t1_factor: float
    reference_mfdr: float
    alpha: float
    achieved_mfdr: float
    iterations: int
    bracketed: bool
    converged: bool


def bisect_level(gap, lo, hi, tol=0.005, max_iter=25):
    """Find a level where the increasing function ``gap`` is within ``tol`` of 0.

    ``gap(level)`` returns ``(value, payload)``.  Returns
    ``(level, value, payload, iterations, bracketed)`` for the closest level
    seen; when the end points do not bracket 0, the closer end point is
    returned without iterating.
    """
    g_hi, c_hi = gap(hi)
    g_lo, c_lo = gap(lo)
    best = min(((abs(g_hi), hi, g_hi, c_hi), (abs(g_lo), lo, g_lo, c_lo)), key=lambda t: t[0])
    bracketed = g_lo <= tol and g_hi >= -tol
    iterations = 0
    if bracketed and best[0] > tol:
        while iterations < max_iter:
            iterations += 1
            mid = 0.5 * (lo + hi)
            g, c = gap(mid)
            if abs(g) < best[0]:
                best = (abs(g), mid, g, c)
            if abs(g) <= tol:
                break
            if g < 0:
                lo = mid
            else:
                hi = mid
    return best[1], best[2], best[3], iterations, bracketed


def _mfdr_at(prepared, thetas, alpha, cfg):
    counts = [confusion(theta, prep.decide(alpha, cfg).delta) for prep, theta in zip(prepared, thetas)]
    return aggregate(counts), counts


def match_mfdr(
    config: ExperimentConfig,
    reference="BH",
    target="UPT_estimated",
    tol=0.005,
    max_iter=25,
    alpha_range=(1e-6, 0.5),
    workers=1,
):
    """Re-tune ``target``'s nominal level so its empirical mFDR matches ``reference``'s.

    Bisection over the nominal level, per tau (and t1 factor).  Returns the
    table (reference rows, then matched target rows) and one
    :class:`MatchResult` per matched key.
    """
    methods = tuple(dict.fromkeys((reference, target)))
    cfg_run = config.replace(methods=methods)
    outcomes = run_replicates(cfg_run, workers, keep_prepared=target in UPT_METHODS)
    base_table = summarize(cfg_run, outcomes)
    if reference == target:
        return base_table, []
    if target not in UPT_METHODS:
        raise ValueError("only UPT variants can be re-tuned")

    by_key = {(r.method, r.tau, r.t1_factor): r for r in base_table.rows}
    matches = []
    alphas = {}
    lo0, hi0 = alpha_range
    for key in experiment_keys(cfg_run):
        if key[0] != target:
            continue
        method, tau, f = key
        ref_row = by_key[(reference, tau, 1.0)]
        if ref_row.summary is None:
            continue
        goal = ref_row.summary.mfdr
        ok = [o for o in outcomes if key in o.prepared and o.prepared[key].error is None]
        if len(outcomes) - len(ok) > ABORT_FRACTION * len(outcomes):
            continue
        prepared = [o.prepared[key] for o in ok]
        thetas = [o.thetas[tau] for o in ok]

        def gap(a):
            s, c = _mfdr_at(prepared, thetas, a, config.tuning)
            return s.mfdr - goal, c

        found = bisect_level(gap, lo0, hi0, tol, max_iter)
        a_best, g_best, c_best, iterations, bracketed = found
        alphas[key] = a_best
        for o, cnt in zip(ok, c_best):
            o.counts[key] = cnt
        matches.append(
            MatchResult(tau, f, goal, a_best, goal + g_best, iterations, bracketed, abs(g_best) <= tol)
        )
    table = summarize(cfg_run, outcomes, alpha=alphas)
    table.metadata["matched_reference"] = reference
    return table, matches


@dataclass
class AnalysisReport:
    decisions: DecisionVector
    y_tilde: np.ndarray
    params: tuning.TuningParams
    max_component_size: int

    def to_text(self) -> str:
        lines = ["# tuning", self.params.audit().rstrip("\n"), "# decisions", "index,delta,provenance,y_tilde"]
        labels = self.decisions.provenance_labels()
        for i, (d, lab, y) in enumerate(zip(self.decisions.delta, labels, self.y_tilde), 1):
            lines.append(f"{i},{int(d)},{lab},{y:.12g}")
        return "\n".join(lines) + "\n"


def analyze(
    X,
    Y,
    alpha=0.05,
    theta=None,
    r=None,
    q=None,
    K="auto",
    tuning_cfg=None,
) -> AnalysisReport:
    """Run UPT on one dataset: ideal mode when ``theta`` and ``r`` are given, else estimated."""
    from .config import TuningConfig

    cfg = tuning_cfg or TuningConfig(q=q, K=K)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.size == 0:
        raise ValueError("Y is empty")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]} entries")
    p = X.shape[1]
    stats = marginal_stats(X, Y)
    K0 = 5 if cfg.K == "auto" else int(cfg.K)
    if (theta is None) != (r is None):
        raise ValueError("give both theta and r for ideal mode, or neither")
    if theta is not None:
        base = tuning.ideal_params(p, theta, r, alpha=alpha, K=K0, q=cfg.q, clamp=cfg.clamp)
    else:
        base = tuning.data_driven_params(
            stats.y_tilde, p, alpha=alpha, K=K0, q=cfg.q, two_sided=cfg.two_sided_estimates, clamp=cfg.clamp
        )
    prep = _prepare_upt(X, Y, stats, base, 1.0, cfg)
    decisions = prep.decide(alpha, cfg)
    return AnalysisReport(decisions, stats.y_tilde, prep.params(alpha, cfg.clamp), prep.max_component_size)
