"""Command line entry point: ``upt simulate | analyze | table | match-mfdr``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .. import __version__, csvio
from ..errors import UPTError
from ..metrics import write_counts_csv
from .config import load_config, preset
from .experiment import analyze, experiment_keys, match_mfdr, run_experiment
from .tables import ResultsTable, render_table

METHOD_ALIASES = {
    "bh": "BH",
    "by": "BY",
    "upt": "UPT_estimated",
    "upt_estimated": "UPT_estimated",
    "upt*": "UPT_ideal",
    "upt_ideal": "UPT_ideal",
    "uptstar": "UPT_ideal",
}


def _method(name):
    try:
        return METHOD_ALIASES[name.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown method {name!r}") from None


def _config(args):
    if (args.preset is None) == (args.config is None):
        raise SystemExit("give exactly one of --preset / --config")
    cfg = preset(args.preset) if args.preset else load_config(args.config)
    changes = {}
    if args.reps is not None:
        changes["reps"] = args.reps
    if args.seed is not None:
        changes["master_seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def _write_outputs(table: ResultsTable, config, out):
    os.makedirs(out, exist_ok=True)
    table.write_csv(os.path.join(out, "results.csv"))
    rows = []
    for o in table.replicates:
        for key in experiment_keys(config):
            if key in o.counts:
                rows.append(({"method": key[0], "tau": key[1], "t1_factor": key[2]}, o.replicate, o.counts[key]))
    write_counts_csv(os.path.join(out, "counts.csv"), rows)
    with open(os.path.join(out, "tuning_audit.txt"), "w") as fh:
        for o in table.replicates:
            fh.writelines(o.audit)
    with open(os.path.join(out, "metadata.txt"), "w") as fh:
        for k, v in sorted({**table.metadata, "version": __version__}.items()):
            fh.write(f"{k}={v}\n")
    with open(os.path.join(out, "table.md"), "w") as fh:
        fh.write(render_table(table, "markdown"))


def cmd_simulate(args):
    config = _config(args)
    table = run_experiment(config, workers=args.workers)
    out = args.out or config.out_dir or f"results-{config.name}"
    _write_outputs(table, config, out)
    sys.stdout.write(render_table(table, "markdown"))
    aborted = [r for r in table.rows if r.status != "ok"]
    for r in aborted:
        print(f"warning: {r.method} tau={r.tau:g} factor={r.t1_factor:g} {r.status}: {r.first_error}", file=sys.stderr)
    return 0


def cmd_match(args):
    config = _config(args)
    table, matches = match_mfdr(config, args.reference, args.target, workers=args.workers)
    out = args.out or f"results-{config.name}-matched"
    _write_outputs(table, config.replace(methods=tuple(dict.fromkeys((args.reference, args.target)))), out)
    with open(os.path.join(out, "matching.txt"), "w") as fh:
        for m in matches:
            fh.write(
                f"tau={m.tau:g} t1_factor={m.t1_factor:g} reference_mfdr={m.reference_mfdr:.4f} "
                f"alpha={m.alpha:.6g} achieved_mfdr={m.achieved_mfdr:.4f} iterations={m.iterations} "
                f"bracketed={m.bracketed} converged={m.converged}\n"
            )
    sys.stdout.write(render_table(table, "markdown"))
    for m in matches:
        if not m.bracketed:
            print(f"warning: tau={m.tau:g} not bracketed; closest mFDR {m.achieved_mfdr:.4f} "
                  f"at alpha={m.alpha:.4g} (reference {m.reference_mfdr:.4f})", file=sys.stderr)
    return 0


def cmd_analyze(args):
    X = csvio.read_matrix(args.x)
    Y = csvio.read_vector(args.y)
    if args.estimate and (args.theta is not None or args.r is not None):
        raise SystemExit("--estimate cannot be combined with --theta/--r")
    if not args.estimate and (args.theta is None or args.r is None):
        raise SystemExit("give --theta and --r, or --estimate")
    K = args.K if args.K is not None else "auto"
    report = analyze(X, Y, alpha=args.alpha, theta=args.theta, r=args.r, q=args.q, K=K)
    text = report.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_table(args):
    table = ResultsTable.read_csv(args.results)
    sys.stdout.write(render_table(table, args.format))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="upt", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_opts(p):
        p.add_argument("--preset")
        p.add_argument("--config")
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("simulate", help="run a preset or configured experiment")
    run_opts(s)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("match-mfdr", help="re-tune a UPT variant to the reference method's empirical mFDR")
    run_opts(m)
    m.add_argument("--reference", type=_method, default="BH")
    m.add_argument("--target", type=_method, default="UPT_estimated")
    m.set_defaults(func=cmd_match)

    a = sub.add_parser("analyze", help="run UPT on a dataset given as CSV files")
    a.add_argument("--x", required=True)
    a.add_argument("--y", required=True)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--theta", type=float)
    a.add_argument("--r", type=float)
    a.add_argument("--estimate", action="store_true")
    a.add_argument("--q", type=float)
    a.add_argument("--K", type=int)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("table", help="render a results CSV")
    t.add_argument("--results", required=True)
    t.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    t.set_defaults(func=cmd_table)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UPTError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
