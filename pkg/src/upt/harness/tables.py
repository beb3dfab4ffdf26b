"""Result rows, CSV persistence and table rendering."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional

from ..metrics import SUMMARY_FIELDS, MetricsSummary

METHOD_LABELS = {"UPT_ideal": "UPT*", "UPT_estimated": "UPT", "BH": "BH", "BY": "BY", "oracle": "oracle"}
KEY_FIELDS = ("method", "tau", "t1_factor", "status", "n_errors", "nominal_alpha")


@dataclass
class ResultRow:
    method: str
    tau: float
    t1_factor: float
    status: str
    n_errors: int
    nominal_alpha: float
    summary: Optional[MetricsSummary]
    first_error: str = ""

    @property
    def key(self):
        return (self.method, self.tau, self.t1_factor)


@dataclass
class ResultsTable:
    rows: List[ResultRow]
    metadata: dict = field(default_factory=dict)
    replicates: list = field(default_factory=list, repr=False)

    def row(self, method, tau, t1_factor=1.0) -> ResultRow:
        for r in self.rows:
            if r.key == (method, float(tau), float(t1_factor)):
                return r
        raise KeyError((method, tau, t1_factor))

    def to_csv(self) -> str:
        """One line per key with every summary field; deterministic formatting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(KEY_FIELDS + SUMMARY_FIELDS + ("first_error",))
        for r in self.rows:
            head = [r.method, _fmt(r.tau), _fmt(r.t1_factor), r.status, r.n_errors, _fmt(r.nominal_alpha)]
            if r.summary is None:
                vals = [""] * len(SUMMARY_FIELDS)
            else:
                d = r.summary.as_dict()
                vals = [_fmt(d[f]) for f in SUMMARY_FIELDS]
            w.writerow(head + vals + [r.first_error])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text) -> "ResultsTable":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            summary = None
            if rec["atp"] != "":
                vals = {f: float(rec[f]) for f in SUMMARY_FIELDS}
                vals["rep_count"] = int(vals["rep_count"])
                summary = MetricsSummary(**vals)
            rows.append(
                ResultRow(
                    method=rec["method"],
                    tau=float(rec["tau"]),
                    t1_factor=float(rec["t1_factor"]),
                    status=rec["status"],
                    n_errors=int(rec["n_errors"]),
                    nominal_alpha=float(rec["nominal_alpha"]),
                    summary=summary,
                    first_error=rec.get("first_error", ""),
                )
            )
        return cls(rows)

    @classmethod
    def read_csv(cls, path) -> "ResultsTable":
        with open(path) as fh:
            return cls.from_csv(fh.read())


def _fmt(x):
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".10g")


def _row_label(method, factor, multi_factor):
    label = METHOD_LABELS.get(method, method)
    if multi_factor:
        label += f" x{factor:.2f}"
    return label


def _layout(results: ResultsTable):
    taus = sorted({r.tau for r in results.rows})
    labels = []
    cells = {}
    multi = len({r.t1_factor for r in results.rows}) > 1
    for r in results.rows:
        label = _row_label(r.method, r.t1_factor, multi)
        if label not in labels:
            labels.append(label)
        if r.summary is None:
            cells[(label, r.tau)] = (r.status,) * 3
        else:
            s = r.summary
            cells[(label, r.tau)] = (f"{s.atp:.2f}", f"{s.afp:.2f}", f"{s.mfdr:.2f}")
    return taus, labels, cells


def render_table(results: ResultsTable, fmt="markdown") -> str:
    """Methods as rows, one (atp, afp, mfdr) column group per tau."""
    taus, labels, cells = _layout(results)
    blank = ("", "", "")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method"] + [f"tau={t:g}:{m}" for t in taus for m in ("atp", "afp", "mfdr")])
        for label in labels:
            w.writerow([label] + [v for t in taus for v in cells.get((label, t), blank)])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"format must be 'markdown' or 'csv', got {fmt!r}")
    head = "| method | " + " | ".join(f"tau={t:g} atp | afp | mfdr" for t in taus) + " |"
    sep = "|---|" + "---|" * (3 * len(taus))
    lines = [head, sep]
    for label in labels:
        vals = [v for t in taus for v in cells.get((label, t), blank)]
        lines.append(f"| {label} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"
