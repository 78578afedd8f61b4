"""Results tables and their CSV / text artifacts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..stats import StatsSummary, bootstrap_median_ci

SUMMARY_COLUMNS = ("key", "n", "median", "ci_low", "ci_high", "resamples", "seed", "raw_path")
EPISODE_COLUMNS = ("key", "seed", "episode_id", "f_enter", "f_exit", "decrease", "steps",
                   "success", "probe_id")


@dataclass
class ResultRow:
    key: str
    summary: StatsSummary | None
    raw_path: str
    samples: list
    extra: dict = field(default_factory=dict)


@dataclass
class ResultsTable:
    name: str
    rows: list = field(default_factory=list)
    runs: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add(self, key: str, samples, *, resamples: int, seed: int, **extra) -> ResultRow:
        samples = [float(s) for s in samples]
        summary = bootstrap_median_ci(samples, resamples, seed) if samples else None
        row = ResultRow(key, summary, f"samples/{safe_name(key)}.csv", samples, extra)
        self.rows.append(row)
        return row

    def row(self, key: str) -> ResultRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)


def safe_name(key: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in key)


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return ">cap" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_table(table: ResultsTable, out_dir: str | Path) -> Path:
    """Write results.csv, episodes.csv, samples/, traces and summary.txt."""
    out = Path(out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    extra_cols: list = []
    for r in table.rows:
        for k in r.extra:
            if k not in extra_cols:
                extra_cols.append(k)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS + tuple(extra_cols))
        for r in table.rows:
            s = r.summary
            base = [r.key, len(r.samples)]
            base += [s.median, s.ci_low, s.ci_high, s.resamples, s.seed] if s else ["", "", "", "", ""]
            base.append(r.raw_path)
            w.writerow([fmt(v) for v in base] + [fmt(r.extra.get(k)) for k in extra_cols])
    for r in table.rows:
        with open(out / r.raw_path, "w", newline="") as fh:
            fh.write("value\n")
            fh.writelines(("inf" if math.isinf(v) else repr(v)) + "\n" for v in r.samples)
    with open(out / "episodes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_COLUMNS)
        for run in table.runs:
            for i, e in enumerate(run.episodes):
                w.writerow([fmt(v) for v in (run.key, run.seed, i) + tuple(e)])
    for run in table.runs:
        if run.trace_csv is None:
            continue
        d = out / "traces" / safe_name(run.key)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"trace_{run.seed}.csv").write_text(run.trace_csv)
    (out / "summary.txt").write_text(summary_text(table))
    return out


def summary_text(table: ResultsTable) -> str:
    lines = [f"experiment: {table.name}", ""]
    head = f"{'key':<40} {'n':>5} {'median':>12} {'ci_low':>12} {'ci_high':>12}"
    lines += [head, "-" * len(head)]
    for r in table.rows:
        s = r.summary
        if s is None:
            lines.append(f"{r.key:<40} {0:>5} {'-':>12} {'-':>12} {'-':>12}")
            continue
        lines.append(f"{r.key:<40} {s.n:>5} {_short(s.median):>12} {_short(s.ci_low):>12} "
                     f"{_short(s.ci_high):>12}")
        if r.extra:
            lines.append("    " + ", ".join(f"{k}={_short(v)}" for k, v in r.extra.items()))
    if table.meta:
        lines += ["", "notes:"]
        lines += [f"  {k}: {_short(v)}" for k, v in table.meta.items()]
    if table.warnings:
        lines += ["", "warnings:"]
        lines += [f"  {w}" for w in table.warnings]
    errors = [r for r in table.runs if r.error]
    if errors:
        lines += ["", "failed runs:"]
        lines += [f"  {r.key} seed={r.seed}: {r.error}" for r in errors]
    return "\n".join(lines) + "\n"


def _short(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return ">cap"
        return f"{v:.6g}"
    return str(v)
