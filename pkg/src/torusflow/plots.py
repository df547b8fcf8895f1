"""Gnuplot scripts and the CSV tables they plot."""

from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import List

from .errors import IoError
from .experiment import ExperimentReport, fmt

_HEAD = """set datafile separator ','
set terminal pngcairo size 800,600
set output '{png}'
set xlabel '{xlabel}'
set ylabel '{ylabel}'
"""


def _script(png, xlabel, ylabel, clauses, logx=False):
    body = _HEAD.format(png=png, xlabel=xlabel, ylabel=ylabel)
    if logx:
        body += "set logscale x\n"
    return body + "plot " + ", \\\n     ".join(clauses) + "\n"


def _scripts(orders):
    tk = [
        f"'t_supK.csv' skip 1 using 2:($1 == {i} ? $3 : NaN) with linespoints title 'i={i}'"
        for i in orders
    ]
    return {
        "t_supK.gp": _script("t_supK.png", "t", "t * sup|K|", tk, logx=True),
        "l1_gap.gp": _script("l1_gap.png", "i", "L1 gap to u = 2", [
            "'l1_gap_vs_i.csv' skip 1 using 1:2 with linespoints title 'L1 gap at t*'",
            "'l1_gap_vs_i.csv' skip 1 using 1:(1/$1) with lines title '1/i'",
        ]),
        "distance_gap.gp": _script("distance_gap.png", "i", "sup distance gap", [
            "'distance_gap_vs_i.csv' skip 1 using 1:2 with linespoints title 'd_u0 vs d0 (t=0)'",
            "'distance_gap_vs_i.csv' skip 1 using 1:3 with linespoints title 'd_t* vs sqrt(2) d0'",
        ]),
    }


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_plots(report: ExperimentReport, out_dir) -> List[Path]:
    """Write plot CSVs and gnuplot scripts into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, run in sorted(report.runs.items()):
            rows += [[str(i), fmt(r.t), fmt(r.t_supK)] for r in run.records if r.t_supK is not None]
        _write_csv(out / "t_supK.csv", ["i", "t", "t_supK"], rows)
        _write_csv(out / "l1_gap_vs_i.csv", ["i", "l1_gap"],
                   [[str(r.i), fmt(r.l1_gap)] for r in report.convergence])
        _write_csv(out / "distance_gap_vs_i.csv", ["i", "gap_t0", "gap_tstar"],
                   [[str(i), fmt(run.gap_t0["sup_gap"]), fmt(run.gap_tstar["sup_gap"])]
                    for i, run in sorted(report.runs.items())])
        written += [out / "t_supK.csv", out / "l1_gap_vs_i.csv", out / "distance_gap_vs_i.csv"]
        for name, body in _scripts(sorted(report.runs)).items():
            (out / name).write_text(body)
            written.append(out / name)
    except OSError as exc:
        raise IoError(f"cannot write plots to {out}: {exc}") from exc
    return written


def referenced_files(script: Path) -> List[str]:
    """Data files a gnuplot script reads (quoted ``*.csv`` names)."""
    return sorted(set(re.findall(r"'([^']+\.csv)'", script.read_text())))
