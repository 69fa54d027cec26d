"""Convergence tables as CSV or markdown, plus log-log plot data."""
from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from pathlib import Path

from .analysis import ConvergenceRow

log = logging.getLogger("spdo.report")


def _norm_label(s: float) -> str:
    return f"H^{s:g}-norm"


def _write_csv(path: Path, rows: Sequence[ConvergenceRow], s: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N", "h_X", _norm_label(s), "EOC"])
        for r in rows:
            writer.writerow([
                "" if r.N is None else r.N,
                repr(r.h_X),
                repr(r.error),
                "" if r.eoc is None else repr(r.eoc),
            ])


def _write_markdown(
    path: Path, rows: Sequence[ConvergenceRow], s: float, predicted: float | None, global_rate: float | None
) -> None:
    lines = [f"| N | h_X | {_norm_label(s)} | EOC |", "|---:|---:|---:|---:|"]
    for r in rows:
        N = "" if r.N is None else str(r.N)
        rate = "" if r.eoc is None else f"{r.eoc:.3f}"
        lines.append(f"| {N} | {r.h_X:.5f} | {r.error:.9f} | {rate} |")
    if predicted is not None:
        lines.append("")
        lines.append(f"Expected order of convergence : {predicted:g}")
    if global_rate is not None:
        lines.append(f"Least-squares order over the ladder : {global_rate:.3f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def loglog_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}.loglog.dat")


def emit_report(
    rows: Sequence[ConvergenceRow],
    path: Path | str,
    fmt: str = "csv",
    *,
    s: float = -0.5,
    predicted: float | None = None,
    global_rate: float | None = None,
) -> Path:
    """Write the table and ``<stem>.loglog.dat`` (one ``log h  log e`` pair per row)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "markdown":
        _write_markdown(path, rows, s, predicted, global_rate)
    else:
        _write_csv(path, rows, s)

    data = ["# log(h_X) log(error)"]
    data.extend(f"{math.log(r.h_X)!r} {math.log(r.error)!r}" for r in rows)
    loglog_path(path).write_text("\n".join(data) + "\n", encoding="utf-8")
    log.info("Wrote %d row(s) to %s.", len(rows), path)
    return path
