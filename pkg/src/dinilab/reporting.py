"""Deterministic CSV and gnuplot-script emission for experiment runs.

Floats are formatted with repr-faithful %.17g so reruns of a deterministic
pipeline produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

__all__ = ["fmt", "write_csv", "write_json", "write_gnuplot"]


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=fmt) + "\n")
    return path


def write_gnuplot(path: str | Path, title: str, csv_name: str,
                  plots: list[str], logscale: str | None = None,
                  xlabel: str = "", ylabel: str = "") -> Path:
    """Emit a standalone gnuplot script next to its CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        "set key outside",
        "set grid",
    ]
    if xlabel:
        lines.append(f"set xlabel '{xlabel}'")
    if ylabel:
        lines.append(f"set ylabel '{ylabel}'")
    if logscale:
        lines.append(f"set logscale {logscale}")
    lines.append("plot " + ", \\\n     ".join(
        f"'{csv_name}' {p}" for p in plots))
    path.write_text("\n".join(lines) + "\n")
    return path
