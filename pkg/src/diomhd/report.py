"""Deterministic CSV and plain-text report emission."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip text for floats (at most 17 significant digits)."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(value, (tuple, list, np.ndarray)):
        return " ".join(fmt(v) for v in value)
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        path.write_text(csv_text(columns, rows))
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a CSV written by :func:`write_csv`."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()], dtype=float)
    return header, data.reshape(-1, len(header))


def report_text(title: str, sections: Sequence[tuple[str, Sequence[tuple[str, object]]]]) -> str:
    """``[section]`` blocks of ``key = value`` lines."""
    out = [f"# {title}"]
    for name, items in sections:
        out.append("")
        out.append(f"[{name}]")
        out.extend(f"{k} = {fmt(v)}" for k, v in items)
    return "\n".join(out) + "\n"


def write_report(path, title: str, sections) -> Path:
    path = Path(path)
    try:
        path.write_text(report_text(title, sections))
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err
    return path
