"""Plain-text serialization of experiment results.

CSV files carry their metadata in ``#``-prefixed ``key = value`` header
lines followed by an ordinary CSV table. Floats are written with ``repr``
so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "none"
    return str(v)


def header_lines(meta: Mapping) -> list[str]:
    return [f"# {k} = {_fmt(v)}" for k, v in meta.items()]


def csv_text(meta: Mapping, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _cell(x: str):
    if not x:
        return np.nan
    try:
        return float(x)
    except ValueError:
        return x


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Parse a report written by :func:`csv_text` into (meta, columns, data).

    ``data`` is a float array, or an object array when some cells are text.
    """
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    columns, cells = rows[0], [[_cell(x) for x in row] for row in rows[1:]]
    numeric = all(isinstance(v, float) for row in cells for v in row)
    data = np.array(cells, dtype=float if numeric else object)
    return meta, columns, data.reshape(-1, len(columns))


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def stability_csv(report, config=None) -> str:
    meta = {"kind": "stability", "status": "CERTIFIED" if report.certified else "UNCERTIFIED",
            "q": report.q, "sup_mean_tv": report.sup_mean_tv, "replicas": report.replicas,
            "perturbation_factor": report.factor}
    if report.assumptions is not None:
        meta.update({f"assumption.{k}": v for k, v in _report_items(report.assumptions)})
    if config is not None:
        meta.update({f"config.{k}": v for k, v in config.echo().items()})
    rows = zip(report.steps, report.mean_tv, report.stderr)
    return csv_text(meta, ["step", "mean_tv", "stderr"], rows)


def forgetting_csv(report, config=None) -> str:
    meta = {"kind": "forgetting", "status": "CERTIFIED" if report.certified else "UNCERTIFIED",
            "initial_birkhoff": report.initial_birkhoff, "alpha_hat": report.alpha_hat,
            "r_squared": report.r_squared, "replicas": report.replicas}
    if report.assumptions is not None:
        meta.update({f"assumption.{k}": v for k, v in _report_items(report.assumptions)})
    if config is not None:
        meta.update({f"config.{k}": v for k, v in config.echo().items()})
    rows = zip(report.steps, report.mean_tv, report.stderr)
    return csv_text(meta, ["step", "mean_tv", "stderr"], rows)


def _report_items(rep):
    for line in rep.to_text().splitlines():
        k, _, v = line.partition(" = ")
        yield k, v
