"""CSV and config-file reading and writing.

All files are UTF-8 with LF line endings. Floats are written with 17
significant digits so that a round trip is exact and reruns are
byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ParseError
from .signals import Dataset, PiecewiseConstantSignal

__all__ = [
    "fmt",
    "read_signal_csv",
    "write_signal_csv",
    "read_dataset_csv",
    "write_dataset_csv",
    "write_model_csv",
    "read_model_csv",
    "write_weights_csv",
    "write_gram_csv",
    "write_table",
    "read_config",
]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


def write_table(path, header: Iterable[str], rows: Iterable[Iterable], comments: Iterable[str] = ()):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def _read_numeric(path, header: tuple):
    """Rows of floats from a CSV with the given header; ``#`` lines are comments."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        # left alone so the CLI can report a missing path as a usage error
        raise
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    comments = []
    rows = []
    seen_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            comments.append((lineno, stripped[1:].strip()))
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if not seen_header:
            if tuple(f.lower() for f in fields) != header:
                raise ParseError(f"expected header {','.join(header)!r}, got {stripped!r}", path, lineno)
            seen_header = True
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", path, lineno)
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric value in {stripped!r}", path, lineno) from None
        if not all(np.isfinite(vals)):
            raise ParseError(f"non-finite value in {stripped!r}", path, lineno)
        rows.append((lineno, vals))
    if not seen_header:
        raise ParseError(f"missing header {','.join(header)!r}", path)
    return rows, comments


def read_signal_csv(path) -> PiecewiseConstantSignal:
    """A piecewise-constant input from ``t,level`` rows (one per breakpoint)."""
    rows, _ = _read_numeric(path, ("t", "level"))
    if not rows:
        raise ParseError("signal file has no breakpoints", path)
    for (_, prev), (lineno, cur) in zip(rows, rows[1:]):
        if not cur[0] > prev[0]:
            raise ParseError("breakpoints must be strictly increasing", path, lineno)
    arr = np.array([v for _, v in rows])
    return PiecewiseConstantSignal(arr[:, 0], arr[:, 1])


def write_signal_csv(path, u: PiecewiseConstantSignal):
    write_table(path, ("t", "level"), zip(u.breakpoints, u.levels))


def read_dataset_csv(path) -> Dataset:
    rows, _ = _read_numeric(path, ("t", "y"))
    if not rows:
        raise ParseError("dataset file has no samples", path)
    arr = np.array([v for _, v in rows])
    return Dataset(arr[:, 0], arr[:, 1])


def write_dataset_csv(path, data: Dataset):
    write_table(path, ("t", "y"), zip(data.times, data.values))


def write_model_csv(path, times, c, kernel: str, lam: float, extra: dict | None = None):
    comments = [f"kernel = {kernel}", f"lambda = {fmt(lam)}"]
    for key, value in (extra or {}).items():
        comments.append(f"{key} = {value}")
    write_table(path, ("t_i", "c_i"), zip(times, c), comments)


def read_model_csv(path):
    """``(times, c, metadata)`` where metadata holds the ``# key = value`` lines."""
    rows, comments = _read_numeric(path, ("t_i", "c_i"))
    meta = {}
    for lineno, text in comments:
        if "=" not in text:
            continue
        key, value = text.split("=", 1)
        meta[key.strip()] = value.strip()
    if "lambda" in meta:
        try:
            meta["lambda"] = float(meta["lambda"])
        except ValueError:
            raise ParseError(f"bad lambda {meta['lambda']!r}", path) from None
    arr = np.array([v for _, v in rows]).reshape(-1, 2)
    return arr[:, 0], arr[:, 1], meta


def write_weights_csv(path, omegas, d):
    write_table(path, ("k", "omega", "d_k"), ((i, w, x) for i, (w, x) in enumerate(zip(omegas, d))))


def write_gram_csv(path, K):
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    write_table(path, ("i", "j", "value"), ((i, j, K[i, j]) for i in range(n) for j in range(n)))


def read_config(path) -> dict:
    """``key = value`` lines with ``#`` comments; returns ``{key: (value, lineno)}``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", path, lineno)
        key, value = (s.strip() for s in stripped.split("=", 1))
        key = key.lower()
        if not key:
            raise ParseError("empty key", path, lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path, lineno)
        out[key] = (value, lineno)
    return out
