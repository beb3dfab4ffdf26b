"""Headerless numeric CSV reading/writing with line-numbered diagnostics."""

from __future__ import annotations

import numpy as np


class CSVFormatError(ValueError):
    pass


def read_matrix(path, ncols=None):
    """Read a headerless numeric CSV into a 2-D float array."""
    rows = []
    width = ncols
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                row = [float(v) for v in fields]
            except ValueError:
                bad = next(v for v in fields if not _is_float(v))
                raise CSVFormatError(f"{path}:{lineno}: not a number: {bad!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CSVFormatError(
                    f"{path}:{lineno}: expected {width} columns, found {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise CSVFormatError(f"{path}: file is empty")
    return np.array(rows, dtype=float)


def read_vector(path):
    m = read_matrix(path)
    if m.shape[1] != 1:
        if m.shape[0] == 1:
            return m[0]
        raise CSVFormatError(f"{path}: expected a single column, found {m.shape[1]}")
    return m[:, 0]


def write_matrix(path, arr):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")


def _is_float(v):
    try:
        float(v)
    except ValueError:
        return False
    return True
