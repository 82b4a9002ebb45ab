"""CSV parsing against the documented column schemas."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "read_csv_columns", "require"]


class SchemaError(ValueError):
    """The CSV does not match the documented schema."""


def read_csv_columns(path) -> dict:
    """Read a CSV with a header row into name -> column mapping.

    Comment lines starting with ``#`` are skipped. Numeric columns come back
    as float arrays, everything else as object arrays of strings.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh)
                if row and not row[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{path.name}: empty file")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"{path.name}: no data rows")
    columns: dict = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in data]
        try:
            columns[name] = np.array([float(v) for v in raw])
        except ValueError:
            columns[name] = np.array(raw, dtype=object)
    return columns


def require(columns: dict, names, path) -> None:
    for name in names:
        if name not in columns:
            raise SchemaError(f"{Path(path).name}: missing column {name!r} "
                              f"(have {sorted(columns)})")
