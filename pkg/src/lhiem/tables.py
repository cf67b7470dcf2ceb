"""Locating and reading the delimiter-separated data tables."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import pandas as pd

from .errors import ParseError

DATA_PACKAGE = "lhiem.data"


def data_path(name: str) -> Path:
    """Path of a table shipped with the package."""
    return Path(str(resources.files(DATA_PACKAGE).joinpath(name)))


def resolve(path, default_name: str) -> Path:
    return data_path(default_name) if path is None else Path(path)


def read_table(path, columns, numeric=()) -> pd.DataFrame:
    """Read a CSV table, checking required columns and numeric parsing.

    Raises :class:`ParseError` naming the file, and the row/column when a value
    is malformed.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("file not found", path=path)
    try:
        frame = pd.read_csv(path, comment="#", skipinitialspace=True, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc), path=path) from exc
    frame.columns = [c.strip() for c in frame.columns]
    for col in columns:
        if col not in frame.columns:
            raise ParseError("missing required column", path=path, column=col)
    for col in numeric:
        values = pd.to_numeric(frame[col].str.strip(), errors="coerce")
        bad = values.isna().to_numpy().nonzero()[0]
        if bad.size:
            raise ParseError(f"invalid number {frame[col].iloc[bad[0]]!r}", path=path, row=int(bad[0]) + 2, column=col)
        frame[col] = values
    for col in frame.columns:
        if col not in numeric and frame[col].dtype == object:
            frame[col] = frame[col].str.strip()
    return frame
