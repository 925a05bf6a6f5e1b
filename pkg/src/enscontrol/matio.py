"""Plain-text matrix and vector files.

One matrix row per line, comma-separated reals with '.' decimal points,
no header.  Vectors are single-column files.  Values are written with 17
significant digits so a save/load round trip is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """A matrix file could not be parsed; carries 1-based line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class RaggedRowsError(ParseError):
    """Rows of a matrix file have differing lengths."""


def load_matrix(path) -> np.ndarray:
    """Parse a rectangular CSV of reals into a 2-D array."""
    text = Path(path).read_text(encoding="utf-8")
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise RaggedRowsError(
                f"expected {width} columns, found {len(cells)}", lineno, 1
            )
        row = []
        for colno, cell in enumerate(cells, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"invalid real {cell.strip()!r}", lineno, colno
                ) from None
            if not np.isfinite(value):
                raise ParseError(f"non-finite value {cell.strip()!r}", lineno, colno)
            row.append(value)
        rows.append(row)
    if not rows:
        raise ParseError("file contains no data", 1, 1)
    return np.array(rows, dtype=float)


def load_vector(path) -> np.ndarray:
    """Parse a single-column file into a 1-D array."""
    m = load_matrix(path)
    if m.shape[1] != 1:
        raise ParseError(f"expected a single column, found {m.shape[1]}", 1, 2)
    return m[:, 0]


def save_matrix(path, m) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    lines = [",".join(f"{v:.17g}" for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_vector(path, v) -> None:
    v = np.asarray(v, dtype=float)
    save_matrix(path, v.reshape(-1, 1))
