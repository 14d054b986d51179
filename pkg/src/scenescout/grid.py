"""The labeled workspace grid: 5 rows (A-E) by 10 columns (1-10).

The grid partitions the workspace rectangle into 50 equal cells so that
placement commands can name a location symbolically ("B3"). Row A is the
band nearest the front edge (low y); column 1 is the leftmost band (low x).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

GRID_ROWS = "ABCDE"
GRID_COLS = tuple(range(1, 11))


class InvalidGridId(Exception):
    def __init__(self, ident: str):
        super().__init__(f"invalid grid cell id: {ident!r}")
        self.ident = ident


@dataclass(frozen=True, order=True)
class GridCell:
    row: str
    col: int

    def __post_init__(self):
        if self.row not in GRID_ROWS or self.col not in GRID_COLS:
            raise InvalidGridId(f"{self.row}{self.col}")

    @property
    def ident(self) -> str:
        return f"{self.row}{self.col}"

    def __str__(self) -> str:
        return self.ident


_CELL_RE = re.compile(r"^\s*([A-Za-z])\s*(\d{1,2})\s*$")


def parse_cell(ident: str) -> GridCell:
    m = _CELL_RE.match(ident)
    if not m:
        raise InvalidGridId(ident.strip())
    row, col = m.group(1).upper(), int(m.group(2))
    if row not in GRID_ROWS or col not in GRID_COLS:
        raise InvalidGridId(ident.strip())
    return GridCell(row, col)


def all_cells() -> list[GridCell]:
    return [GridCell(r, c) for r in GRID_ROWS for c in GRID_COLS]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned workspace rectangle in meters."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, x: float, y: float, inset: float = 0.0) -> bool:
        return (
            self.x0 + inset <= x <= self.x1 - inset
            and self.y0 + inset <= y <= self.y1 - inset
        )


DEFAULT_BOUNDS = Rect(0.0, 0.0, 1.0, 1.0)


def cell_center(cell: GridCell, bounds: Rect = DEFAULT_BOUNDS) -> tuple[float, float]:
    cw = bounds.width / len(GRID_COLS)
    ch = bounds.height / len(GRID_ROWS)
    x = bounds.x0 + (cell.col - 0.5) * cw
    y = bounds.y0 + (GRID_ROWS.index(cell.row) + 0.5) * ch
    return (x, y)


def cell_of(x: float, y: float, bounds: Rect = DEFAULT_BOUNDS) -> GridCell:
    """Map an interior point to its cell; points on the far edges clamp in."""
    cw = bounds.width / len(GRID_COLS)
    ch = bounds.height / len(GRID_ROWS)
    col = min(len(GRID_COLS) - 1, max(0, int((x - bounds.x0) / cw)))
    row = min(len(GRID_ROWS) - 1, max(0, int((y - bounds.y0) / ch)))
    return GridCell(GRID_ROWS[row], col + 1)
