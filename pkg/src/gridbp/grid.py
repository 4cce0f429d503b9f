"""Grid coordinate systems and cell identifiers.

Two grid systems are provided:

* :class:`PlanarGrid` - a square lattice anchored at a world origin. Cell ids
  are ``PlanarId(col, row)``.
* :class:`MgrsGrid` - a subset of the Military Grid Reference System that
  covers a single grid zone designator (GZD). Cell ids are :class:`MgrsId`
  values such as ``10QCG12345678``.

Both systems reduce to an integer lattice ``(east, north)`` measured in cells
from the grid's metric origin. The inference engine works on that lattice so
that it does not care which labelling a deployment uses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "GridError",
    "ExtentError",
    "GridParseError",
    "PlanarId",
    "MgrsId",
    "GridId",
    "Grid",
    "PlanarGrid",
    "MgrsGrid",
    "id_of",
    "center_of",
    "offset_id",
    "parse_mgrs",
    "format_mgrs",
    "parse_planar",
    "format_id",
    "common_prefix_strip",
    "encode_cells",
    "decode_keys",
]


class GridError(ValueError):
    """Base class for grid errors."""


class ExtentError(GridError):
    """A coordinate or id falls outside the grid's supported extent."""


class GridParseError(GridError):
    """A textual id could not be decoded."""


# -- lattice key encoding ----------------------------------------------------
#
# Cells are packed into one int64 so that sparse pmfs can be handled with
# sorted-array set operations. Sorting keys sorts cells by (east, north).

_KEY_SHIFT = 32
_KEY_BIAS = 1 << 30
_KEY_MASK = (1 << _KEY_SHIFT) - 1


def encode_cells(cells) -> np.ndarray:
    """Pack an ``(n, 2)`` integer lattice array into int64 keys."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if cells.size and (np.abs(cells).max() >= _KEY_BIAS):
        raise ExtentError("lattice coordinate exceeds key range")
    return ((cells[:, 0] + _KEY_BIAS) << _KEY_SHIFT) | (cells[:, 1] + _KEY_BIAS)


def decode_keys(keys) -> np.ndarray:
    """Inverse of :func:`encode_cells`."""
    keys = np.asarray(keys, dtype=np.int64).reshape(-1)
    east = (keys >> _KEY_SHIFT) - _KEY_BIAS
    north = (keys & _KEY_MASK) - _KEY_BIAS
    return np.stack([east, north], axis=1)


# -- ids ---------------------------------------------------------------------


class PlanarId(NamedTuple):
    col: int
    row: int

    def __str__(self) -> str:
        return f"c:{self.col},r:{self.row}"


_COL_LETTERS = "ABCDEFGHJKLMNPQRSTUVWXYZ"  # 24, no I/O
_ROW_LETTERS = "ABCDEFGHJKLMNPQRSTUV"  # 20, no I/O
_BAND_LETTERS = "CDEFGHJKLMNPQRSTUVWX"  # UTM latitude bands, UPS excluded

_MGRS_RE = re.compile(r"^(\d{1,2})([A-Z])([A-Z])([A-Z])(\d*)$")


@dataclass(frozen=True, order=True)
class MgrsId:
    """An MGRS cell: GZD, 100 km square letters and easting/northing digits.

    ``easting`` and ``northing`` hold the integer value of each digit group
    and ``digits`` the number of digits per group, so that ``0012`` is kept
    distinct from ``12`` at a different precision.
    """

    gzd: str
    square: str
    easting: int
    northing: int
    digits: int

    def __post_init__(self):
        if not 1 <= self.digits <= 5:
            raise GridParseError(f"digit count per axis must be 1..5, got {self.digits}")
        limit = 10**self.digits
        if not (0 <= self.easting < limit and 0 <= self.northing < limit):
            raise GridParseError("easting/northing out of range for digit count")

    @property
    def zone(self) -> int:
        return int(self.gzd[:-1])

    @property
    def band(self) -> str:
        return self.gzd[-1]

    @property
    def precision(self) -> float:
        """Cell edge in meters."""
        return float(10 ** (5 - self.digits))

    def __str__(self) -> str:
        return format_mgrs(self)


GridId = Union[PlanarId, MgrsId]


def parse_mgrs(text: str) -> MgrsId:
    """Decode an MGRS string such as ``"10QCG12345678"``.

    Lowercase input is accepted; the canonical form is uppercase with no
    separators and no zero padding on the zone number.
    """
    m = _MGRS_RE.match(text.strip().upper())
    if m is None:
        raise GridParseError(f"malformed MGRS id: {text!r}")
    zone_s, band, col, row, digits = m.groups()
    zone = int(zone_s)
    if not 1 <= zone <= 60:
        raise GridParseError(f"zone number out of range: {zone}")
    if band not in _BAND_LETTERS:
        raise GridParseError(f"unsupported latitude band: {band!r}")
    if col not in _COL_LETTERS or row not in _ROW_LETTERS:
        raise GridParseError(f"invalid 100 km square letters: {col + row!r}")
    if col not in _zone_columns(zone):
        raise GridParseError(f"column letter {col!r} not used in zone {zone}")
    if len(digits) % 2 or not 2 <= len(digits) <= 10:
        raise GridParseError(f"expected an even number of 2..10 digits: {text!r}")
    n = len(digits) // 2
    return MgrsId(f"{zone}{band}", col + row, int(digits[:n]), int(digits[n:]), n)


def format_mgrs(mid: MgrsId) -> str:
    n = mid.digits
    return f"{mid.gzd}{mid.square}{mid.easting:0{n}d}{mid.northing:0{n}d}"


_PLANAR_RE = re.compile(r"^c:(-?\d+),r:(-?\d+)$")


def parse_planar(text: str) -> PlanarId:
    m = _PLANAR_RE.match(text.strip())
    if m is None:
        raise GridParseError(f"malformed planar id: {text!r}")
    return PlanarId(int(m.group(1)), int(m.group(2)))


def format_id(gid: GridId) -> str:
    if isinstance(gid, MgrsId):
        return format_mgrs(gid)
    if isinstance(gid, PlanarId):
        return str(gid)
    raise TypeError(f"not a grid id: {gid!r}")


def _zone_columns(zone: int) -> str:
    start = 8 * ((zone - 1) % 3)
    return _COL_LETTERS[start:start + 8]


# -- grid systems ------------------------------------------------------------


class Grid:
    """Common lattice machinery.

    Subclasses map ids to lattice cells ``(east, north)`` and back. Cell
    ``(0, 0)`` has its lower-left corner at the metric origin, so the center of
    lattice cell ``k`` is ``(k + 0.5) * cell_size``.
    """

    kind = "abstract"
    cell_size: float

    # lattice <-> id, implemented by subclasses
    def cell_of_id(self, gid) -> tuple[int, int]:
        raise NotImplementedError

    def id_of_cell(self, east: int, north: int):
        raise NotImplementedError

    def parse(self, text: str):
        raise NotImplementedError

    def check_cells(self, cells: np.ndarray) -> None:
        """Raise :class:`ExtentError` if any lattice cell is unsupported."""

    def in_extent(self, cells: np.ndarray) -> np.ndarray:
        return np.ones(len(cells), dtype=bool)

    # vectorised helpers used by the inference engine
    def centers(self, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.float64).reshape(-1, 2)
        return (cells + 0.5) * self.cell_size

    def cells_of_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        cells = np.floor(points / self.cell_size).astype(np.int64)
        self.check_cells(cells)
        return cells

    def cells_of_ids(self, ids: Sequence) -> np.ndarray:
        if not len(ids):
            return np.empty((0, 2), dtype=np.int64)
        return np.array([self.cell_of_id(g) for g in ids], dtype=np.int64)

    def ids_of_cells(self, cells) -> list:
        return [self.id_of_cell(int(e), int(n)) for e, n in np.asarray(cells).reshape(-1, 2)]


@dataclass(frozen=True)
class PlanarGrid(Grid):
    """Square lattice with cells ``[kD, (k+1)D)`` on both axes.

    ``origin`` is the world position of the lower-left corner of cell (0, 0).
    ``shape`` optionally bounds the grid to ``cols x rows`` cells; ``None``
    leaves it unbounded.
    """

    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    shape: tuple[int, int] | None = None

    kind = "planar"

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")

    def cell_of_id(self, gid) -> tuple[int, int]:
        if not isinstance(gid, PlanarId):
            if isinstance(gid, tuple) and len(gid) == 2:
                gid = PlanarId(*gid)
            else:
                raise GridParseError(f"not a planar id: {gid!r}")
        return int(gid.col), int(gid.row)

    def id_of_cell(self, east: int, north: int) -> PlanarId:
        if self.shape is not None:
            self.check_cells(np.array([[east, north]]))
        return PlanarId(int(east), int(north))

    def parse(self, text: str) -> PlanarId:
        return parse_planar(text)

    def in_extent(self, cells) -> np.ndarray:
        cells = np.asarray(cells).reshape(-1, 2)
        if self.shape is None:
            return np.ones(len(cells), dtype=bool)
        cols, rows = self.shape
        return (cells[:, 0] >= 0) & (cells[:, 0] < cols) & (cells[:, 1] >= 0) & (cells[:, 1] < rows)

    def check_cells(self, cells) -> None:
        if not np.all(self.in_extent(cells)):
            raise ExtentError(f"cell outside planar extent {self.shape}")

    def centers(self, cells) -> np.ndarray:
        return super().centers(cells) + np.asarray(self.origin, dtype=np.float64)

    def cells_of_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return super().cells_of_points(points - np.asarray(self.origin, dtype=np.float64))


@dataclass(frozen=True)
class MgrsGrid(Grid):
    """MGRS cells within one grid zone designator.

    The metric frame has its origin at the south-west corner of
    ``origin_square``. ``lettering`` selects the row-letter convention:
    ``"AA"`` (current datums) or ``"AL"`` (legacy datums, rows shifted by 10).
    Easting may span the zone's eight 100 km columns; leaving them would cross
    into another zone and is rejected. Northing is limited to ten 100 km
    squares either side of the origin square, which covers any single GZD.
    """

    gzd: str = "10Q"
    origin_square: str = "CG"
    cell_size: float = 1.0
    lettering: str = "AA"

    kind = "mgrs"

    def __post_init__(self):
        digits = 5 - round(math.log10(self.cell_size))
        if not 1 <= digits <= 5 or not math.isclose(10 ** (5 - digits), self.cell_size):
            raise ValueError("MGRS cell_size must be a power of ten between 1 and 10000 m")
        if self.lettering not in ("AA", "AL"):
            raise ValueError("lettering must be 'AA' or 'AL'")
        probe = parse_mgrs(f"{self.gzd}{self.origin_square}00")
        object.__setattr__(self, "gzd", probe.gzd)

    @property
    def digits(self) -> int:
        return 5 - round(math.log10(self.cell_size))

    @property
    def zone(self) -> int:
        return int(self.gzd[:-1])

    @property
    def _row_offset(self) -> int:
        off = 0 if self.zone % 2 else 5
        return off + (10 if self.lettering == "AL" else 0)

    def _square_index(self, square: str) -> tuple[int, int]:
        cols = _zone_columns(self.zone)
        if square[0] not in cols:
            raise GridParseError(f"column letter {square[0]!r} not used in zone {self.zone}")
        col = cols.index(square[0])
        row = (_ROW_LETTERS.index(square[1]) - self._row_offset) % 20
        return col, row

    @property
    def _origin_index(self) -> tuple[int, int]:
        return self._square_index(self.origin_square)

    def cell_of_id(self, gid) -> tuple[int, int]:
        if isinstance(gid, str):
            gid = parse_mgrs(gid)
        if not isinstance(gid, MgrsId):
            raise GridParseError(f"not an MGRS id: {gid!r}")
        if gid.gzd != self.gzd:
            raise ExtentError(f"id in zone {gid.gzd}, grid covers {self.gzd}")
        if gid.digits != self.digits:
            raise GridParseError(f"id has precision {gid.precision} m, grid uses {self.cell_size} m")
        col, row = self._square_index(gid.square)
        col0, row0 = self._origin_index
        per_square = 10**self.digits
        drow = (row - row0 + 10) % 20 - 10
        return (col - col0) * per_square + gid.easting, drow * per_square + gid.northing

    def id_of_cell(self, east: int, north: int) -> MgrsId:
        self.check_cells(np.array([[east, north]]))
        per_square = 10**self.digits
        col0, row0 = self._origin_index
        dcol, e = divmod(int(east), per_square)
        drow, n = divmod(int(north), per_square)
        col = col0 + dcol
        row = (row0 + drow + self._row_offset) % 20
        square = _zone_columns(self.zone)[col] + _ROW_LETTERS[row]
        return MgrsId(self.gzd, square, e, n, self.digits)

    def parse(self, text: str) -> MgrsId:
        return parse_mgrs(text)

    def in_extent(self, cells) -> np.ndarray:
        cells = np.asarray(cells).reshape(-1, 2)
        per_square = 10**self.digits
        col0, _ = self._origin_index
        col = col0 + np.floor_divide(cells[:, 0], per_square)
        drow = np.floor_divide(cells[:, 1], per_square)
        return (col >= 0) & (col < 8) & (drow >= -10) & (drow < 10)

    def check_cells(self, cells) -> None:
        if not np.all(self.in_extent(cells)):
            raise ExtentError(f"cell leaves grid zone {self.gzd}")


# -- scalar operations -------------------------------------------------------


def id_of(p, grid: Grid) -> GridId:
    """Cell containing point ``p`` (meters). Boundaries belong to the upper cell."""
    cell = grid.cells_of_points(p)[0]
    return grid.id_of_cell(*cell)


def center_of(gid: GridId, grid: Grid) -> np.ndarray:
    """Metric center of the cell ``gid``."""
    return grid.centers([grid.cell_of_id(gid)])[0]


def offset_id(gid: GridId, d_h: int, d_v: int, grid: Grid) -> GridId:
    """The cell ``d_h`` steps east and ``d_v`` steps north of ``gid``.

    The horizontal step is applied first, then the vertical one; each
    intermediate cell must stay in extent.
    """
    east, north = grid.cell_of_id(gid)
    mid = grid.id_of_cell(east + int(d_h), north)
    east, north = grid.cell_of_id(mid)
    return grid.id_of_cell(east, north + int(d_v))


def _components(gid: GridId) -> list[str]:
    if isinstance(gid, MgrsId):
        s = format_mgrs(gid)
        return [gid.gzd, gid.square, s[len(gid.gzd) + 2:]]
    if isinstance(gid, PlanarId):
        return [f"c:{gid.col},", f"r:{gid.row}"]
    raise TypeError(f"not a grid id: {gid!r}")


def common_prefix_strip(ids: Sequence[GridId]) -> tuple[str, list[str]]:
    """Split ids into the longest run of shared leading components and remainders.

    Components are compared whole (zone designator, square letters, digit
    block for MGRS; column, row for planar ids), so ``prefix + suffix`` always
    reproduces the canonical text of each id.
    """
    ids = list(ids)
    if not ids:
        return "", []
    kinds = {type(g) for g in ids}
    if len(kinds) > 1:
        raise TypeError("cannot strip a common prefix across grid systems")
    parts = [_components(g) for g in ids]
    shared = 0
    for column in zip(*parts):
        if any(c != column[0] for c in column):
            break
        shared += 1
    prefix = "".join(parts[0][:shared])
    return prefix, ["".join(p[shared:]) for p in parts]
