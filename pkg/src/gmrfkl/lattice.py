"""Toroidal 2D lattices, neighborhood geometry, and field containers.

A field lives on an ``H x W`` rectangular lattice with periodic (toroidal)
boundary conditions: row ``-1`` wraps to row ``H - 1`` and row ``H`` wraps to
row ``0``, and likewise for columns.  Interactions are pairwise and isotropic
over the second-order (Moore / king-move) neighborhood, i.e. the 8 sites
surrounding each site within a 3x3 window.

The local 3x3 window is always enumerated row-major::

    (-1,-1) (-1, 0) (-1,+1)
    ( 0,-1) ( 0, 0) ( 0,+1)
    (+1,-1) (+1, 0) (+1,+1)

so a patch has 9 positions and the center sits at index 4.  Neighbor-only
orderings drop the center and keep the remaining 8 offsets in the same
row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import InvalidParams

#: Row-major offsets of the full 3x3 window, center included.
WINDOW_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 0), (0, 1),
    (1, -1), (1, 0), (1, 1),
)

#: Index of the center site within :data:`WINDOW_OFFSETS`.
CENTER_INDEX: int = 4

#: Row-major offsets of the 8 neighbors (window minus the center).
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = tuple(
    off for i, off in enumerate(WINDOW_OFFSETS) if i != CENTER_INDEX
)

MIN_SIDE = 3  # below this the 3x3 windows self-overlap in a degenerate way


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Interaction neighborhood descriptor.

    Only the second-order (8-neighbor, king-move) system is implemented;
    the dataclass exists so call sites carry the neighborhood explicitly
    and so the neighbor count ``delta`` has one authoritative home.
    """

    order: str = "second"
    delta: int = 8

    def __post_init__(self) -> None:
        if self.order != "second" or self.delta != 8:
            raise InvalidParams(
                f"only the second-order 8-neighbor system is supported, "
                f"got order={self.order!r} delta={self.delta}"
            )

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        """Neighbor offsets in row-major window order (center excluded)."""
        return NEIGHBOR_OFFSETS

    @property
    def window_offsets(self) -> tuple[tuple[int, int], ...]:
        """Full 3x3 window offsets, center included at index 4."""
        return WINDOW_OFFSETS


#: Default neighborhood used throughout the package.
SECOND_ORDER = NeighborhoodSpec()


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def _check_grid(height: int, width: int) -> None:
    if not (isinstance(height, (int, np.integer)) and isinstance(width, (int, np.integer))):
        raise InvalidParams(f"height/width must be integers, got {height!r} x {width!r}")
    if height < MIN_SIDE or width < MIN_SIDE:
        raise InvalidParams(
            f"lattice must be at least {MIN_SIDE}x{MIN_SIDE}, got {height}x{width}"
        )


@dataclass(frozen=True)
class LatticeField:
    """A scalar-valued field on a toroidal lattice.

    Attributes:
        height: number of rows (>= 3).
        width: number of columns (>= 3).
        values: read-only float64 array of shape ``(height, width)``.
    """

    height: int
    width: int
    values: np.ndarray

    def __post_init__(self) -> None:
        _check_grid(self.height, self.width)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise InvalidParams(
                f"values shape {vals.shape} does not match {self.height}x{self.width}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParams("field values must be finite")
        object.__setattr__(self, "values", _as_readonly(vals))

    @classmethod
    def from_array(cls, values: np.ndarray) -> "LatticeField":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidParams(f"expected a 2D array, got shape {values.shape}")
        return cls(values.shape[0], values.shape[1], values)

    @property
    def dim(self) -> int:
        return 1

    @property
    def n_sites(self) -> int:
        return self.height * self.width

    def sites(self) -> Iterator[tuple[int, int]]:
        """Yield all ``(row, col)`` coordinates in row-major order."""
        for r in range(self.height):
            for c in range(self.width):
                yield r, c


@dataclass(frozen=True)
class MultiLatticeField:
    """A vector-valued (d-dimensional) field on a toroidal lattice.

    Attributes:
        height: number of rows (>= 3).
        width: number of columns (>= 3).
        dim: number of components per site (>= 1).
        values: read-only float64 array of shape ``(height, width, dim)``.
    """

    height: int
    width: int
    dim: int
    values: np.ndarray

    def __post_init__(self) -> None:
        _check_grid(self.height, self.width)
        if self.dim < 1:
            raise InvalidParams(f"dim must be >= 1, got {self.dim}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width, self.dim):
            raise InvalidParams(
                f"values shape {vals.shape} does not match "
                f"{self.height}x{self.width}x{self.dim}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParams("field values must be finite")
        object.__setattr__(self, "values", _as_readonly(vals))

    @classmethod
    def from_array(cls, values: np.ndarray) -> "MultiLatticeField":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3:
            raise InvalidParams(f"expected a 3D array, got shape {values.shape}")
        return cls(values.shape[0], values.shape[1], values.shape[2], values)

    @property
    def n_sites(self) -> int:
        return self.height * self.width

    def sites(self) -> Iterator[tuple[int, int]]:
        for r in range(self.height):
            for c in range(self.width):
                yield r, c


AnyField = Union[LatticeField, MultiLatticeField]


@dataclass(frozen=True)
class Patch:
    """The 3x3 window of values around one site, in row-major window order.

    ``entries`` has shape ``(9,)`` for scalar fields and ``(9, d)`` for
    d-dimensional fields; flattened in C order the layout is position-major
    (all d components of window position 0, then position 1, ...).  The
    center site always sits at ``entries[4]``.
    """

    entries: np.ndarray
    center_index: int = field(default=CENTER_INDEX)

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.shape[0] != len(WINDOW_OFFSETS):
            raise InvalidParams(f"a patch has 9 window positions, got {entries.shape}")
        object.__setattr__(self, "entries", _as_readonly(entries))
        object.__setattr__(self, "center_index", CENTER_INDEX)

    @property
    def center(self) -> np.ndarray:
        return self.entries[self.center_index]

    def neighbors(self) -> np.ndarray:
        """The 8 neighbor values (center removed), window order preserved."""
        keep = [i for i in range(len(WINDOW_OFFSETS)) if i != self.center_index]
        return self.entries[keep]

    def __len__(self) -> int:
        return self.entries.shape[0]


def neighbors(field: AnyField, row: int, col: int,
              spec: NeighborhoodSpec = SECOND_ORDER) -> np.ndarray:
    """Values of the 8 toroidal neighbors of site ``(row, col)``.

    Returned in row-major window order (see :data:`NEIGHBOR_OFFSETS`); shape
    ``(8,)`` for scalar fields, ``(8, d)`` for vector fields.

    Raises:
        IndexError: if ``(row, col)`` lies outside the lattice.  Negative
            indices are rejected rather than wrapped: wrapping is a property
            of the *neighborhood*, not of site addressing.
    """
    if not (0 <= row < field.height and 0 <= col < field.width):
        raise IndexError(
            f"site ({row}, {col}) outside {field.height}x{field.width} lattice"
        )
    rows = [(row + dr) % field.height for dr, dc in spec.offsets]
    cols = [(col + dc) % field.width for dr, dc in spec.offsets]
    return field.values[rows, cols].copy()


def window_values(field: AnyField, row: int, col: int,
                  spec: NeighborhoodSpec = SECOND_ORDER) -> np.ndarray:
    """Like :func:`neighbors` but for the full 9-position window."""
    if not (0 <= row < field.height and 0 <= col < field.width):
        raise IndexError(
            f"site ({row}, {col}) outside {field.height}x{field.width} lattice"
        )
    rows = [(row + dr) % field.height for dr, dc in spec.window_offsets]
    cols = [(col + dc) % field.width for dr, dc in spec.window_offsets]
    return field.values[rows, cols].copy()


def extract_patches(field: AnyField,
                    spec: NeighborhoodSpec = SECOND_ORDER) -> list[Patch]:
    """All n = H * W patches of ``field``, sites enumerated row-major.

    Each patch is the full 3x3 toroidal window around one site, so
    ``patches[k].center == field.values[k // W, k % W]`` for every k.
    """
    stacked = window_matrix(field, spec)
    if isinstance(field, MultiLatticeField):
        stacked = stacked.reshape(field.n_sites, len(WINDOW_OFFSETS), field.dim)
    return [Patch(entries=stacked[k]) for k in range(field.n_sites)]


def window_matrix(field: AnyField,
                  spec: NeighborhoodSpec = SECOND_ORDER) -> np.ndarray:
    """Dense matrix of all window values: one row per site (row-major).

    Shape ``(n, 9)`` for scalar fields and ``(n, 9 * d)`` for vector fields;
    column blocks follow row-major window order, and within a block the d
    components of that window position are contiguous.  Column ``4`` (or
    block 4) is the site itself.  Built with toroidal rolls, so the k-th
    column holds, for every site i, the value at ``i + offset_k`` (mod
    lattice).
    """
    vals = field.values
    cols = []
    for dr, dc in spec.window_offsets:
        # roll by -offset so entry [r, c] picks up vals[r + dr, c + dc]
        cols.append(np.roll(vals, shift=(-dr, -dc), axis=(0, 1)))
    if isinstance(field, MultiLatticeField):
        stacked = np.stack(cols, axis=2)  # (H, W, 9, d)
        return stacked.reshape(field.n_sites, len(WINDOW_OFFSETS) * field.dim)
    stacked = np.stack(cols, axis=2)  # (H, W, 9)
    return stacked.reshape(field.n_sites, len(WINDOW_OFFSETS))


# ---------------------------------------------------------------------------
# Field file format (GMRF1)
#
#   GMRF1 <height> <width> <dim>
#   <dim reals>        ... one line per site, H*W lines, sites row-major,
#   ...                    each value printed with 17 significant digits
#
# 17 significant digits round-trip any float64 exactly, so write/read is
# lossless and writing the same field twice yields byte-identical files.
# ---------------------------------------------------------------------------

FIELD_MAGIC = "GMRF1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(fieldobj: AnyField, path) -> None:
    """Serialize a field to ``path`` in the GMRF1 plain-text format."""
    dim = fieldobj.dim if isinstance(fieldobj, MultiLatticeField) else 1
    vals = fieldobj.values.reshape(fieldobj.n_sites, dim)
    lines = [f"{FIELD_MAGIC} {fieldobj.height} {fieldobj.width} {dim}"]
    for row in vals:
        lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path) -> AnyField:
    """Parse a GMRF1 file; returns a :class:`LatticeField` when dim == 1,
    otherwise a :class:`MultiLatticeField`.

    Raises:
        InvalidParams: on a bad magic tag, malformed header, wrong line
            count, or unparseable values.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise InvalidParams(f"{path}: empty field file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != FIELD_MAGIC:
        raise InvalidParams(f"{path}: expected '{FIELD_MAGIC} H W dim' header, "
                            f"got {lines[0]!r}")
    try:
        height, width, dim = int(header[1]), int(header[2]), int(header[3])
    except ValueError as exc:
        raise InvalidParams(f"{path}: non-integer header fields") from exc
    body = lines[1:]
    if len(body) != height * width:
        raise InvalidParams(
            f"{path}: expected {height * width} site lines, got {len(body)}"
        )
    try:
        vals = np.array([[float(tok) for tok in line.split()] for line in body])
    except ValueError as exc:
        raise InvalidParams(f"{path}: unparseable site value") from exc
    if vals.ndim != 2 or vals.shape[1] != dim:
        raise InvalidParams(f"{path}: expected {dim} values per site line")
    if dim == 1:
        return LatticeField(height, width, vals.reshape(height, width))
    return MultiLatticeField(height, width, dim, vals.reshape(height, width, dim))
