"""Cartesian domain: cell/face classification and boundary sets.

Masks are lists of strings, row 0 on top.  Internally every per-cell
array is indexed ``[j, i]`` with ``j`` counting rows from the bottom, so
cell ``(i, j)`` has its center at ``((i + 0.5) * hx, (j + 0.5) * hy)``.
The mask is surrounded by an implicit ring of wall cells.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import (
    AdjacentExitRuns,
    DanglingExitCell,
    DisconnectedDomain,
    EmptyDomain,
    GeometryError,
    NoExit,
    ValidationError,
)

INSIDE, OUTSIDE_WALL, OUTSIDE_EXIT = 0, 1, 2
INTERIOR, WALL, EXIT = 0, 1, 2
NO_FACE = -1

_CHAR_CLASS = {".": INSIDE, "#": OUTSIDE_WALL, "E": OUTSIDE_EXIT}


class Direction(enum.IntEnum):
    RIGHT = 0
    LEFT = 1
    UP = 2
    DOWN = 3

    @property
    def normal(self) -> tuple[int, int]:
        return _NORMALS[self]

    @property
    def offset(self) -> tuple[int, int]:
        """(di, dj) of the neighbor across this face."""
        return _NORMALS[self]


_NORMALS = {
    Direction.RIGHT: (1, 0),
    Direction.LEFT: (-1, 0),
    Direction.UP: (0, 1),
    Direction.DOWN: (0, -1),
}


class CornerKind(enum.Enum):
    DOORJAMB = "DOORJAMB"
    WALL_CORNER = "WALL_CORNER"


@dataclass(frozen=True, eq=False)
class Grid:
    nx: int
    ny: int
    hx: float
    hy: float
    cell_class: np.ndarray  # (ny, nx) int8
    face_class: np.ndarray  # (ny, nx, 4) int8, NO_FACE on non-INSIDE cells

    @cached_property
    def inside(self) -> np.ndarray:
        return self.cell_class == INSIDE

    @cached_property
    def padded_class(self) -> np.ndarray:
        """Cell classes with the implicit wall ring, shape (ny + 2, nx + 2)."""
        p = np.full((self.ny + 2, self.nx + 2), OUTSIDE_WALL, dtype=np.int8)
        p[1:-1, 1:-1] = self.cell_class
        return p

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.n_inside * self.hx * self.hy

    @cached_property
    def index(self) -> np.ndarray:
        """Linear INSIDE-cell index per cell (row-major by (j, i)); -1 elsewhere."""
        idx = np.full((self.ny, self.nx), -1, dtype=np.int64)
        idx[self.inside] = np.arange(self.n_inside)
        return idx

    @cached_property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def face_length(self, d: Direction) -> float:
        return self.hy if d in (Direction.RIGHT, Direction.LEFT) else self.hx

    def spacing(self, d: Direction) -> float:
        return self.hx if d in (Direction.RIGHT, Direction.LEFT) else self.hy

    def inside_cells(self):
        """Iterate (i, j) over INSIDE cells in row-major (j, i) order."""
        js, is_ = np.nonzero(self.inside)
        return zip(is_.tolist(), js.tolist())

    @cached_property
    def boundary(self) -> BoundarySets:
        return boundary_sets(self)


@dataclass(frozen=True)
class BoundarySets:
    wall_faces: list  # [((i, j), Direction)]
    exit_faces: list
    corner_vertices: list  # [((x, y), CornerKind)]


def parse_mask(mask) -> np.ndarray:
    """Turn mask rows into a (ny, nx) class array indexed [j, i] (j from bottom)."""
    if isinstance(mask, str):
        rows = [r for r in mask.splitlines() if r.strip()]
    else:
        rows = list(mask)
    if not rows:
        raise EmptyDomain("mask has no rows")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise ValidationError(
                f"mask row {k} has length {len(r)}, expected {width}",
                [("MaskShape", f"mask row {k} has length {len(r)}, expected {width}")],
            )
        bad = set(r) - set(_CHAR_CLASS)
        if bad:
            raise ValidationError(
                violations=[("MaskCharacter", f"mask row {k} has invalid characters {sorted(bad)}")]
            )
    arr = np.array([[_CHAR_CLASS[c] for c in r] for r in rows], dtype=np.int8)
    return arr[::-1].copy()


def _classify_faces(cell_class: np.ndarray) -> np.ndarray:
    ny, nx = cell_class.shape
    padded = np.full((ny + 2, nx + 2), OUTSIDE_WALL, dtype=np.int8)
    padded[1:-1, 1:-1] = cell_class
    face = np.full((ny, nx, 4), NO_FACE, dtype=np.int8)
    inside = cell_class == INSIDE
    to_face = {INSIDE: INTERIOR, OUTSIDE_WALL: WALL, OUTSIDE_EXIT: EXIT}
    for d in Direction:
        di, dj = d.offset
        nb = padded[1 + dj : ny + 1 + dj, 1 + di : nx + 1 + di]
        fc = np.select(
            [nb == INSIDE, nb == OUTSIDE_WALL, nb == OUTSIDE_EXIT],
            [to_face[INSIDE], to_face[OUTSIDE_WALL], to_face[OUTSIDE_EXIT]],
        ).astype(np.int8)
        face[..., d] = np.where(inside, fc, NO_FACE)
    return face


def _vertex_edges(padded: np.ndarray, vi: int, vj: int):
    """Boundary edges incident to grid vertex (vi, vj) as (axis, outside_class).

    ``padded`` is the ringed class array, so cell (i, j) sits at
    padded[j + 1, i + 1].
    """

    def c(i, j):
        return padded[j + 1, i + 1]

    edges = []
    # vertical edges (faces normal to x) above and below the vertex
    for a, b in (((vi - 1, vj), (vi, vj)), ((vi - 1, vj - 1), (vi, vj - 1))):
        ca, cb = c(*a), c(*b)
        if (ca == INSIDE) != (cb == INSIDE):
            edges.append(("v", cb if ca == INSIDE else ca))
    # horizontal edges left and right of the vertex
    for a, b in (((vi - 1, vj - 1), (vi - 1, vj)), ((vi, vj - 1), (vi, vj))):
        ca, cb = c(*a), c(*b)
        if (ca == INSIDE) != (cb == INSIDE):
            edges.append(("h", cb if ca == INSIDE else ca))
    return edges


def _classify_vertex(edges):
    """Return a CornerKind, None for a smooth boundary point, or 'EE' for an exit-only corner."""
    if len(edges) < 2:
        return None
    axes = {e[0] for e in edges}
    kinds = {e[1] for e in edges}
    if len(edges) == 2 and len(axes) == 1:
        if len(kinds) == 1:
            return None
        return CornerKind.DOORJAMB
    if kinds == {OUTSIDE_WALL}:
        return CornerKind.WALL_CORNER
    if kinds == {OUTSIDE_EXIT}:
        return "EE"
    return CornerKind.DOORJAMB


def mask_violations(cell_class: np.ndarray) -> list[GeometryError]:
    """All geometry rule violations of a class array (empty list if valid)."""
    inside = cell_class == INSIDE
    if not inside.any():
        return [EmptyDomain("mask contains no '.' cell")]
    out: list[GeometryError] = []
    _, ncomp = ndimage.label(inside)
    if ncomp > 1:
        out.append(DisconnectedDomain(f"INSIDE cells form {ncomp} 4-connected components"))
    ny, nx = cell_class.shape
    exits = cell_class == OUTSIDE_EXIT
    touching = ndimage.binary_dilation(inside, structure=ndimage.generate_binary_structure(2, 1))
    dangling = exits & ~touching
    if dangling.any():
        js, is_ = np.nonzero(dangling)
        cells = ", ".join(f"({i},{j})" for i, j in zip(is_.tolist(), js.tolist()))
        out.append(DanglingExitCell(f"exit cells share no face with the domain: {cells}"))
    face = _classify_faces(cell_class)
    if not (face == EXIT).any():
        out.append(NoExit("no exit face: at least one 'E' cell must share a face with a '.' cell"))
    padded = np.full((ny + 2, nx + 2), OUTSIDE_WALL, dtype=np.int8)
    padded[1:-1, 1:-1] = cell_class
    bad = []
    for vj in range(ny + 1):
        for vi in range(nx + 1):
            if _classify_vertex(_vertex_edges(padded, vi, vj)) == "EE":
                bad.append((vi, vj))
    if bad:
        out.append(
            AdjacentExitRuns(
                "exit runs meet at a corner with no wall between, at vertices "
                + ", ".join(f"({vi},{vj})" for vi, vj in bad)
            )
        )
    return out


def build_grid(mask, hx: float, hy: float) -> Grid:
    """Build and validate a Grid from an ASCII mask ('.', '#', 'E')."""
    if not (hx > 0 and hy > 0):
        raise ValidationError(violations=[("CellSize", f"hx, hy must be > 0, got {hx}, {hy}")])
    cell_class = parse_mask(mask)
    problems = mask_violations(cell_class)
    if problems:
        raise problems[0]
    ny, nx = cell_class.shape
    face = _classify_faces(cell_class)
    cell_class.setflags(write=False)
    face.setflags(write=False)
    return Grid(nx=nx, ny=ny, hx=float(hx), hy=float(hy), cell_class=cell_class, face_class=face)


def boundary_sets(g: Grid) -> BoundarySets:
    wall, exit_ = [], []
    for i, j in g.inside_cells():
        for d in Direction:
            fc = g.face_class[j, i, d]
            if fc == WALL:
                wall.append(((i, j), d))
            elif fc == EXIT:
                exit_.append(((i, j), d))
    corners = []
    padded = g.padded_class
    for vj in range(g.ny + 1):
        for vi in range(g.nx + 1):
            kind = _classify_vertex(_vertex_edges(padded, vi, vj))
            if isinstance(kind, CornerKind):
                corners.append(((vi * g.hx, vj * g.hy), kind))
    return BoundarySets(wall_faces=wall, exit_faces=exit_, corner_vertices=corners)


def rotate_mask(mask) -> list[str]:
    """Rotate a mask picture 90 degrees counter-clockwise."""
    rows = [r for r in mask.splitlines() if r.strip()] if isinstance(mask, str) else list(mask)
    w = len(rows[0])
    return ["".join(r[w - 1 - k] for r in rows) for k in range(w)]
