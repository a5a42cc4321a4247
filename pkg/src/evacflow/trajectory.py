"""Pedestrian paths x' = w(x), exit times and stalled starts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import PotentialSolution
from .errors import OutsideDomain, ValidationError
from .field import FieldSampler, RoutingField, extend_outside
from .geometry import INSIDE, Direction, Grid
from .kernels import impl as _impl

EXITED, STALLED, TIME_CAPPED = "EXITED", "STALLED", "TIME_CAPPED"
_OUTCOMES = {0: EXITED, 1: STALLED, 2: TIME_CAPPED}

STALL_WINDOW = 10


@dataclass(frozen=True, eq=False)
class Trajectory:
    start: tuple[float, float]
    samples: np.ndarray  # (m, 3): t, x, y
    outcome: str
    exit_time: float | None = None
    exit_face: tuple | None = None  # ((i, j), Direction)
    terminal_wnorm: float = 0.0

    @property
    def terminal_point(self) -> tuple[float, float]:
        return float(self.samples[-1, 1]), float(self.samples[-1, 2])

    @property
    def points(self) -> np.ndarray:
        return self.samples[:, 1:]


class PathTracer:
    """Integrator bound to one grid and routing field."""

    def __init__(self, field: RoutingField, g: Grid, dt_path: float | None = None,
                 t_cap: float | None = None, stall_tol: float = 1e-6,
                 stall_window: int = STALL_WINDOW, backend=None):
        self.g = g
        self.field = field
        self.dt_path = default_dt_path(g) if dt_path is None else float(dt_path)
        self.t_cap = default_t_cap(g) if t_cap is None else float(t_cap)
        self.stall_tol = float(stall_tol)
        self.stall_window = int(stall_window)
        problems = []
        if not self.dt_path > 0:
            problems.append(("DtPath", f"dt_path must be > 0, got {self.dt_path}"))
        if not self.t_cap >= 0:
            problems.append(("TCap", f"t_cap must be >= 0, got {self.t_cap}"))
        if not self.stall_tol > 0:
            problems.append(("StallTol", f"stall_tol must be > 0, got {self.stall_tol}"))
        if problems:
            raise ValidationError(violations=problems)
        ext = extend_outside(np.asarray(field.w), g)
        self.wx = np.ascontiguousarray(ext[..., 0])
        self.wy = np.ascontiguousarray(ext[..., 1])
        self.cls = np.ascontiguousarray(g.padded_class, dtype=np.int8)
        self.k = _impl if backend is None else backend
        self.n_steps = int(math.ceil(self.t_cap / self.dt_path)) if self.t_cap > 0 else 0

    def sample(self, x: float, y: float) -> tuple[float, float]:
        locate(x, y, self.g, closed=True)
        return self.k.sample(x, y, self.wx, self.wy, self.g.hx, self.g.hy, self.g.nx, self.g.ny)

    def integrate(self, x0: float, y0: float, store: bool = True) -> Trajectory:
        ci, cj = locate(x0, y0, self.g, closed=False)
        g = self.g
        samples, code, t_end, fi, fj, fd, wn = self.k.trace(
            float(x0), float(y0), ci, cj, self.wx, self.wy, self.cls, g.hx, g.hy, g.nx, g.ny,
            self.dt_path, self.n_steps, self.stall_tol, self.stall_window, store,
        )
        outcome = _OUTCOMES[code]
        exited = outcome == EXITED
        return Trajectory(
            start=(float(x0), float(y0)),
            samples=samples,
            outcome=outcome,
            exit_time=float(t_end) if exited else None,
            exit_face=((fi, fj), Direction(fd)) if exited else None,
            terminal_wnorm=float(wn),
        )

    def outcomes(self, starts: np.ndarray):
        """Outcome codes and end times for many starts (no samples kept)."""
        starts = np.ascontiguousarray(starts, dtype=float)
        cells = np.array([locate(x, y, self.g, closed=False) for x, y in starts], dtype=np.int64)
        cells = np.ascontiguousarray(cells.reshape(-1, 2))
        g = self.g
        return self.k.trace_many(
            starts, cells, self.wx, self.wy, self.cls, g.hx, g.hy, g.nx, g.ny,
            self.dt_path, self.n_steps, self.stall_tol, self.stall_window,
        )


def default_dt_path(g: Grid) -> float:
    return min(g.hx, g.hy) / 2.0


def default_t_cap(g: Grid) -> float:
    return 10.0 * (g.nx * g.hx + g.ny * g.hy)


def locate(x: float, y: float, g: Grid, closed: bool) -> tuple[int, int]:
    """INSIDE cell containing (x, y).

    With ``closed=False`` the point must lie in the open domain: points on
    a boundary face are rejected.  With ``closed=True`` any point of the
    closed domain is accepted.
    """
    i = int(math.floor(x / g.hx))
    j = int(math.floor(y / g.hy))
    cands = [(i, j)]
    if closed:
        cands += [(i - 1, j), (i, j - 1), (i - 1, j - 1)]
    for ci, cj in cands:
        if 0 <= ci < g.nx and 0 <= cj < g.ny and g.cell_class[cj, ci] == INSIDE:
            if closed:
                if ci * g.hx <= x <= (ci + 1) * g.hx and cj * g.hy <= y <= (cj + 1) * g.hy:
                    return ci, cj
                continue
            # on a cell edge shared with a non-INSIDE neighbour -> on the boundary
            if x == ci * g.hx and not _inside(g, ci - 1, cj):
                break
            if y == cj * g.hy and not _inside(g, ci, cj - 1):
                break
            return ci, cj
    raise OutsideDomain(f"point ({x}, {y}) is not inside the domain")


def _inside(g: Grid, i: int, j: int) -> bool:
    return 0 <= i < g.nx and 0 <= j < g.ny and g.cell_class[j, i] == INSIDE


def sample_field_at(p, field: RoutingField, g: Grid) -> tuple[float, float]:
    """Bilinear value of w at ``p``, constant extension outside the domain."""
    ext = extend_outside(np.asarray(field.w), g)
    locate(p[0], p[1], g, closed=True)
    return _impl.sample(
        float(p[0]), float(p[1]), np.ascontiguousarray(ext[..., 0]), np.ascontiguousarray(ext[..., 1]),
        g.hx, g.hy, g.nx, g.ny,
    )


def integrate_path(x0, field: RoutingField, g: Grid, dt_path: float | None = None,
                   t_cap: float | None = None, stall_tol: float = 1e-6) -> Trajectory:
    return PathTracer(field, g, dt_path, t_cap, stall_tol).integrate(x0[0], x0[1])


@dataclass(frozen=True, eq=False)
class EvacuationMap:
    i: np.ndarray
    j: np.ndarray
    x: np.ndarray
    y: np.ndarray
    outcome: np.ndarray  # str
    T: np.ndarray  # exit time, NaN unless EXITED
    cell_area: float

    @property
    def exited_fraction(self) -> float:
        return float(np.mean(self.outcome == EXITED)) if self.outcome.size else 0.0

    @property
    def stalled_fraction(self) -> float:
        """Area fraction of stalled starts (each start stands for its sampling cell)."""
        return float(np.mean(self.outcome == STALLED)) if self.outcome.size else 0.0

    @property
    def stalled(self) -> list[tuple[int, int]]:
        m = self.outcome == STALLED
        return list(zip(self.i[m].tolist(), self.j[m].tolist()))

    @property
    def max_T(self) -> float:
        t = self.T[self.outcome == EXITED]
        return float(t.max()) if t.size else math.nan

    @property
    def mean_T(self) -> float:
        t = self.T[self.outcome == EXITED]
        return float(t.mean()) if t.size else math.nan

    def summary(self) -> dict:
        return {
            "starts": int(self.outcome.size),
            "exited_fraction": self.exited_fraction,
            "stalled_fraction": self.stalled_fraction,
            "time_capped": int(np.sum(self.outcome == TIME_CAPPED)),
            "max_T": self.max_T,
            "mean_T": self.mean_T,
        }


def evacuation_map(g: Grid, field: RoutingField, sol: PotentialSolution | None = None,
                   stride: int = 1, dt_path: float | None = None, t_cap: float | None = None,
                   stall_tol: float = 1e-6, tracer: PathTracer | None = None) -> EvacuationMap:
    """Trace one path from every ``stride``-th cell center.

    ``sol`` is not needed for the integration itself; it is accepted so
    callers can pass the full solved state.
    """
    tracer = tracer or PathTracer(field, g, dt_path, t_cap, stall_tol)
    cells = [(i, j) for i, j in g.inside_cells() if i % stride == 0 and j % stride == 0]
    ii = np.array([c[0] for c in cells], dtype=np.int64)
    jj = np.array([c[1] for c in cells], dtype=np.int64)
    xs = (ii + 0.5) * g.hx
    ys = (jj + 0.5) * g.hy
    codes, ts = tracer.outcomes(np.column_stack([xs, ys]))
    outcome = np.array([_OUTCOMES[int(c)] for c in codes], dtype=object)
    T = np.where(codes == 0, ts, np.nan)
    return EvacuationMap(ii, jj, xs, ys, outcome, T, g.cell_area * stride * stride)


def phi_along(tr: Trajectory, sol: PotentialSolution, g: Grid) -> np.ndarray:
    sampler = FieldSampler(np.asarray(sol.phi), g)
    return np.array([float(sampler(x, y)) for x, y in tr.points])


def lyapunov_audit(tr: Trajectory, sol: PotentialSolution, g: Grid) -> float:
    """Largest increase of the (bilinearly interpolated) potential between samples."""
    phi = phi_along(tr, sol, g)
    if phi.size < 2:
        return 0.0
    return float(np.max(np.diff(phi)))


def tol_lyap(dt_path: float, g: Grid, c: float = 1.0) -> float:
    h = max(g.hx, g.hy)
    return c * (dt_path**2 + h**2)
