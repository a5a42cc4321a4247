"""Crowd density evolution: d_t rho + div(rho v(rho) w) = 0.

First-order unsplit finite volumes with Rusanov fluxes.  Exit faces see
a ghost density of 0 (outflow allowed, no inflow of mass from outside);
wall faces carry exactly zero flux.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels_py
from .errors import DegenerateField, DomainError, RangeViolation, ValidationError
from .field import RoutingField
from .geometry import INSIDE, OUTSIDE_EXIT, Grid
from .kernels import impl as _impl

LINEAR = "linear"
CUSTOM = "custom"

# Round-off allowance for the range check, relative to R_max.
RANGE_TOL = 1e-12


@dataclass(frozen=True)
class SpeedLaw:
    """Speed-density law.  ``custom`` laws interpolate ``table`` linearly."""

    kind: str = LINEAR
    r_max: float = 1.0
    v_max: float = 1.0
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValidationError(violations=problems)

    def violations(self) -> list[tuple[str, str]]:
        out = []
        if self.kind not in (LINEAR, CUSTOM):
            return [("SpeedLawKind", f"unknown speed law {self.kind!r}")]
        if not self.r_max > 0:
            out.append(("RMaxPositive", f"r_max must be > 0, got {self.r_max}"))
        if not self.v_max > 0:
            out.append(("VMaxPositive", f"v_max must be > 0, got {self.v_max}"))
        if self.kind == CUSTOM:
            t = self.table
            if not t or len(t) < 2:
                return out + [("SpeedTable", "custom law needs at least two (rho, v) points")]
            r = [p[0] for p in t]
            v = [p[1] for p in t]
            if any(b <= a for a, b in zip(r, r[1:])):
                out.append(("SpeedTable", "table densities must be strictly increasing"))
            if r[0] != 0.0 or r[-1] != self.r_max:
                out.append(("SpeedTable", "table must span exactly [0, r_max]"))
            if any(b > a for a, b in zip(v, v[1:])):
                out.append(("SpeedMonotone", "v must be weakly decreasing"))
            if v[0] != self.v_max or v[-1] != 0.0:
                out.append(("SpeedEndpoints", "need v(0) = v_max and v(r_max) = 0"))
        return out

    def kernel_args(self):
        if self.kind == LINEAR:
            nodes = np.array([0.0, self.r_max])
            vals = np.array([self.v_max, 0.0])
            return _kernels_py.LAW_LINEAR, self.r_max, self.v_max, nodes, vals, np.diff(vals) / np.diff(nodes)
        nodes = np.array([p[0] for p in self.table], dtype=float)
        vals = np.array([p[1] for p in self.table], dtype=float)
        return _kernels_py.LAW_TABLE, self.r_max, self.v_max, nodes, vals, np.diff(vals) / np.diff(nodes)

    def v(self, rho):
        kind, r_max, v_max, nodes, vals, slopes = self.kernel_args()
        rho = np.asarray(rho, dtype=float)
        if kind == _kernels_py.LAW_LINEAR:
            return v_max * (1.0 - rho / r_max)
        return np.interp(rho, nodes, vals)

    def q(self, rho):
        return _kernels_py.law_q(rho, *self.kernel_args())

    def dq(self, rho):
        return _kernels_py.law_dq(rho, *self.kernel_args())

    def max_abs_dq(self, a=0.0, b=None):
        """max |q'| over [a, b] (default: the whole range [0, r_max])."""
        b = self.r_max if b is None else b
        return float(_kernels_py.law_max_abs_dq(a, b, *self.kernel_args()))


def flux_q(rho, law: SpeedLaw):
    """q(rho) = rho * v(rho)."""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0) or np.any(r > law.r_max):
        raise DomainError(f"density outside [0, {law.r_max}]: {rho}")
    out = law.q(r)
    return float(out) if out.ndim == 0 else out


def numerical_face_flux(rho_l, rho_r, s, law: SpeedLaw):
    """Local Lax-Friedrichs flux across a face with normal speed ``s`` (left to right)."""
    out = _kernels_py.rusanov(
        np.asarray(rho_l, dtype=float), np.asarray(rho_r, dtype=float), np.asarray(s, dtype=float),
        *law.kernel_args(),
    )
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray  # (ny, nx), zero outside the domain
    t: float = 0.0


def uniform_state(g: Grid, value: float, law: SpeedLaw | None = None, t: float = 0.0) -> DensityState:
    if law is not None and not 0.0 <= value <= law.r_max:
        raise ValidationError(violations=[("RhoOutOfRange", f"rho0 = {value} outside [0, {law.r_max}]")])
    return DensityState(np.where(g.inside, float(value), 0.0), t)


@dataclass(frozen=True, eq=False)
class FaceSpeeds:
    """Normal speeds on every x-face (ny, nx + 1) and y-face (ny + 1, nx).

    ``exit_x``/``exit_y`` are +1 where the face is an exit and positive
    flux leaves the domain, -1 where negative flux leaves, 0 elsewhere.
    """

    sx: np.ndarray
    sy: np.ndarray
    exit_x: np.ndarray
    exit_y: np.ndarray


def face_speeds(field_: RoutingField, g: Grid, seal_exits: bool = False) -> FaceSpeeds:
    w = np.asarray(field_.w)
    pc = g.padded_class
    ny, nx = g.ny, g.nx
    sx = np.zeros((ny, nx + 1))
    sy = np.zeros((ny + 1, nx))
    ex = np.zeros((ny, nx + 1))
    ey = np.zeros((ny + 1, nx))
    wpad = np.zeros((ny + 2, nx + 2, 2))
    wpad[1:-1, 1:-1] = w

    # x-faces: face k in row j separates padded columns k and k + 1
    left = pc[1:-1, :-1]
    right = pc[1:-1, 1:]
    wl = wpad[1:-1, :-1, 0]
    wr = wpad[1:-1, 1:, 0]
    interior = (left == INSIDE) & (right == INSIDE)
    out_r = (left == INSIDE) & (right == OUTSIDE_EXIT)
    out_l = (left == OUTSIDE_EXIT) & (right == INSIDE)
    sx[interior] = 0.5 * (wl[interior] + wr[interior])
    if not seal_exits:
        sx[out_r] = wl[out_r]
        sx[out_l] = wr[out_l]
    ex[out_r] = 1.0
    ex[out_l] = -1.0

    low = pc[:-1, 1:-1]
    up = pc[1:, 1:-1]
    wd = wpad[:-1, 1:-1, 1]
    wu = wpad[1:, 1:-1, 1]
    interior = (low == INSIDE) & (up == INSIDE)
    out_u = (low == INSIDE) & (up == OUTSIDE_EXIT)
    out_d = (low == OUTSIDE_EXIT) & (up == INSIDE)
    sy[interior] = 0.5 * (wd[interior] + wu[interior])
    if not seal_exits:
        sy[out_u] = wd[out_u]
        sy[out_d] = wu[out_d]
    ey[out_u] = 1.0
    ey[out_d] = -1.0
    for a in (sx, sy, ex, ey):
        a.setflags(write=False)
    return FaceSpeeds(sx, sy, ex, ey)


def cfl_timestep(
    state: DensityState | None,
    field_: RoutingField,
    law: SpeedLaw,
    cfl: float,
    g: Grid,
    remaining: float | None = None,
) -> float:
    """dt = cfl * min(hx, hy) / (2 L) with L = max|q'| * max|w|.

    ``state`` is accepted for interface symmetry; the bound uses the whole
    density range, so dt does not depend on it.
    """
    if not 0.0 < cfl < 1.0:
        raise ValidationError(violations=[("CflRange", f"cfl must lie in (0, 1), got {cfl}")])
    lq = law.max_abs_dq() * field_.max_norm
    if lq == 0.0:
        raise DegenerateField("routing field vanishes identically; no CFL bound")
    dt = cfl * min(g.hx, g.hy) / (2.0 * lq)
    if remaining is not None and remaining < dt:
        dt = remaining
    return dt


def _check_range(rho: np.ndarray, law: SpeedLaw, t: float):
    tol = RANGE_TOL * law.r_max
    lo = float(rho.min())
    hi = float(rho.max())
    if lo < -tol or hi > law.r_max + tol:
        raise RangeViolation(f"density left [0, {law.r_max}] at t = {t:g}: min {lo:.3e}, max {hi:.6g}")


def _advance(rho, speeds: FaceSpeeds, law_args, dt, g: Grid):
    new, fx, fy = _impl.fv_step(
        np.ascontiguousarray(rho), speeds.sx, speeds.sy, dt, g.hx, g.hy, *law_args
    )
    # outflow lands in the exit cells; they are ghosts, not storage
    new[~g.inside] = 0.0
    rate = float(np.sum(fx * speeds.exit_x)) * g.hy + float(np.sum(fy * speeds.exit_y)) * g.hx
    return new, rate


def step(
    state: DensityState,
    field_: RoutingField,
    law: SpeedLaw,
    dt: float,
    g: Grid,
    speeds: FaceSpeeds | None = None,
    seal_exits: bool = False,
    check: bool = True,
) -> DensityState:
    if speeds is None:
        speeds = face_speeds(field_, g, seal_exits)
    new, _ = _advance(state.rho, speeds, law.kernel_args(), dt, g)
    if check:
        _check_range(new, law, state.t + dt)
    return DensityState(new, state.t + dt)


def exit_outflow_rate(state: DensityState, speeds: FaceSpeeds, law: SpeedLaw, g: Grid) -> float:
    """Instantaneous outflow sum(F * face length) over exit faces."""
    _, rate = _advance(state.rho, speeds, law.kernel_args(), 0.0, g)
    return rate


def discrete_tv(rho: np.ndarray, g: Grid) -> float:
    """Sum over interior faces of |jump| times face length."""
    ins = g.inside
    jx = np.abs(np.diff(rho, axis=1))[ins[:, :-1] & ins[:, 1:]]
    jy = np.abs(np.diff(rho, axis=0))[ins[:-1, :] & ins[1:, :]]
    return float(jx.sum() * g.hy + jy.sum() * g.hx)


def mass(rho: np.ndarray, g: Grid) -> float:
    return float(np.sum(rho)) * g.cell_area


@dataclass
class EvolutionReport:
    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    outflow: list = field(default_factory=list)
    tv: list = field(default_factory=list)
    rho_max: list = field(default_factory=list)
    evacuation_time: float | None = None  # None: not reached
    final: DensityState | None = None
    n_steps: int = 0
    dts: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    initial_mass: float = 0.0

    def record(self, t, rho, outflow, g):
        self.t.append(t)
        self.mass.append(mass(rho, g))
        self.outflow.append(outflow)
        self.tv.append(discrete_tv(rho, g))
        self.rho_max.append(float(rho.max()))

    def rows(self):
        return list(zip(self.t, self.mass, self.outflow, self.tv, self.rho_max))

    @property
    def conservation_defect(self) -> float:
        """max |mass + outflow - mass(0)| / mass(0) over the recorded series."""
        if self.initial_mass == 0.0:
            return 0.0
        m = np.asarray(self.mass) + np.asarray(self.outflow)
        return float(np.max(np.abs(m - self.initial_mass)) / self.initial_mass)


def evolve(
    rho0: DensityState,
    field_: RoutingField,
    law: SpeedLaw,
    g: Grid,
    t_end: float,
    mass_threshold: float = 1e-3,
    cfl: float = 0.4,
    output_times: Sequence[float] = (),
    record_steps: bool = False,
    keep_snapshots: bool = False,
    seal_exits: bool = False,
    stop_at_evacuation: bool = True,
    max_steps: int | None = None,
) -> EvolutionReport:
    """March from ``rho0.t`` to ``t_end`` with CFL-limited steps.

    Steps are shortened to land exactly on every output instant, so a run
    split at an output instant reproduces the unsplit run bit for bit.
    """
    if not t_end > rho0.t:
        raise ValidationError(violations=[("TEnd", f"t_end must exceed the start time {rho0.t}")])
    rho = np.where(g.inside, np.asarray(rho0.rho, dtype=float), 0.0)
    _check_range(rho, law, rho0.t)
    speeds = face_speeds(field_, g, seal_exits)
    law_args = law.kernel_args()
    dt_cfl = cfl_timestep(rho0, field_, law, cfl, g)
    targets = sorted({float(s) for s in output_times if rho0.t < s < t_end} | {float(t_end)})

    rep = EvolutionReport(initial_mass=mass(rho, g))
    t = float(rho0.t)
    outflow = 0.0
    rep.record(t, rho, outflow, g)
    if keep_snapshots:
        rep.snapshots[t] = rho.copy()
    threshold = mass_threshold * rep.initial_mass
    done = stop_at_evacuation and rep.initial_mass <= threshold
    if rep.initial_mass <= threshold:
        rep.evacuation_time = t
    for target in targets:
        if done:
            break
        while t < target:
            if target - t <= dt_cfl:
                dt = target - t
                t_new = target
            else:
                dt = dt_cfl
                t_new = t + dt
            rho, rate = _advance(rho, speeds, law_args, dt, g)
            _check_range(rho, law, t_new)
            outflow += dt * rate
            t = t_new
            rep.n_steps += 1
            rep.dts.append(dt)
            if rep.evacuation_time is None and mass(rho, g) <= threshold:
                rep.evacuation_time = t
                done = stop_at_evacuation
            if max_steps is not None and rep.n_steps >= max_steps:
                done = True
            if done:
                break
            if record_steps and t != target:
                rep.record(t, rho, outflow, g)
        if rep.t[-1] != t:
            rep.record(t, rho, outflow, g)
        if keep_snapshots and t == target:
            rep.snapshots[t] = rho.copy()
    rep.final = DensityState(rho, t)
    return rep


def l1_distance(a: np.ndarray, b: np.ndarray, g: Grid) -> float:
    return float(np.sum(np.abs(a - b))) * g.cell_area


def time_lipschitz_ratio(snapshots: dict, g: Grid) -> float:
    """max over snapshot pairs of ||rho(t) - rho(s)||_1 / |t - s|."""
    ts = sorted(snapshots)
    best = 0.0
    for a in range(len(ts)):
        for b in range(a + 1, len(ts)):
            dt = ts[b] - ts[a]
            if dt > 0:
                best = max(best, l1_distance(snapshots[ts[b]], snapshots[ts[a]], g) / dt)
    return best

