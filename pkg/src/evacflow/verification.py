"""Oracle suite: analytic solutions, symmetry, accounting and refinement checks.

``run_oracles`` executes named cases and returns a report; every module
invariant listed in ``INVARIANTS`` must be certified by at least one case
(see ``coverage_gaps``).
"""

from __future__ import annotations

import csv
import io
import math
import tempfile
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .elliptic import EllipticParams, critical_points, exit_flux_report, solve_u
from .errors import EvacflowError
from .field import RoutingField, build_routing_field, regularized_normalize
from .geometry import EXIT, WALL, build_grid, rotate_mask
from .hyperbolic import (
    CUSTOM,
    DensityState,
    SpeedLaw,
    cfl_timestep,
    discrete_tv,
    evolve,
    face_speeds,
    step,
    time_lipschitz_ratio,
    uniform_state,
)
from .library import BUILTINS, builtin
from .scenario import Scenario, emit_scenario, parse_scenario
from .trajectory import PathTracer, evacuation_map, lyapunov_audit, tol_lyap

ANALYTIC_STRIP = "ANALYTIC_STRIP"
SYMMETRY = "SYMMETRY"
CONSERVATION = "CONSERVATION"
REFINEMENT = "REFINEMENT"
BOUND_E3 = "BOUND_E3"
LYAPUNOV = "LYAPUNOV"
MONOTONE_PAIR = "MONOTONE_PAIR"
KINDS = (ANALYTIC_STRIP, SYMMETRY, CONSERVATION, REFINEMENT, BOUND_E3, LYAPUNOV, MONOTONE_PAIR)

INVARIANTS = {
    "geometry.partition": "boundary faces split into wall and exit faces",
    "geometry.rotation": "build_grid commutes with 90 degree rotation",
    "geometry.four_faces": "every INSIDE cell has four classified faces",
    "elliptic.max_principle": "varpi <= u <= 1, u < 1 off exit-adjacent cells",
    "elliptic.exit_positivity": "-grad(phi).nu > 0 on every exit face",
    "elliptic.flux_bounds": "total exit flux within the two-sided bound (5% slack)",
    "elliptic.convergence_order": "second-order error decay on the strip",
    "elliptic.transform": "exp(-phi/delta) reproduces u",
    "elliptic.mirror_symmetry": "mirror-symmetric plans give mirror-symmetric u",
    "field.lipschitz": "|N(a) - N(b)| <= |a - b| / theta",
    "field.norm_below_one": "|N(x)| < 1",
    "field.rotation": "N(Rx) = R N(x)",
    "field.alignment": "N(x).x >= 0, zero iff x = 0",
    "hyperbolic.linf_stability": "0 <= rho <= R_max for all steps",
    "hyperbolic.conservation": "mass + cumulative outflow is constant",
    "hyperbolic.wall_impermeable": "sealed exits conserve mass",
    "hyperbolic.monotonicity": "ordered pairs stay ordered under one step",
    "hyperbolic.l1_lipschitz": "L1 time-Lipschitz ratio bounded, stable under sampling",
    "hyperbolic.tv_bounded": "TV stays bounded under refinement",
    "hyperbolic.refinement": "L1 self-convergence with ratio >= 1.3",
    "hyperbolic.semigroup": "split evolution equals unsplit evolution bit for bit",
    "trajectory.non_crossing": "suffix of a path matches the path from its sample",
    "trajectory.exit_time": "exit time converges as dt_path is halved",
    "trajectory.determinism": "identical inputs give identical trajectories",
    "trajectory.speed_bound": "sample spacing <= dt_path",
    "trajectory.lyapunov": "phi non-increasing along paths",
    "trajectory.stall_set": "stalled starts form a shrinking set",
    "trajectory.critical_signature": "Hessian trace equals u/delta^2 at critical cells",
    "cli.round_trip": "parse(emit(s)) == s",
    "cli.reproducibility": "identical scenario gives byte-identical CSVs",
    "cli.stage_isolation": "running field twice gives identical outputs",
}


@dataclass
class CaseResult:
    name: str
    kind: str
    certifies: tuple
    passed: bool
    measured: str
    expected: str
    detail: str = ""
    seconds: float = 0.0


@dataclass(frozen=True)
class OracleCase:
    name: str
    kind: str
    certifies: tuple
    tolerance: float
    run: Callable = field(repr=False, compare=False)


@dataclass
class OracleReport:
    results: list
    seed: int
    gaps: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self) -> str:
        lines = [f"evacflow oracle suite (seed {self.seed})"]
        for r in self.results:
            tag = "PASS" if r.passed else "FAIL"
            lines.append(
                f"{tag}  {r.name:<24} {r.kind:<14} measured {r.measured}  expected {r.expected}"
                + (f"  ({r.detail})" if r.detail else "")
                + f"  [{r.seconds:.2f}s]"
            )
        n_pass = sum(r.passed for r in self.results)
        lines.append(f"{n_pass}/{len(self.results)} cases passed")
        if self.gaps:
            lines.append("uncovered invariants: " + ", ".join(self.gaps))
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "kind", "certifies", "passed", "measured", "expected", "detail"])
        for r in self.results:
            w.writerow([r.name, r.kind, ";".join(r.certifies), int(r.passed), r.measured, r.expected, r.detail])
        return buf.getvalue()


# ---------------------------------------------------------------- helpers


@lru_cache(maxsize=32)
def solved(sc: Scenario):
    """(grid, potential, routing field) for a scenario, cached."""
    g = build_grid(list(sc.mask), sc.hx, sc.hy)
    sol = solve_u(g, EllipticParams(sc.delta, sc.cg_tol, sc.cg_max_iter))
    return g, sol, build_routing_field(sol, sc.theta, g)


def verification_scenarios() -> list[Scenario]:
    """Desk-scale versions of every built-in plan."""
    return [
        builtin("strip", 64),
        builtin("square_room", 32),
        builtin("two_exit_room", 31),
        builtin("l_room", 32),
        builtin("pillar_room", 32),
        builtin("corridor", 48),
    ]


def strip_error(nx: int, delta: float = 0.5) -> float:
    g, sol, _ = solved(builtin("strip", nx, delta=delta))
    x, _ = g.centers
    exact = np.cosh(x / delta) / np.cosh(1.0 / delta)
    return float(np.max(np.abs(sol.u - exact)[g.inside]))


def _fmt(x) -> str:
    return f"{x:.6g}" if isinstance(x, float) else str(x)


# ---------------------------------------------------------------- cases


def case_grid_faces(seed):
    worst = []
    for sc in verification_scenarios():
        g = build_grid(list(sc.mask), sc.hx, sc.hy)
        bs = g.boundary
        fc = g.face_class[g.inside]
        n_boundary = int(np.sum((fc == WALL) | (fc == EXIT)))
        ok = n_boundary == len(bs.wall_faces) + len(bs.exit_faces) and np.all(fc >= 0)
        keys = [(c, int(d)) for c, d in bs.wall_faces + bs.exit_faces]
        ok = ok and len(set(keys)) == len(keys)
        if not ok:
            worst.append(sc.nx)
    return not worst, f"{len(worst)} bad plans", "0 bad plans", ""


def case_rotation(seed):
    sc = builtin("l_room", 16)
    g = build_grid(list(sc.mask), sc.hx, sc.hy)
    rot = rotate_mask(list(sc.mask))
    gr = build_grid(rot, sc.hy, sc.hx)
    # arrays are stored with j upward, so a counter-clockwise turn of the
    # picture is a clockwise rot90 of the [j, i] array
    ok = gr.nx == g.ny and gr.ny == g.nx
    cls_rot = np.rot90(g.cell_class, -1)
    ok = ok and np.array_equal(gr.cell_class, cls_rot)
    _, s1, _ = solved(sc)
    sc_r = sc.replace(mask=tuple(rot), hx=sc.hy, hy=sc.hx)
    _, s2, _ = solved(sc_r)
    err = float(np.nanmax(np.abs(np.rot90(s1.u, -1) - s2.u)))
    ok = ok and err <= 1e-8
    return ok, _fmt(err), "<= 1e-08", "u rotated vs u of rotated plan"


def case_strip_analytic(seed):
    e = strip_error(256)
    return e <= 2e-3, _fmt(e), "<= 0.002", "max |u - cosh(x/d)/cosh(1/d)| at 256x128"


def case_strip_order(seed):
    e128, e256 = strip_error(128), strip_error(256)
    r = e128 / e256
    return 3.5 <= r <= 4.5, _fmt(r), "in [3.5, 4.5]", "error ratio 128 -> 256"


def case_strip_flux(seed):
    g, sol, _ = solved(builtin("strip", 256))
    rep = exit_flux_report(sol, g)
    per_len = rep.total_exit_flux / 0.5
    err = abs(per_len - math.tanh(2.0))
    ok = err <= 5e-3 and bool(np.all(rep.face_flux > 0))
    return ok, _fmt(per_len), f"{math.tanh(2.0):.6g} +- 0.005", "exit flux per unit length"


def case_max_principle(seed):
    worst = 0.0
    varpis = []
    ok = True
    for sc in verification_scenarios():
        g, sol, _ = solved(sc)
        u = sol.u[g.inside]
        near_exit = (g.face_class == EXIT).any(axis=-1)[g.inside]
        ok &= bool(np.all(u > 0) and np.all(u < 1 + sc.cg_tol) and np.all(u[~near_exit] < 1))
        ok &= sol.varpi > 0
        varpis.append(sol.varpi)
        worst = max(worst, float(u.max()))
    return ok, f"min varpi {min(varpis):.3e}, max u {worst:.6f}", "0 < u < 1", f"{len(varpis)} plans"


def case_flux_bounds(seed):
    ok = True
    worst = math.inf
    for sc in verification_scenarios():
        g, sol, _ = solved(sc)
        rep = exit_flux_report(sol, g, check=False)
        ok &= bool(np.all(rep.face_flux > 0))
        lo, hi = 0.95 * rep.lower_bound, 1.05 * rep.upper_bound
        ok &= lo <= rep.total_exit_flux <= hi
        worst = min(worst, rep.total_exit_flux - lo, hi - rep.total_exit_flux)
    return ok, f"min margin {worst:.4g}", "margin >= 0", "bounds with 5% slack, all faces positive"


def case_transform(seed):
    worst = 0.0
    for sc in verification_scenarios():
        g, sol, _ = solved(sc)
        back = np.exp(-sol.phi[g.inside] / sol.delta)
        worst = max(worst, float(np.max(np.abs(back - sol.u[g.inside]) / sol.u[g.inside])))
    return worst <= 1e-12, _fmt(worst), "<= 1e-12", "relative"


def case_mirror(seed):
    worst = 0.0
    for sc in (builtin("square_room", 32), builtin("two_exit_room", 31)):
        g, sol, _ = solved(sc)
        # both plans are symmetric about the horizontal mid-line
        inner = np.where(g.inside, sol.u, 0.0)
        worst = max(worst, float(np.max(np.abs(inner - inner[::-1, :]))))
        if sc.mask[0].startswith("E"):
            worst = max(worst, float(np.max(np.abs(inner - inner[:, ::-1]))))
    tol = 10 * 1e-10
    return worst <= tol, _fmt(worst), f"<= {tol:g}", "||u - mirror(u)||_inf"


def case_routing_bounds(seed):
    rng = np.random.default_rng(seed)
    worst_ratio = 0.0
    worst_norm = 0.0
    for theta in (0.05, 0.1, 0.5, 1.0):
        scale = rng.choice([1e-3, 1.0, 1e3], size=(10_000, 1))
        a = rng.normal(size=(10_000, 2)) * scale
        b = a + rng.normal(size=(10_000, 2)) * rng.choice([1e-6, 1e-2, 1.0], size=(10_000, 1))
        na, nb = regularized_normalize(a, theta), regularized_normalize(b, theta)
        lhs = np.linalg.norm(na - nb, axis=1)
        rhs = np.linalg.norm(a - b, axis=1) / theta
        worst_ratio = max(worst_ratio, float(np.max(lhs / rhs)))
        worst_norm = max(worst_norm, float(np.max(np.linalg.norm(na, axis=1))))
    for sc in verification_scenarios():
        _, _, f = solved(sc)
        worst_norm = max(worst_norm, f.max_norm)
    ok = worst_ratio <= 1.0 + 1e-12 and worst_norm < 1.0
    return ok, f"lip {worst_ratio:.4f}, |w| {worst_norm:.6f}", "lip <= 1, |w| < 1", "4 thetas x 1e4 pairs"


def case_routing_rotation(seed):
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(size=(10_000, 2)) * 10.0
    theta = 0.1
    r90 = np.column_stack([-x[:, 1], x[:, 0]])
    n = regularized_normalize(x, theta)
    n_r = regularized_normalize(r90, theta)
    rot_err = float(np.max(np.abs(n_r - np.column_stack([-n[:, 1], n[:, 0]]))))
    dots = np.sum(n * x, axis=1)
    zero_ok = np.all(regularized_normalize(np.zeros((1, 2)), theta) == 0.0)
    ok = rot_err == 0.0 and bool(np.all(dots > 0)) and bool(zero_ok)
    return ok, f"rot err {rot_err:g}, min N(x).x {dots.min():.3g}", "0, > 0", ""


def case_conservation(seed):
    sc = builtin("square_room", 32)
    g, _, f = solved(sc)
    rep = evolve(uniform_state(g, 0.5), f, SpeedLaw(), g, 1e9, stop_at_evacuation=False,
                 record_steps=True, max_steps=1000)
    d = rep.conservation_defect
    ok = d <= 1e-12 and rep.n_steps >= 1000
    return ok, _fmt(d), "<= 1e-12", f"{rep.n_steps} steps, relative"


def case_sealed(seed):
    sc = builtin("pillar_room", 32)
    g, _, f = solved(sc)
    rng = np.random.default_rng(seed)
    rho = np.where(g.inside, rng.uniform(0, 1, (g.ny, g.nx)), 0.0)
    rep = evolve(DensityState(rho, 0.0), f, SpeedLaw(), g, 1e9, stop_at_evacuation=False,
                 record_steps=True, max_steps=1000, seal_exits=True)
    m = np.asarray(rep.mass)
    d = float(np.max(np.abs(m - m[0])) / m[0])
    return d <= 1e-12, _fmt(d), "<= 1e-12", f"{rep.n_steps} steps, exits sealed"


def case_range(seed):
    worst_lo, worst_hi = 0.0, 0.0
    laws = [SpeedLaw(), SpeedLaw(CUSTOM, 1.0, 1.0, ((0.0, 1.0), (0.3, 0.9), (0.7, 0.3), (1.0, 0.0)))]
    try:
        for sc in verification_scenarios():
            g, _, f = solved(sc)
            for law, r0 in zip(laws, (0.5, 0.9)):
                rep = evolve(uniform_state(g, r0), f, law, g, 1.0, stop_at_evacuation=False,
                             record_steps=True, cfl=0.9)
                worst_hi = max(worst_hi, max(rep.rho_max))
                worst_lo = min(worst_lo, float(rep.final.rho.min()))
    except EvacflowError as e:
        return False, type(e).__name__, "no range violation", str(e)
    ok = worst_lo >= 0.0 and worst_hi <= 1.0
    return ok, f"[{worst_lo:.3g}, {worst_hi:.6g}]", "within [0, 1]", "cfl 0.9, two laws, all plans"


def case_monotone_pairs(seed):
    rng = np.random.default_rng(seed)
    sc = builtin("pillar_room", 16)
    g, _, f = solved(sc)
    laws = [SpeedLaw(), SpeedLaw(CUSTOM, 1.0, 1.0, ((0.0, 1.0), (0.5, 0.8), (1.0, 0.0)))]
    dt = cfl_timestep(None, f, laws[0], 0.4, g)
    speeds = face_speeds(f, g)
    violations = 0
    worst = 0.0
    for k in range(200):
        law = laws[k % 2]
        lo = rng.uniform(0, 1, (g.ny, g.nx))
        hi = np.minimum(lo + rng.uniform(0, 1, lo.shape) * rng.uniform(0, 1, lo.shape), 1.0)
        lo = np.where(g.inside, lo, 0.0)
        hi = np.where(g.inside, hi, 0.0)
        dtk = cfl_timestep(None, f, law, 0.4, g)
        a = step(DensityState(lo, 0.0), f, law, min(dt, dtk), g, speeds)
        b = step(DensityState(hi, 0.0), f, law, min(dt, dtk), g, speeds)
        gap = float(np.min(b.rho - a.rho))
        worst = min(worst, gap)
        if gap < -1e-15:
            violations += 1
    return violations == 0, f"{violations} violations (min gap {worst:.2g})", "0 violations", "200 pairs"


def case_semigroup(seed):
    sc = builtin("square_room", 64)
    g, _, f = solved(sc)
    law = SpeedLaw()
    full = evolve(uniform_state(g, 0.5), f, law, g, 0.2, output_times=[0.1], stop_at_evacuation=False)
    half = evolve(uniform_state(g, 0.5), f, law, g, 0.1, stop_at_evacuation=False)
    rest = evolve(half.final, f, law, g, 0.2, stop_at_evacuation=False)
    same = np.array_equal(full.final.rho, rest.final.rho) and full.dts == half.dts + rest.dts
    diff = float(np.max(np.abs(full.final.rho - rest.final.rho)))
    return bool(same), _fmt(diff), "0 (bitwise)", f"{full.n_steps} steps"


def _lipschitz_ratio(n, times):
    sc = builtin("square_room", n)
    g, _, f = solved(sc)
    rep = evolve(uniform_state(g, 0.5), f, SpeedLaw(), g, max(times), output_times=times,
                 keep_snapshots=True, stop_at_evacuation=False)
    return time_lipschitz_ratio(rep.snapshots, g)


def case_l1_lipschitz(seed):
    coarse = _lipschitz_ratio(32, [0.5 * k for k in range(1, 17)])
    fine = _lipschitz_ratio(32, [0.25 * k for k in range(1, 33)])
    bound = 4.0 * 1.0 * 1.0 * 4.0
    ok = fine <= bound and coarse <= bound and fine <= 1.25 * coarse
    return ok, f"{coarse:.4f} -> {fine:.4f}", f"<= {bound:g}, growth <= 25%", "sampling 0.5 -> 0.25"


def _strip_density(n, t=0.5):
    sc = builtin("strip", n)
    g, _, f = solved(sc)
    x, _ = g.centers
    rho = np.where(g.inside, 0.8 * (x < 0.5) + 0.1, 0.0)
    rep = evolve(DensityState(rho, 0.0), f, SpeedLaw(), g, t, stop_at_evacuation=False)
    return g, rep.final.rho


def case_tv_bounded(seed):
    tvs = []
    for n in (32, 64, 128):
        g, rho = _strip_density(n)
        tvs.append(discrete_tv(rho, g))
    ok = max(tvs) <= 1.25 * tvs[0]
    return ok, ", ".join(f"{v:.4f}" for v in tvs), "growth <= 25%", "TV at t=0.5, h halved twice"


def case_refinement(seed):
    sols = {n: _strip_density(n)[1][:, :n] for n in (32, 64, 128, 256)}

    def coarsen(a):
        return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])

    d = [float(np.abs(sols[n] - coarsen(sols[2 * n])).sum()) / (n * n) for n in (32, 64, 128)]
    ratios = [d[k] / d[k + 1] for k in range(2)]
    ok = all(r >= 1.3 for r in ratios)
    return ok, ", ".join(f"{r:.3f}" for r in ratios), ">= 1.3", "L1 self-convergence ratios"


def case_strip_paths(seed):
    sc = builtin("strip", 64)
    g, sol, f = solved(sc)
    emap = evacuation_map(g, f, sol)
    tracer = PathTracer(f, g)
    tol = tol_lyap(tracer.dt_path, g)
    worst = -math.inf
    speed_excess = 0.0
    for j in range(0, g.ny, 4):
        for i in range(0, g.nx - 1, 4):
            tr = tracer.integrate((i + 0.5) * g.hx, (j + 0.5) * g.hy)
            worst = max(worst, lyapunov_audit(tr, sol, g))
            steps = np.linalg.norm(np.diff(tr.points, axis=0), axis=1)
            dts = np.diff(tr.samples[:, 0])
            speed_excess = max(speed_excess, float(np.max(steps - dts)) if steps.size else 0.0)
    ok = emap.exited_fraction == 1.0 and worst <= tol and speed_excess <= 1e-12
    return (ok, f"exited {emap.exited_fraction:.3f}, max dphi {worst:.2e}, speed excess {speed_excess:.1e}",
            f"1.0, <= {tol:.2e}, <= 1e-12", "")


def case_exit_time(seed):
    sc = builtin("strip", 64)
    g, _, f = solved(sc)
    h = g.hx
    T = [PathTracer(f, g, dt_path=h / 2 ** k).integrate(0.2, 0.25).exit_time for k in (1, 2, 3)]
    d1, d2 = abs(T[0] - T[1]), abs(T[1] - T[2])
    dt = h / 2
    ok = d1 <= dt**2 and d2 <= d1 and d1 / max(d2, 1e-300) >= 8.0
    # uniform field: RK4 is exact
    c = 0.9 / math.sqrt(0.01 + 0.81)
    w = np.zeros((g.ny, g.nx, 2))
    w[..., 0] = c
    w[~g.inside] = 0.0
    t_u = PathTracer(RoutingField(w, 0.1), g).integrate(0.2, 0.25).exit_time
    err_u = abs(t_u - 0.8 / c)
    ok = ok and err_u <= 1e-12
    return ok, f"ratio {d1 / max(d2, 1e-300):.1f}, |dT| {d1:.2e}, uniform err {err_u:.1e}", \
        f">= 8, <= {dt**2:.2e}, <= 1e-12", "strip start (0.2, 0.25)"


def case_non_crossing(seed):
    sc = builtin("pillar_room", 32)
    g, _, f = solved(sc)
    tracer = PathTracer(f, g)
    half = PathTracer(f, g, dt_path=tracer.dt_path / 2)
    rng = np.random.default_rng(seed)
    worst = 0.0
    det = True
    cells = list(g.inside_cells())
    for _ in range(10):
        i, j = cells[int(rng.integers(len(cells)))]
        a = tracer.integrate((i + 0.5) * g.hx, (j + 0.5) * g.hy)
        if len(a.samples) < 4:
            continue
        k = len(a.samples) // 3
        xb = a.samples[k, 1:]
        b = half.integrate(*xb)
        m = min((len(b.samples) - 1) // 2, len(a.samples) - 1 - k)
        worst = max(worst, float(np.max(np.abs(b.samples[: 2 * m : 2, 1:] - a.samples[k : k + m, 1:]))))
        again = tracer.integrate((i + 0.5) * g.hx, (j + 0.5) * g.hy)
        det &= np.array_equal(again.samples, a.samples)
    tol = tracer.dt_path**2
    return worst <= tol and det, _fmt(worst), f"<= {tol:.3g}", "suffix vs restart at dt/2; repeat bitwise"


def _stall_fraction(nx):
    sc = builtin("two_exit_room", nx)
    g, sol, f = solved(sc)
    emap = evacuation_map(g, f, sol)
    return emap.stalled_fraction, g.ny / g.n_inside


def case_stall_set(seed):
    f1, axis1 = _stall_fraction(31)
    f2, _ = _stall_fraction(63)
    ok = f1 <= 2 * axis1 and f2 < f1
    return ok, f"{f1:.4f} -> {f2:.4f}", f"<= {2 * axis1:.4f}, decreasing", "two-exit room 31 -> 63"


def case_critical(seed):
    worst = 0.0
    count = 0
    for nx in (31, 63):
        sc = builtin("two_exit_room", nx)
        g, sol, _ = solved(sc)
        for cp in critical_points(sol, g, sc.grad_tol):
            target = cp.u / sol.delta**2
            worst = max(worst, abs(cp.trace - target) / target)
            count += 1
    ok = count > 0 and worst <= 0.1
    return ok, f"{count} cells, rel err {worst:.2e}", "<= 0.1", "trace vs u/delta^2"


def case_round_trip(seed):
    rng = np.random.default_rng(seed)
    bad = 0
    for name in BUILTINS:
        sc = builtin(name, paths=((0.3, 0.2),), output_times=(0.5, 1.0))
        variants = [
            sc,
            sc.replace(delta=float(rng.uniform(0.1, 2.0)), theta=float(rng.uniform(0.01, 1.0))),
            sc.replace(speed_law=CUSTOM, speed_table=((0.0, 1.0), (0.5, 0.6), (1.0, 0.0))),
            sc.replace(cg_max_iter=500, dt_path=0.001, t_cap=3.0),
        ]
        for v in variants:
            if parse_scenario(emit_scenario(v)) != v:
                bad += 1
    return bad == 0, f"{bad} mismatches", "0", f"{4 * len(BUILTINS)} scenarios"


def case_reproducible(seed):
    from .pipeline import run_pipeline

    sc = builtin("square_room", 16, t_end=0.5, output_times=(0.25,), paths=((0.3, 0.4),))
    names = ("u.csv", "phi.csv", "w.csv", "exit_flux.csv", "evolution.csv", "rho_final.csv",
             "evacuation_map.csv", "path_000.csv")
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for k, stages in enumerate((("field", "simulate", "trace"), ("field", "simulate", "trace"), ("field",))):
            d = Path(tmp) / f"run{k}"
            run_pipeline(sc, stages, d)
            outs.append({n: (d / n).read_bytes() for n in names if (d / n).exists()})
    same = outs[0] == outs[1]
    isolated = all(outs[2][n] == outs[0][n] for n in ("u.csv", "phi.csv", "w.csv", "exit_flux.csv"))
    isolated = isolated and "evolution.csv" not in outs[2]
    return same and isolated, f"identical {same}, field-only isolated {isolated}", "True, True", ""


CASES = {
    c.name: c
    for c in [
        OracleCase("grid_faces", CONSERVATION, ("geometry.partition", "geometry.four_faces"), 0, case_grid_faces),
        OracleCase("grid_rotation", SYMMETRY, ("geometry.rotation",), 1e-8, case_rotation),
        OracleCase("strip_analytic", ANALYTIC_STRIP, ("elliptic.convergence_order",), 2e-3, case_strip_analytic),
        OracleCase("strip_order", REFINEMENT, ("elliptic.convergence_order",), 0.5, case_strip_order),
        OracleCase("strip_exit_flux", ANALYTIC_STRIP, ("elliptic.exit_positivity",), 5e-3, case_strip_flux),
        OracleCase("max_principle", BOUND_E3, ("elliptic.max_principle",), 1e-10, case_max_principle),
        OracleCase("flux_bounds", BOUND_E3, ("elliptic.flux_bounds", "elliptic.exit_positivity"), 0.05,
                   case_flux_bounds),
        OracleCase("transform", ANALYTIC_STRIP, ("elliptic.transform",), 1e-12, case_transform),
        OracleCase("mirror_symmetry", SYMMETRY, ("elliptic.mirror_symmetry",), 1e-9, case_mirror),
        OracleCase("routing_bounds", BOUND_E3, ("field.lipschitz", "field.norm_below_one"), 1e-12,
                   case_routing_bounds),
        OracleCase("routing_rotation", SYMMETRY, ("field.rotation", "field.alignment"), 0, case_routing_rotation),
        OracleCase("conservation", CONSERVATION, ("hyperbolic.conservation",), 1e-12, case_conservation),
        OracleCase("sealed_exits", CONSERVATION, ("hyperbolic.wall_impermeable",), 1e-12, case_sealed),
        OracleCase("range", MONOTONE_PAIR, ("hyperbolic.linf_stability",), 1e-12, case_range),
        OracleCase("monotone_pairs", MONOTONE_PAIR, ("hyperbolic.monotonicity",), 1e-15, case_monotone_pairs),
        OracleCase("semigroup", CONSERVATION, ("hyperbolic.semigroup",), 0, case_semigroup),
        OracleCase("l1_lipschitz", REFINEMENT, ("hyperbolic.l1_lipschitz",), 0.25, case_l1_lipschitz),
        OracleCase("tv_bounded", REFINEMENT, ("hyperbolic.tv_bounded",), 0.25, case_tv_bounded),
        OracleCase("density_refinement", REFINEMENT, ("hyperbolic.refinement",), 1.3, case_refinement),
        OracleCase("strip_paths", LYAPUNOV, ("trajectory.lyapunov", "trajectory.speed_bound"), 0,
                   case_strip_paths),
        OracleCase("exit_time", REFINEMENT, ("trajectory.exit_time",), 8.0, case_exit_time),
        OracleCase("non_crossing", LYAPUNOV, ("trajectory.non_crossing", "trajectory.determinism"), 1.0,
                   case_non_crossing),
        OracleCase("stall_set", LYAPUNOV, ("trajectory.stall_set",), 2.0, case_stall_set),
        OracleCase("critical_signature", LYAPUNOV, ("trajectory.critical_signature",), 0.1, case_critical),
        OracleCase("round_trip", SYMMETRY, ("cli.round_trip",), 0, case_round_trip),
        OracleCase("reproducible", SYMMETRY, ("cli.reproducibility", "cli.stage_isolation"), 0,
                   case_reproducible),
    ]
}


def coverage_gaps(cases=None) -> list[str]:
    cases = CASES if cases is None else cases
    covered = {inv for c in cases.values() for inv in c.certifies}
    return sorted(set(INVARIANTS) - covered)


def run_oracles(selection=None, seed: int = 0) -> OracleReport:
    names = list(CASES) if not selection else list(selection)
    results = []
    for name in names:
        case = CASES[name]
        t0 = time.perf_counter()
        try:
            passed, measured, expected, detail = case.run(seed)
        except EvacflowError as e:
            passed, measured, expected, detail = False, type(e).__name__, "no error", str(e)
        results.append(CaseResult(name, case.kind, case.certifies, bool(passed), measured, expected,
                                  detail, time.perf_counter() - t0))
    return OracleReport(results, seed, coverage_gaps())
