"""Run a scenario stage by stage and write its artifacts."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .elliptic import EllipticParams, PotentialSolution, exit_flux_report, solve_u
from .errors import ValidationError
from .field import RoutingField, build_routing_field
from .geometry import Grid, build_grid
from .hyperbolic import DensityState, EvolutionReport, evolve
from .kernels import BACKEND
from .scenario import Scenario, resolved_params
from .trajectory import PathTracer, evacuation_map, phi_along

STAGES = ("field", "simulate", "trace")


def _f(v) -> str:
    """Float formatting used in every artifact (shortest round-trip repr)."""
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_scalar_csv(path: Path, values: np.ndarray, g: Grid):
    xs, ys = g.centers
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "value"])
        for i, j in g.inside_cells():
            w.writerow([i, j, _f(xs[j, i]), _f(ys[j, i]), _f(values[j, i])])


def write_vector_csv(path: Path, values: np.ndarray, g: Grid):
    xs, ys = g.centers
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "wx", "wy"])
        for i, j in g.inside_cells():
            w.writerow([i, j, _f(xs[j, i]), _f(ys[j, i]), _f(values[j, i, 0]), _f(values[j, i, 1])])


def read_scalar_csv(path: Path, g: Grid) -> np.ndarray:
    """Inverse of ``write_scalar_csv``; every INSIDE cell must appear once."""
    out = np.full((g.ny, g.nx), np.nan)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            i, j = int(row["i"]), int(row["j"])
            if not (0 <= i < g.nx and 0 <= j < g.ny) or not g.inside[j, i]:
                raise ValidationError(violations=[("Rho0Cell", f"{path}: cell ({i},{j}) is not inside")])
            out[j, i] = float(row["value"])
    missing = np.isnan(out) & g.inside
    if missing.any():
        j, i = np.argwhere(missing)[0]
        raise ValidationError(violations=[("Rho0Cell", f"{path}: no value for cell ({i},{j})")])
    out[~g.inside] = 0.0
    return out


def initial_density(sc: Scenario, g: Grid, base_dir: Path | None = None) -> np.ndarray:
    if sc.rho0_kind == "uniform":
        rho = np.where(g.inside, sc.rho0_value, 0.0)
    else:
        p = Path(sc.rho0_path)
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        rho = read_scalar_csv(p, g)
    bad = g.inside & ((rho < 0) | (rho > sc.r_max))
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise ValidationError(
            violations=[("RhoOutOfRange", f"rho0 = {rho[j, i]} at cell ({i},{j}) outside [0, {sc.r_max}]")]
        )
    return rho


@dataclass
class RunSummary:
    """Key-value record of one run; stage entries present iff the stage ran."""

    values: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    stages: tuple = ()

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def text(self) -> str:
        lines = [f"{k} = {_f(v)}" for k, v in self.values.items()]
        lines += [f"time.{k} = {v:.6f}" for k, v in self.timings.items()]
        return "\n".join(lines) + "\n"


@dataclass
class RunState:
    """In-memory results, for callers that want more than the files."""

    grid: Grid
    solution: PotentialSolution | None = None
    routing: RoutingField | None = None
    evolution: EvolutionReport | None = None
    paths: list = field(default_factory=list)
    evac_map: object = None


def run_pipeline(sc: Scenario, stages, out_dir=None, base_dir=None) -> tuple[RunSummary, RunState]:
    """Execute ``stages`` (field always first) and write artifacts to ``out_dir``."""
    stages = set(stages)
    unknown = stages - set(STAGES)
    if unknown:
        raise ValidationError(violations=[("Stage", f"unknown stages {sorted(unknown)}")])
    stages.add("field")
    ordered = tuple(s for s in STAGES if s in stages)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    summary = RunSummary(stages=ordered)
    v = summary.values
    v["version"] = __version__
    v["backend"] = BACKEND
    v["scenario_digest"] = sc.digest()
    v["stages"] = ",".join(ordered)
    for k, val in resolved_params(sc).items():
        v[f"param.{k}"] = "auto" if val is None else val

    g = build_grid(list(sc.mask), sc.hx, sc.hy)
    state = RunState(grid=g)

    t0 = time.perf_counter()
    sol = solve_u(g, EllipticParams(sc.delta, sc.cg_tol, sc.cg_max_iter))
    rep = exit_flux_report(sol, g)
    fld = build_routing_field(sol, sc.theta, g)
    state.solution, state.routing = sol, fld
    summary.timings["field"] = time.perf_counter() - t0
    v["cg_iterations"] = sol.iterations
    v["cg_residual"] = sol.residual
    v["varpi"] = sol.varpi
    v["exit_flux"] = rep.total_exit_flux
    v["exit_flux_lower"] = rep.lower_bound
    v["exit_flux_upper"] = rep.upper_bound
    v["max_phi_boundary"] = rep.max_phi_boundary
    v["exit_flux_within_bounds"] = bool(rep.within_bounds)
    v["max_wnorm"] = fld.max_norm
    if out is not None:
        write_scalar_csv(out / "u.csv", sol.u, g)
        write_scalar_csv(out / "phi.csv", sol.phi, g)
        write_vector_csv(out / "w.csv", fld.w, g)
        with open(out / "exit_flux.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "direction", "flux"])
            for ((i, j), d), f in zip(g.boundary.exit_faces, rep.face_flux):
                w.writerow([i, j, d.name, _f(f)])

    if "simulate" in stages:
        t0 = time.perf_counter()
        rho0 = initial_density(sc, g, base_dir)
        ev = evolve(
            DensityState(rho0, 0.0), fld, sc.law, g, sc.t_end,
            mass_threshold=sc.mass_threshold, cfl=sc.cfl, output_times=sc.output_times,
            record_steps=True, keep_snapshots=True,
        )
        state.evolution = ev
        summary.timings["simulate"] = time.perf_counter() - t0
        v["evacuation_time"] = ev.evacuation_time if ev.evacuation_time is not None else math.inf
        v["steps"] = ev.n_steps
        v["final_time"] = ev.final.t
        v["final_mass"] = ev.mass[-1]
        v["initial_mass"] = ev.initial_mass
        v["conservation_defect"] = ev.conservation_defect
        if out is not None:
            with open(out / "evolution.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "mass", "outflow", "tv", "rho_max"])
                for row in ev.rows():
                    w.writerow([_f(float(x)) for x in row])
            for t, rho in sorted(ev.snapshots.items()):
                if t in sc.output_times:
                    write_scalar_csv(out / f"rho_t{t!r}.csv", rho, g)
            write_scalar_csv(out / "rho_final.csv", ev.final.rho, g)

    if "trace" in stages:
        t0 = time.perf_counter()
        tracer = PathTracer(fld, g, sc.dt_path, sc.t_cap, sc.stall_tol)
        emap = evacuation_map(g, fld, sol, stride=sc.map_stride, tracer=tracer)
        state.evac_map = emap
        for k, (x, y) in enumerate(sc.paths):
            tr = tracer.integrate(x, y)
            state.paths.append(tr)
            if out is not None:
                phi = phi_along(tr, sol, g)
                with open(out / f"path_{k:03d}.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["t", "x", "y", "phi", "wnorm"])
                    for (t, px, py), ph in zip(tr.samples, phi):
                        wx, wy = tracer.sample(px, py)
                        w.writerow([_f(t), _f(px), _f(py), _f(ph), _f(math.sqrt(wx * wx + wy * wy))])
            v[f"path_{k:03d}.outcome"] = tr.outcome
            v[f"path_{k:03d}.exit_time"] = tr.exit_time if tr.exit_time is not None else math.nan
        summary.timings["trace"] = time.perf_counter() - t0
        for key, val in emap.summary().items():
            v[f"map.{key}"] = val
        v["dt_path"] = tracer.dt_path
        v["t_cap"] = tracer.t_cap
        if out is not None:
            with open(out / "evacuation_map.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["i", "j", "x", "y", "outcome", "T"])
                for i, j, x, y, o, T in zip(emap.i, emap.j, emap.x, emap.y, emap.outcome, emap.T):
                    w.writerow([int(i), int(j), _f(x), _f(y), o, "" if math.isnan(T) else _f(T)])

    if out is not None:
        (out / "summary.txt").write_text(summary.text(), encoding="utf-8")
    return summary, state
