"""Scenario files: ``key = value`` lines plus a fenced mask block.

Example::

    # corridor with the exit on the right
    hx = 0.015625
    hy = 0.015625
    delta = 0.5
    rho0 = uniform 0.5
    path = 0.2, 0.25
    ```mask
    ........E
    ........E
    ```

Blank lines and ``#`` comments are ignored.  ``path`` may repeat.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ScenarioSyntaxError, ValidationError
from .geometry import INSIDE, mask_violations, parse_mask
from .hyperbolic import LINEAR, SpeedLaw

FENCE_OPEN = "```mask"
FENCE_CLOSE = "```"


@dataclass(frozen=True)
class Scenario:
    mask: tuple[str, ...]
    hx: float
    hy: float
    delta: float = 0.5
    theta: float = 0.1
    speed_law: str = LINEAR
    r_max: float = 1.0
    v_max: float = 1.0
    speed_table: tuple[tuple[float, float], ...] | None = None
    rho0_kind: str = "uniform"
    rho0_value: float = 0.5
    rho0_path: str | None = None
    cfl: float = 0.4
    t_end: float = 10.0
    mass_threshold: float = 1e-3
    output_times: tuple[float, ...] = ()
    paths: tuple[tuple[float, float], ...] = ()
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None
    stall_tol: float = 1e-6
    grad_tol: float = 1e-6
    dt_path: float | None = None
    t_cap: float | None = None
    map_stride: int = 1

    @property
    def law(self) -> SpeedLaw:
        return SpeedLaw(self.speed_law, self.r_max, self.v_max, self.speed_table)

    @property
    def nx(self) -> int:
        return len(self.mask[0])

    @property
    def ny(self) -> int:
        return len(self.mask)

    def digest(self) -> str:
        return hashlib.sha256(emit_scenario(self).encode()).hexdigest()[:16]

    def replace(self, **kw) -> Scenario:
        return dataclasses.replace(self, **kw)


_FLOAT_KEYS = {
    "hx", "hy", "delta", "theta", "r_max", "v_max", "cfl", "t_end",
    "mass_threshold", "cg_tol", "stall_tol", "grad_tol",
}
_OPTIONAL_FLOAT_KEYS = {"dt_path", "t_cap"}
_INT_KEYS = {"map_stride"}
_OPTIONAL_INT_KEYS = {"cg_max_iter"}
_SPECIAL_KEYS = {"speed_law", "speed_table", "rho0", "output_times", "path"}
KNOWN_KEYS = _FLOAT_KEYS | _OPTIONAL_FLOAT_KEYS | _INT_KEYS | _OPTIONAL_INT_KEYS | _SPECIAL_KEYS
_REPEATABLE = {"path"}


def _float(text, line, col):
    try:
        return float(text)
    except ValueError:
        raise ScenarioSyntaxError(f"expected a number, got {text!r}", line, col) from None


def _int(text, line, col):
    try:
        return int(text)
    except ValueError:
        raise ScenarioSyntaxError(f"expected an integer, got {text!r}", line, col) from None


def _split_raw(text: str):
    """Return ([(key, value, line, value_col)], mask_rows)."""
    entries = []
    mask = None
    lines = text.splitlines()
    k = 0
    while k < len(lines):
        raw = lines[k]
        lineno = k + 1
        k += 1
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        if s == FENCE_OPEN:
            if mask is not None:
                raise ScenarioSyntaxError("second mask block", lineno, 1)
            mask = []
            while True:
                if k >= len(lines):
                    raise ScenarioSyntaxError("unterminated mask block", lineno, 1)
                row = lines[k].strip()
                k += 1
                if row == FENCE_CLOSE:
                    break
                if row:
                    mask.append(row)
            continue
        if "=" not in raw:
            raise ScenarioSyntaxError("expected 'key = value'", lineno, 1)
        key, _, value = raw.partition("=")
        col = len(key) + 2 + (len(value) - len(value.lstrip()))
        entries.append((key.strip(), value.strip(), lineno, col))
    return entries, mask


def parse_scenario(text: str, overrides=()) -> Scenario:
    """Parse and fully validate scenario text.

    ``overrides`` are ``key=value`` strings applied on top of the file.
    Raises ScenarioSyntaxError or ValidationError (carrying every violation).
    """
    entries, mask = _split_raw(text)
    for ov in overrides:
        if "=" not in ov:
            raise ScenarioSyntaxError(f"override {ov!r} is not key=value")
        key, _, value = ov.partition("=")
        key = key.strip()
        if key == "mask":
            mask = [r for r in value.replace("/", "\n").splitlines() if r.strip()]
            continue
        if key not in _REPEATABLE:
            entries = [e for e in entries if e[0] != key]
        entries.append((key, value.strip(), None, None))

    kw = {}
    seen = set()
    paths = []
    for key, value, line, col in entries:
        if key not in KNOWN_KEYS:
            raise ScenarioSyntaxError(f"unknown key {key!r}", line, 1)
        if key in seen and key not in _REPEATABLE:
            raise ScenarioSyntaxError(f"duplicate key {key!r}", line, 1)
        seen.add(key)
        if key in _FLOAT_KEYS:
            kw[key] = _float(value, line, col)
        elif key in _OPTIONAL_FLOAT_KEYS:
            kw[key] = None if value == "auto" else _float(value, line, col)
        elif key in _INT_KEYS:
            kw[key] = _int(value, line, col)
        elif key in _OPTIONAL_INT_KEYS:
            kw[key] = None if value == "auto" else _int(value, line, col)
        elif key == "speed_law":
            kw["speed_law"] = value.lower()
        elif key == "speed_table":
            pts = []
            for part in value.split(","):
                a, sep, b = part.partition(":")
                if not sep:
                    raise ScenarioSyntaxError("speed_table entries are rho:v", line, col)
                pts.append((_float(a.strip(), line, col), _float(b.strip(), line, col)))
            kw["speed_table"] = tuple(pts)
        elif key == "rho0":
            kind, _, arg = value.partition(" ")
            kind = kind.lower()
            arg = arg.strip()
            if kind == "uniform":
                kw["rho0_kind"] = "uniform"
                kw["rho0_value"] = _float(arg, line, col)
                kw["rho0_path"] = None
            elif kind == "csv":
                if not arg:
                    raise ScenarioSyntaxError("rho0 = csv needs a path", line, col)
                kw["rho0_kind"] = "csv"
                kw["rho0_path"] = arg
            else:
                raise ScenarioSyntaxError(f"rho0 must be 'uniform <v>' or 'csv <path>', got {value!r}", line, col)
        elif key == "output_times":
            kw["output_times"] = tuple(
                _float(p.strip(), line, col) for p in value.split(",") if p.strip()
            )
        elif key == "path":
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 2:
                raise ScenarioSyntaxError("path needs 'x, y'", line, col)
            paths.append((_float(parts[0], line, col), _float(parts[1], line, col)))
    kw["paths"] = tuple(paths)

    problems = []
    if mask is None:
        problems.append(("MissingMask", "scenario has no ```mask block"))
    for req in ("hx", "hy"):
        if req not in kw:
            problems.append(("MissingKey", f"required key {req!r} is missing"))
    if problems:
        raise ValidationError(violations=problems)
    sc = Scenario(mask=tuple(mask), **kw)
    problems = validate(sc)
    if problems:
        raise ValidationError(violations=problems)
    return sc


def validate(sc: Scenario) -> list[tuple[str, str]]:
    """Every violated rule as (rule, message)."""
    out = []
    try:
        cells = parse_mask(list(sc.mask))
    except ValidationError as e:
        out += e.violations
        cells = None
    if cells is not None:
        out += [(e.rule, str(e)) for e in mask_violations(cells)]
    if not (sc.hx > 0 and sc.hy > 0):
        out.append(("CellSize", "hx and hy must be > 0"))
    if not sc.delta > 0:
        out.append(("DeltaPositive", f"delta must be > 0, got {sc.delta}"))
    if not sc.theta > 0:
        out.append(("ThetaPositive", f"theta must be > 0, got {sc.theta}"))
    if not 0 < sc.cg_tol < 1:
        out.append(("CgTolRange", f"cg_tol must lie in (0, 1), got {sc.cg_tol}"))
    if sc.cg_max_iter is not None and sc.cg_max_iter < 1:
        out.append(("CgMaxIter", "cg_max_iter must be >= 1"))
    law_ok = True
    try:
        SpeedLaw(sc.speed_law, sc.r_max, sc.v_max, sc.speed_table)
    except ValidationError as e:
        out += e.violations
        law_ok = False
    if sc.speed_law == LINEAR and sc.speed_table is not None:
        out.append(("SpeedTable", "speed_table is only allowed with speed_law = custom"))
    if sc.rho0_kind == "uniform" and law_ok and not 0.0 <= sc.rho0_value <= sc.r_max:
        out.append(("RhoOutOfRange", f"rho0 = {sc.rho0_value} outside [0, {sc.r_max}]"))
    if not 0 < sc.cfl < 1:
        out.append(("CflRange", f"cfl must lie in (0, 1), got {sc.cfl}"))
    if not sc.t_end > 0:
        out.append(("TEnd", f"t_end must be > 0, got {sc.t_end}"))
    if not 0 < sc.mass_threshold < 1:
        out.append(("MassThreshold", f"mass_threshold must lie in (0, 1), got {sc.mass_threshold}"))
    for t in sc.output_times:
        if not 0 < t <= sc.t_end:
            out.append(("OutputTime", f"output time {t} outside (0, t_end]"))
    if not sc.stall_tol > 0:
        out.append(("StallTol", "stall_tol must be > 0"))
    if not sc.grad_tol > 0:
        out.append(("GradTol", "grad_tol must be > 0"))
    if sc.dt_path is not None and not sc.dt_path > 0:
        out.append(("DtPath", "dt_path must be > 0"))
    if sc.t_cap is not None and not sc.t_cap >= 0:
        out.append(("TCap", "t_cap must be >= 0"))
    if sc.map_stride < 1:
        out.append(("MapStride", "map_stride must be >= 1"))
    if cells is not None and sc.hx > 0 and sc.hy > 0:
        for x, y in sc.paths:
            i, j = int(np.floor(x / sc.hx)), int(np.floor(y / sc.hy))
            ok = 0 <= i < cells.shape[1] and 0 <= j < cells.shape[0] and cells[j, i] == INSIDE
            if not ok:
                out.append(("PathOutside", f"path start ({x}, {y}) is not inside the domain"))
    return out


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_scenario(sc: Scenario) -> str:
    """Canonical text; ``parse_scenario(emit_scenario(s)) == s``."""
    lines = []
    for f in fields(Scenario):
        k = f.name
        v = getattr(sc, k)
        if k in ("mask", "paths", "rho0_value", "rho0_path"):
            continue
        if k == "rho0_kind":
            if v == "uniform":
                lines.append(f"rho0 = uniform {_fmt(sc.rho0_value)}")
            else:
                lines.append(f"rho0 = csv {sc.rho0_path}")
        elif k == "speed_table":
            if v is not None:
                lines.append("speed_table = " + ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in v))
        elif k == "output_times":
            if v:
                lines.append("output_times = " + ", ".join(_fmt(t) for t in v))
        else:
            lines.append(f"{k} = {_fmt(v)}")
    for x, y in sc.paths:
        lines.append(f"path = {_fmt(x)}, {_fmt(y)}")
    lines.append(FENCE_OPEN)
    lines.extend(sc.mask)
    lines.append(FENCE_CLOSE)
    return "\n".join(lines) + "\n"


def load_scenario(path, overrides=()) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), overrides)


def resolved_params(sc: Scenario) -> dict:
    """Scenario parameters with every default spelled out (for summaries)."""
    out = {}
    for f in fields(Scenario):
        if f.name in ("mask", "paths"):
            continue
        out[f.name] = getattr(sc, f.name)
    out["nx"] = sc.nx
    out["ny"] = sc.ny
    out["n_paths"] = len(sc.paths)
    return out


__all__ = [
    "Scenario", "parse_scenario", "emit_scenario", "load_scenario", "validate", "resolved_params",
    "KNOWN_KEYS",
]
