"""Compiled and pure-Python kernels must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from evacflow import hyperbolic
from evacflow.hyperbolic import CUSTOM, SpeedLaw, evolve, face_speeds, uniform_state
from evacflow.kernels import BACKEND, available_backends
from evacflow.library import builtin
from evacflow.trajectory import PathTracer, evacuation_map
from evacflow.verification import solved

BACKENDS = available_backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
LAWS = [SpeedLaw(), SpeedLaw(CUSTOM, 2.0, 1.5, ((0.0, 1.5), (0.5, 1.4), (1.2, 0.4), (2.0, 0.0)))]


def test_backend_selection():
    assert BACKEND in BACKENDS
    assert "python" in BACKENDS


@needs_ext
@pytest.mark.parametrize("law", LAWS, ids=["linear", "table"])
def test_fv_step_identical(law, square32, rng):
    g, _, f = square32
    sp = face_speeds(f, g)
    rho = np.where(g.inside, rng.uniform(0, law.r_max, (g.ny, g.nx)), 0.0)
    args = (rho, sp.sx, sp.sy, 0.003, g.hx, g.hy, *law.kernel_args())
    outs = [BACKENDS[b].fv_step(*args) for b in ("python", "cython")]
    for a, b in zip(*outs):
        assert np.array_equal(np.asarray(a), np.asarray(b))


@needs_ext
def test_rusanov_scalar_identical(rng):
    for law in LAWS:
        la = law.kernel_args()
        for _ in range(200):
            rl, rr = rng.uniform(0, law.r_max, 2)
            s = rng.uniform(-1, 1)
            a = float(BACKENDS["python"].rusanov(rl, rr, s, *la))
            b = BACKENDS["cython"].rusanov(rl, rr, s, *la)
            assert a == b


@needs_ext
def test_paths_identical(square32, rng):
    g, _, f = square32
    t_py = PathTracer(f, g, backend=BACKENDS["python"])
    t_cy = PathTracer(f, g, backend=BACKENDS["cython"])
    for _ in range(20):
        x, y = rng.uniform(0.01, 0.99, 2)
        a, b = t_py.integrate(x, y), t_cy.integrate(x, y)
        assert np.array_equal(a.samples, b.samples)
        assert (a.outcome, a.exit_time, a.exit_face) == (b.outcome, b.exit_time, b.exit_face)
        assert t_py.sample(x, y) == t_cy.sample(x, y)


@needs_ext
def test_evacuation_maps_identical(two_exit31):
    g, sol, f = two_exit31
    a = evacuation_map(g, f, sol, tracer=PathTracer(f, g, backend=BACKENDS["python"]))
    b = evacuation_map(g, f, sol, tracer=PathTracer(f, g, backend=BACKENDS["cython"]))
    assert list(a.outcome) == list(b.outcome)
    assert np.array_equal(a.T, b.T, equal_nan=True)


@needs_ext
def test_evolution_identical(monkeypatch):
    g, _, f = solved(builtin("square_room", 16))
    reps = {}
    for name in ("python", "cython"):
        monkeypatch.setattr(hyperbolic, "_impl", BACKENDS[name])
        reps[name] = evolve(uniform_state(g, 0.5), f, LAWS[0], g, 50.0)
    assert reps["python"].evacuation_time == reps["cython"].evacuation_time
    assert np.array_equal(reps["python"].final.rho, reps["cython"].final.rho)


def test_env_forces_fallback():
    code = "from evacflow.kernels import BACKEND; print(BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, "EVACFLOW_BACKEND": "python"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
