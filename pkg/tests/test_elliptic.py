import math

import numpy as np
import pytest
from scipy.sparse.linalg import spsolve

from evacflow.elliptic import (
    EllipticParams,
    assemble_system,
    critical_points,
    exit_flux_report,
    solve_u,
)
from evacflow.errors import CgDivergence, ValidationError
from evacflow.geometry import EXIT, build_grid
from evacflow.library import BUILTINS, builtin
from evacflow.verification import solved


def test_single_cell_system():
    g = build_grid("E.#", 1.0, 1.0)
    A, b = assemble_system(g, EllipticParams(1.0))
    assert A.toarray().tolist() == [[3.0]]
    assert b.tolist() == [2.0]
    sol = solve_u(g, EllipticParams(1.0))
    assert sol.u[0, 1] == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_interior_stencil_row():
    hx, hy, d = 0.1, 0.2, 0.7
    g = build_grid(["....E"] * 3, hx, hy)
    A, _ = assemble_system(g, EllipticParams(d))
    k = g.index[1, 1]  # interior cell, all four neighbours inside
    row = A.getrow(k).toarray().ravel()
    assert row[k] == pytest.approx(1 + d * d * (2 / hx**2 + 2 / hy**2))
    assert row[g.index[1, 0]] == pytest.approx(-d * d / hx**2)
    assert row[g.index[0, 1]] == pytest.approx(-d * d / hy**2)
    assert np.count_nonzero(row) == 5


def test_system_is_symmetric_positive_definite(square32):
    g, _, _ = square32
    A, _ = assemble_system(g, EllipticParams(0.5))
    assert abs(A - A.T).max() == 0.0
    assert np.all(np.linalg.eigvalsh(A.toarray()[:200, :200]) > 0)


def test_params_validation():
    with pytest.raises(ValidationError):
        EllipticParams(0.0)
    with pytest.raises(ValidationError):
        EllipticParams(0.5, cg_tol=1.0)


def test_strip_left_column(strip256):
    g, sol, _ = strip256
    left = sol.u[:, 0]
    assert np.all(np.abs(left - 1 / math.cosh(2.0)) <= 2e-3)


def test_strip_is_one_dimensional(strip256):
    g, sol, _ = strip256
    A, b = assemble_system(g, EllipticParams(0.5))
    exact = spsolve(A.tocsc(), b)
    u = np.full((g.ny, g.nx), np.nan)
    u[g.inside] = exact
    inner = u[:, :-1]
    # the discrete solution itself is constant along columns
    assert np.max(inner.max(axis=0) - inner.min(axis=0)) <= 1e-10
    # CG stops on the residual; its error stays within a modest multiple of cg_tol
    assert np.max(np.abs(sol.u[g.inside] - exact)) <= 100 * sol.cg_tol


def test_strip_gradient(strip256):
    g, sol, _ = strip256
    x, _ = g.centers
    k = int(np.argmin(np.abs(x[0] - 0.75)))
    assert sol.grad_phi[10, k, 0] == pytest.approx(-math.tanh(x[0, k] / 0.5), abs=5e-3)
    assert sol.grad_phi[10, 191, 0] == pytest.approx(-math.tanh(1.5), abs=5e-3)
    # wall-adjacent rows see no y-gradient
    assert np.max(np.abs(sol.grad_phi[0, :-1, 1])) <= 1e-6
    assert np.max(np.abs(sol.grad_phi[-1, :-1, 1])) <= 1e-6


def test_strip_exit_flux_and_bounds(strip256):
    g, sol, _ = strip256
    rep = exit_flux_report(sol, g)
    assert rep.total_exit_flux / 0.5 == pytest.approx(math.tanh(2.0), abs=5e-3)
    assert rep.max_phi_boundary == pytest.approx(0.5 * math.log(math.cosh(2.0)), abs=1e-3)
    assert rep.lower_bound == pytest.approx(0.26580, abs=1e-3)
    assert rep.upper_bound == pytest.approx(3.76222, abs=1e-2)
    assert rep.within_bounds
    assert np.all(rep.face_flux > 0)


@pytest.mark.parametrize("name", BUILTINS)
def test_maximum_principle_everywhere(name):
    sc = builtin(name)
    g, sol, _ = solved(sc)
    u = sol.u[g.inside]
    assert 0 < sol.varpi == u.min()
    assert np.all(u < 1 + sc.cg_tol)
    near = (g.face_class == EXIT).any(axis=-1)[g.inside]
    assert np.all(u[~near] < 1)
    assert np.all(sol.phi[g.inside] > 0)
    assert np.allclose(np.exp(-sol.phi[g.inside] / sol.delta), u, rtol=1e-12, atol=0)
    rep = exit_flux_report(sol, g)
    assert rep.lower_bound <= rep.upper_bound
    assert 0.95 * rep.lower_bound <= rep.total_exit_flux <= 1.05 * rep.upper_bound


def test_mirror_symmetry(square32):
    g, sol, _ = square32
    u = np.where(g.inside, sol.u, 0.0)
    assert np.max(np.abs(u - u[::-1])) <= 10 * 1e-10


def test_second_order_on_strip():
    errs = []
    for nx in (128, 256):
        g, sol, _ = solved(builtin("strip", nx))
        x, _ = g.centers
        errs.append(np.max(np.abs(sol.u - np.cosh(x / 0.5) / math.cosh(2.0))[g.inside]))
    assert errs[1] <= 2e-3
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_cg_divergence_is_reported():
    sc = builtin("strip", 32)
    g = build_grid(list(sc.mask), sc.hx, sc.hy)
    with pytest.raises(CgDivergence):
        solve_u(g, EllipticParams(0.5, cg_max_iter=2))


def test_critical_points_strip(strip64):
    g, sol, _ = strip64
    assert critical_points(sol, g, 1e-4) == []
    cps = critical_points(sol, g, 0.015)
    assert cps and all(cp.cell[0] == 0 for cp in cps)
    assert all(cp.trace > 0 for cp in cps)


def test_critical_points_two_exit_room(two_exit31):
    g, sol, _ = two_exit31
    cps = critical_points(sol, g, 1e-6)
    axis = (g.nx - 1) // 2
    assert {cp.cell[0] for cp in cps} == {axis}
    assert len(cps) == g.ny
    for cp in cps:
        assert cp.trace == pytest.approx(cp.u / sol.delta**2, rel=0.1)
        assert max(cp.eigenvalues) > 0
    # w vanishes on the axis (flat region of the two-exit room)
    assert np.max(np.abs(sol.grad_phi[:, axis])) <= 1e-6
