"""Exit potential via the linear transformed problem.

We solve ``u - delta**2 * Lap(u) = 0`` with ``u = 1`` on exit faces and a
zero normal derivative on walls, then recover ``phi = -delta * log(u)``.
Ghost values: mirror (``u_g = u_in``) across walls, ``u_g = 2 - u_in``
across exits, so the Dirichlet value sits at the face midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CgDivergence, MaximumPrincipleViolation, NonpositiveExitFlux, ValidationError
from .geometry import EXIT, INTERIOR, WALL, Direction, Grid


@dataclass(frozen=True)
class EllipticParams:
    delta: float
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None  # default 50 * (nx + ny)

    def __post_init__(self):
        problems = []
        if not self.delta > 0:
            problems.append(("DeltaPositive", f"delta must be > 0, got {self.delta}"))
        if not 0 < self.cg_tol < 1:
            problems.append(("CgTolRange", f"cg_tol must lie in (0, 1), got {self.cg_tol}"))
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            problems.append(("CgMaxIter", f"cg_max_iter must be >= 1, got {self.cg_max_iter}"))
        if problems:
            raise ValidationError(violations=problems)

    def max_iter(self, g: Grid) -> int:
        return self.cg_max_iter if self.cg_max_iter is not None else 50 * (g.nx + g.ny)


@dataclass(frozen=True, eq=False)
class PotentialSolution:
    u: np.ndarray  # (ny, nx), NaN outside
    phi: np.ndarray
    grad_phi: np.ndarray  # (ny, nx, 2), zero outside
    varpi: float
    delta: float
    cg_tol: float
    iterations: int = 0
    residual: float = 0.0


@dataclass(frozen=True)
class ExitFluxReport:
    total_exit_flux: float
    lower_bound: float
    upper_bound: float
    max_phi_boundary: float
    face_flux: np.ndarray = field(repr=False)  # per exit face, same order as Grid.boundary.exit_faces

    @property
    def within_bounds(self) -> bool:
        return self.lower_bound <= self.total_exit_flux <= self.upper_bound


def assemble_system(g: Grid, p: EllipticParams) -> tuple[sp.csr_matrix, np.ndarray]:
    """Matrix and right-hand side over INSIDE cells (ordering: ``g.index``)."""
    n = g.n_inside
    d2 = p.delta**2
    idx = g.index
    diag = np.ones(n)
    rhs = np.zeros(n)
    rows, cols, vals = [], [], []
    for d in Direction:
        h = g.spacing(d)
        c = d2 / h**2
        fc = g.face_class[..., d]
        js, is_ = np.nonzero(fc == INTERIOR)
        me = idx[js, is_]
        di, dj = d.offset
        nb = idx[js + dj, is_ + di]
        diag[me] += c
        rows.append(me)
        cols.append(nb)
        vals.append(np.full(me.size, -c))
        js, is_ = np.nonzero(fc == EXIT)
        me = idx[js, is_]
        # ghost 2 - u_in: (u_in - u_g)/h^2 = (2 u_in - 2)/h^2
        diag[me] += 2.0 * c
        rhs[me] += 2.0 * c
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    A.sum_duplicates()
    A.sort_indices()
    return A, rhs


def conjugate_gradient(A, b, tol, max_iter):
    """Jacobi-preconditioned CG; stops on ``||r|| <= tol * ||b||``."""
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0, 0.0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for k in range(max_iter + 1):
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return x, k, rnorm / bnorm
        if k == max_iter:
            break
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CgDivergence(
        f"CG did not reach relative residual {tol:g} in {max_iter} iterations "
        f"(last {np.linalg.norm(r) / bnorm:.3e})"
    )


def _ghost_neighbor(field: np.ndarray, g: Grid, d: Direction, wall, exit_) -> np.ndarray:
    """Neighbor values across direction ``d`` with ghost rules for boundary faces.

    ``wall`` and ``exit_`` are callables mapping the cell's own values to
    the ghost value.
    """
    di, dj = d.offset
    ny, nx = g.ny, g.nx
    pad = np.zeros((ny + 2, nx + 2) + field.shape[2:])
    pad[1:-1, 1:-1] = np.nan_to_num(field)
    nb = pad[1 + dj : ny + 1 + dj, 1 + di : nx + 1 + di].copy()
    fc = g.face_class[..., d]
    w = fc == WALL
    e = fc == EXIT
    nb[w] = wall(field[w])
    nb[e] = exit_(field[e])
    return nb


def _grad_u(u: np.ndarray, g: Grid) -> np.ndarray:
    mirror = lambda s: s  # noqa: E731
    dirichlet = lambda s: 2.0 - s  # noqa: E731
    grad = np.zeros((g.ny, g.nx, 2))
    east = _ghost_neighbor(u, g, Direction.RIGHT, mirror, dirichlet)
    west = _ghost_neighbor(u, g, Direction.LEFT, mirror, dirichlet)
    north = _ghost_neighbor(u, g, Direction.UP, mirror, dirichlet)
    south = _ghost_neighbor(u, g, Direction.DOWN, mirror, dirichlet)
    grad[..., 0] = (east - west) / (2.0 * g.hx)
    grad[..., 1] = (north - south) / (2.0 * g.hy)
    grad[~g.inside] = 0.0
    return grad


def gradient_phi(sol: PotentialSolution, g: Grid) -> np.ndarray:
    """Cell-centered grad(phi) = -delta * grad(u) / u."""
    gu = _grad_u(sol.u, g)
    out = np.zeros_like(gu)
    ins = g.inside
    out[ins] = -sol.delta * gu[ins] / sol.u[ins][:, None]
    return out


def solve_u(g: Grid, p: EllipticParams) -> PotentialSolution:
    A, b = assemble_system(g, p)
    x, iters, res = conjugate_gradient(A, b, p.cg_tol, p.max_iter(g))
    if not (np.all(x > 0) and np.all(x < 1.0 + p.cg_tol)):
        raise MaximumPrincipleViolation(
            f"u outside (0, 1 + cg_tol): min {x.min():.6g}, max {x.max():.6g}"
        )
    near_exit = (g.face_class == EXIT).any(axis=-1)[g.inside]
    if np.any(x[~near_exit] >= 1.0):
        raise MaximumPrincipleViolation("u >= 1 at a cell not adjacent to an exit")
    u = np.full((g.ny, g.nx), np.nan)
    u[g.inside] = x
    phi = np.full_like(u, np.nan)
    phi[g.inside] = -p.delta * np.log(x)
    partial = PotentialSolution(
        u=u, phi=phi, grad_phi=np.zeros((g.ny, g.nx, 2)), varpi=float(x.min()),
        delta=p.delta, cg_tol=p.cg_tol, iterations=iters, residual=res,
    )
    gp = gradient_phi(partial, g)
    for a in (u, phi, gp):
        a.setflags(write=False)
    return PotentialSolution(
        u=u, phi=phi, grad_phi=gp, varpi=float(x.min()),
        delta=p.delta, cg_tol=p.cg_tol, iterations=iters, residual=res,
    )


def exit_flux_report(sol: PotentialSolution, g: Grid, check: bool = True) -> ExitFluxReport:
    """Outward exit flux ``-grad(phi).nu`` per exit face, and its two-sided bound.

    The one-sided face derivative uses the ghost ``2 - u_in``, so
    ``du/dnu = 2 (1 - u_in) / h`` and ``u = 1`` at the face.
    """
    bs = g.boundary
    flux = np.empty(len(bs.exit_faces))
    total = 0.0
    for k, ((i, j), d) in enumerate(bs.exit_faces):
        f = sol.delta * 2.0 * (1.0 - sol.u[j, i]) / g.spacing(d)
        flux[k] = f
        total += f * g.face_length(d)
    if check and np.any(flux <= 0):
        k = int(np.argmin(flux))
        (i, j), d = bs.exit_faces[k]
        raise NonpositiveExitFlux(f"exit face ({i},{j}) {d.name}: flux {flux[k]:.3e} <= 0")
    # phi at face midpoints: 0 on exits, the inner cell's value on walls (mirror ghost)
    max_phi = 0.0
    for (i, j), _ in bs.wall_faces:
        max_phi = max(max_phi, float(sol.phi[j, i]))
    scale = g.area / sol.delta
    return ExitFluxReport(
        total_exit_flux=total,
        lower_bound=scale * np.exp(-max_phi / sol.delta),
        upper_bound=scale * np.exp(max_phi / sol.delta),
        max_phi_boundary=max_phi,
        face_flux=flux,
    )


@dataclass(frozen=True)
class CriticalPoint:
    cell: tuple[int, int]
    grad_norm: float
    eigenvalues: tuple[float, float]
    u: float

    @property
    def trace(self) -> float:
        return self.eigenvalues[0] + self.eigenvalues[1]


def hessian_u(sol: PotentialSolution, g: Grid) -> np.ndarray:
    """Central-difference Hessian of u, shape (ny, nx, 2, 2).

    Second derivatives reuse the ghost values of the solver, so the trace
    equals the discrete Laplacian.  Mixed terms difference the tangential
    first derivatives, which are even across walls and vanish on exits.
    """
    u = sol.u
    mirror = lambda s: s  # noqa: E731
    dirichlet = lambda s: 2.0 - s  # noqa: E731
    odd = lambda s: -s  # noqa: E731
    east = _ghost_neighbor(u, g, Direction.RIGHT, mirror, dirichlet)
    west = _ghost_neighbor(u, g, Direction.LEFT, mirror, dirichlet)
    north = _ghost_neighbor(u, g, Direction.UP, mirror, dirichlet)
    south = _ghost_neighbor(u, g, Direction.DOWN, mirror, dirichlet)
    uxx = (east - 2.0 * u + west) / g.hx**2
    uyy = (north - 2.0 * u + south) / g.hy**2
    gu = _grad_u(u, g)
    ux, uy = gu[..., 0], gu[..., 1]
    ux_n = _ghost_neighbor(ux, g, Direction.UP, mirror, odd)
    ux_s = _ghost_neighbor(ux, g, Direction.DOWN, mirror, odd)
    uy_e = _ghost_neighbor(uy, g, Direction.RIGHT, mirror, odd)
    uy_w = _ghost_neighbor(uy, g, Direction.LEFT, mirror, odd)
    uxy = 0.5 * ((ux_n - ux_s) / (2.0 * g.hy) + (uy_e - uy_w) / (2.0 * g.hx))
    H = np.zeros((g.ny, g.nx, 2, 2))
    H[..., 0, 0] = uxx
    H[..., 1, 1] = uyy
    H[..., 0, 1] = H[..., 1, 0] = uxy
    H[~g.inside] = 0.0
    return H


def critical_points(sol: PotentialSolution, g: Grid, grad_tol: float) -> list[CriticalPoint]:
    """Cells with ``|grad u| < grad_tol`` and the eigenvalues of their Hessian."""
    if not grad_tol > 0:
        raise ValueError("grad_tol must be > 0")
    gn = np.linalg.norm(_grad_u(sol.u, g), axis=-1)
    H = hessian_u(sol, g)
    out = []
    for i, j in g.inside_cells():
        if gn[j, i] < grad_tol:
            lam = np.linalg.eigvalsh(H[j, i])
            out.append(CriticalPoint((i, j), float(gn[j, i]), (float(lam[0]), float(lam[1])), float(sol.u[j, i])))
    return out
