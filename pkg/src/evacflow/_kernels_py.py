"""Pure-Python/numpy kernels.

Reference implementation of the compiled ``_kernels`` module; every
floating-point expression here is mirrored there in the same order so
both backends agree bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

LAW_LINEAR, LAW_TABLE = 0, 1
EXITED, STALLED, TIME_CAPPED = 0, 1, 2
CLS_INSIDE, CLS_WALL, CLS_EXIT = 0, 1, 2
# face directions, same numbering as geometry.Direction
RIGHT, LEFT, UP, DOWN = 0, 1, 2, 3


# ---------------------------------------------------------------- flux law


def law_q(r, kind, r_max, v_max, nodes, vals, slopes):
    r = np.asarray(r, dtype=float)
    if kind == LAW_LINEAR:
        return r * (v_max * (1.0 - r / r_max))
    j = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, nodes.size - 2)
    return r * (vals[j] + slopes[j] * (r - nodes[j]))


def law_dq(r, kind, r_max, v_max, nodes, vals, slopes):
    """Derivative of q; on a table law, the right-sided derivative at nodes."""
    r = np.asarray(r, dtype=float)
    if kind == LAW_LINEAR:
        return v_max * (1.0 - 2.0 * r / r_max)
    j = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, nodes.size - 2)
    return vals[j] + slopes[j] * (2.0 * r - nodes[j])


def law_max_abs_dq(a, b, kind, r_max, v_max, nodes, vals, slopes):
    """max |q'| over [min(a, b), max(a, b)], elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    if kind == LAW_LINEAR:
        return np.maximum(
            np.abs(v_max * (1.0 - 2.0 * lo / r_max)), np.abs(v_max * (1.0 - 2.0 * hi / r_max))
        )
    out = np.zeros(lo.shape)
    for k in range(nodes.size - 1):
        r0, r1 = nodes[k], nodes[k + 1]
        hit = (r0 <= hi) & (r1 >= lo)
        x0 = np.maximum(lo, r0)
        x1 = np.minimum(hi, r1)
        d0 = np.abs(vals[k] + slopes[k] * (2.0 * x0 - r0))
        d1 = np.abs(vals[k] + slopes[k] * (2.0 * x1 - r0))
        out = np.where(hit, np.maximum(out, np.maximum(d0, d1)), out)
    return out


def rusanov(rl, rr, s, kind, r_max, v_max, nodes, vals, slopes):
    ql = law_q(rl, kind, r_max, v_max, nodes, vals, slopes)
    qr = law_q(rr, kind, r_max, v_max, nodes, vals, slopes)
    alpha = np.abs(s) * law_max_abs_dq(rl, rr, kind, r_max, v_max, nodes, vals, slopes)
    return 0.5 * s * (ql + qr) - 0.5 * alpha * (rr - rl)


# ---------------------------------------------------------------- FV step


def fv_step(rho, sx, sy, dt, hx, hy, kind, r_max, v_max, nodes, vals, slopes):
    """One explicit update.  Returns (rho_new, fx, fy).

    ``sx`` has shape (ny, nx + 1): face k of row j separates columns k - 1
    and k, with zero density beyond the array.  ``sy`` is (ny + 1, nx).
    """
    ny, nx = rho.shape
    px = np.zeros((ny, nx + 2))
    px[:, 1:-1] = rho
    py = np.zeros((ny + 2, nx))
    py[1:-1, :] = rho
    law = (kind, r_max, v_max, nodes, vals, slopes)
    fx = rusanov(px[:, :-1], px[:, 1:], sx, *law)
    fy = rusanov(py[:-1, :], py[1:, :], sy, *law)
    cx = dt / hx
    cy = dt / hy
    new = rho - cx * (fx[:, 1:] - fx[:, :-1]) - cy * (fy[1:, :] - fy[:-1, :])
    return new, fx, fy


# ---------------------------------------------------------------- paths


def sample(x, y, wx, wy, hx, hy, nx, ny):
    gx = x / hx + 0.5
    gy = y / hy + 0.5
    i0 = int(math.floor(gx))
    j0 = int(math.floor(gy))
    i0 = 0 if i0 < 0 else (nx if i0 > nx else i0)
    j0 = 0 if j0 < 0 else (ny if j0 > ny else j0)
    fx = gx - i0
    fy = gy - j0
    fx = 0.0 if fx < 0.0 else (1.0 if fx > 1.0 else fx)
    fy = 0.0 if fy < 0.0 else (1.0 if fy > 1.0 else fy)
    a = (1.0 - fy) * ((1.0 - fx) * wx[j0, i0] + fx * wx[j0, i0 + 1]) + fy * (
        (1.0 - fx) * wx[j0 + 1, i0] + fx * wx[j0 + 1, i0 + 1]
    )
    b = (1.0 - fy) * ((1.0 - fx) * wy[j0, i0] + fx * wy[j0, i0 + 1]) + fy * (
        (1.0 - fx) * wy[j0 + 1, i0] + fx * wy[j0 + 1, i0 + 1]
    )
    return float(a), float(b)


def rk4(x, y, dt, wx, wy, hx, hy, nx, ny):
    k1x, k1y = sample(x, y, wx, wy, hx, hy, nx, ny)
    k2x, k2y = sample(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, wx, wy, hx, hy, nx, ny)
    k3x, k3y = sample(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, wx, wy, hx, hy, nx, ny)
    k4x, k4y = sample(x + dt * k3x, y + dt * k3y, wx, wy, hx, hy, nx, ny)
    h6 = dt / 6.0
    return (
        x + h6 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + h6 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
    )


def _norm(a, b):
    return math.sqrt(a * a + b * b)


def _exit_fraction(x, y, qx, qy, axis, line, sgn, dt, wx, wy, hx, hy, nx, ny):
    """Fraction of the step at which the RK4 sub-step lands on the exit line."""
    g0 = sgn * ((x if axis == 0 else y) - line)
    g1 = sgn * ((qx if axis == 0 else qy) - line)
    if g0 < 0.0 < g1:
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            mx, my = rk4(x, y, mid * dt, wx, wy, hx, hy, nx, ny)
            if sgn * ((mx if axis == 0 else my) - line) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15:
                break
        return hi
    d = g1 - g0
    if d > 0.0:
        tau = -g0 / d
        return 0.0 if tau < 0.0 else (1.0 if tau > 1.0 else tau)
    return 1.0


def trace(x0, y0, ci, cj, wx, wy, cls, hx, hy, nx, ny, dt, n_steps, stall_tol, stall_window, store):
    """Integrate one path.

    Returns ``(samples, outcome, t_end, face_i, face_j, face_dir, wnorm)``;
    ``samples`` is an (m, 3) array of (t, x, y), holding only the first and
    last rows unless ``store``.
    """
    rows = [(0.0, x0, y0)]
    x, y = x0, y0
    stall = 0
    outcome = TIME_CAPPED
    t_end = 0.0
    fi = fj = fd = -1
    wn = _norm(*sample(x, y, wx, wy, hx, hy, nx, ny))
    for k in range(n_steps):
        qx, qy = rk4(x, y, dt, wx, wy, hx, hy, nx, ny)
        # walk the segment through cells; clamp at walls, stop at exits
        cx, cy = x, y
        tx, ty = qx, qy
        exited = False
        for _ in range(4 * (nx + ny) + 8):
            dx = tx - cx
            dy = ty - cy
            taux = math.inf
            tauy = math.inf
            if dx > 0.0:
                taux = ((ci + 1) * hx - cx) / dx
            elif dx < 0.0:
                taux = (ci * hx - cx) / dx
            if dy > 0.0:
                tauy = ((cj + 1) * hy - cy) / dy
            elif dy < 0.0:
                tauy = (cj * hy - cy) / dy
            if taux > 1.0 and tauy > 1.0:
                break
            if taux <= tauy:
                axis = 0
                if dx > 0.0:
                    ni, nj, line, sgn, d = ci + 1, cj, (ci + 1) * hx, 1.0, RIGHT
                else:
                    ni, nj, line, sgn, d = ci - 1, cj, ci * hx, -1.0, LEFT
                ex = line
                ey = cy + taux * dy
            else:
                axis = 1
                if dy > 0.0:
                    ni, nj, line, sgn, d = ci, cj + 1, (cj + 1) * hy, 1.0, UP
                else:
                    ni, nj, line, sgn, d = ci, cj - 1, cj * hy, -1.0, DOWN
                ex = cx + tauy * dx
                ey = line
            c = cls[nj + 1, ni + 1]
            if c == CLS_INSIDE:
                ci, cj = ni, nj
                cx, cy = ex, ey
            elif c == CLS_EXIT:
                tau = _exit_fraction(x, y, qx, qy, axis, line, sgn, dt, wx, wy, hx, hy, nx, ny)
                mx, my = rk4(x, y, tau * dt, wx, wy, hx, hy, nx, ny)
                if axis == 0:
                    mx = line
                    lo, hi = cj * hy, (cj + 1) * hy
                    my = lo if my < lo else (hi if my > hi else my)
                else:
                    my = line
                    lo, hi = ci * hx, (ci + 1) * hx
                    mx = lo if mx < lo else (hi if mx > hi else mx)
                t_end = k * dt + tau * dt
                x, y = mx, my
                fi, fj, fd = ci, cj, d
                exited = True
                break
            else:
                if axis == 0:
                    tx = line
                else:
                    ty = line
                cx, cy = ex, ey
        if exited:
            outcome = EXITED
            wn = _norm(*sample(x, y, wx, wy, hx, hy, nx, ny))
            rows.append((t_end, x, y))
            break
        x, y = tx, ty
        t_end = (k + 1) * dt
        wn = _norm(*sample(x, y, wx, wy, hx, hy, nx, ny))
        if store:
            rows.append((t_end, x, y))
        if wn < stall_tol:
            stall += 1
            if stall >= stall_window:
                outcome = STALLED
                break
        else:
            stall = 0
    if not store and outcome != EXITED and t_end > 0.0:
        rows.append((t_end, x, y))
    return np.array(rows, dtype=float), outcome, t_end, fi, fj, fd, wn


def trace_many(starts, cells, wx, wy, cls, hx, hy, nx, ny, dt, n_steps, stall_tol, stall_window):
    m = starts.shape[0]
    outcome = np.empty(m, dtype=np.int64)
    t_out = np.empty(m)
    for k in range(m):
        _, o, t, _, _, _, _ = trace(
            float(starts[k, 0]), float(starts[k, 1]), int(cells[k, 0]), int(cells[k, 1]),
            wx, wy, cls, hx, hy, nx, ny, dt, n_steps, stall_tol, stall_window, False,
        )
        outcome[k] = o
        t_out[k] = t
    return outcome, t_out
