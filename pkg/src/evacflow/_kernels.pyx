# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: finite-volume step and path integration.

Mirrors ``_kernels_py`` expression by expression.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt, INFINITY

cnp.import_array()

LAW_LINEAR = 0
LAW_TABLE = 1
EXITED = 0
STALLED = 1
TIME_CAPPED = 2

cdef enum:
    EXITED_C = 0
    STALLED_C = 1
    TIME_CAPPED_C = 2

cdef int CLS_INSIDE = 0
cdef int CLS_EXIT = 2
cdef int RIGHT = 0, LEFT = 1, UP = 2, DOWN = 3


# ---------------------------------------------------------------- flux law

cdef struct Law:
    int kind
    double r_max
    double v_max
    int n
    const double* nodes
    const double* vals
    const double* slopes


cdef inline int _segment(const Law* L, double r) nogil:
    # largest j with nodes[j] <= r, clipped to [0, n - 2]
    cdef int j = 0
    while j + 1 < L.n and L.nodes[j + 1] <= r:
        j += 1
    if j > L.n - 2:
        j = L.n - 2
    return j


cdef inline double _q(const Law* L, double r) nogil:
    cdef int j
    if L.kind == 0:
        return r * (L.v_max * (1.0 - r / L.r_max))
    j = _segment(L, r)
    return r * (L.vals[j] + L.slopes[j] * (r - L.nodes[j]))


cdef inline double _max_abs_dq(const Law* L, double a, double b) nogil:
    cdef double lo = a if a < b else b
    cdef double hi = b if a < b else a
    cdef double out = 0.0, d0, d1, x0, x1, r0, r1
    cdef int k
    if L.kind == 0:
        d0 = fabs(L.v_max * (1.0 - 2.0 * lo / L.r_max))
        d1 = fabs(L.v_max * (1.0 - 2.0 * hi / L.r_max))
        return d0 if d0 > d1 else d1
    for k in range(L.n - 1):
        r0 = L.nodes[k]
        r1 = L.nodes[k + 1]
        if r0 <= hi and r1 >= lo:
            x0 = lo if lo > r0 else r0
            x1 = hi if hi < r1 else r1
            d0 = fabs(L.vals[k] + L.slopes[k] * (2.0 * x0 - r0))
            d1 = fabs(L.vals[k] + L.slopes[k] * (2.0 * x1 - r0))
            if d1 > d0:
                d0 = d1
            if d0 > out:
                out = d0
    return out


cdef inline double _rusanov(const Law* L, double rl, double rr, double s) nogil:
    cdef double ql = _q(L, rl)
    cdef double qr = _q(L, rr)
    cdef double alpha = fabs(s) * _max_abs_dq(L, rl, rr)
    return 0.5 * s * (ql + qr) - 0.5 * alpha * (rr - rl)


def rusanov(double rl, double rr, double s, int kind, double r_max, double v_max, nodes, vals, slopes):
    """Scalar Rusanov flux (for tests and benchmarks)."""
    cdef double[::1] nd = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double[::1] vl = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[::1] sl = np.ascontiguousarray(slopes, dtype=np.float64)
    cdef Law L
    L.kind = kind
    L.r_max = r_max
    L.v_max = v_max
    L.n = nd.shape[0]
    L.nodes = &nd[0]
    L.vals = &vl[0]
    L.slopes = &sl[0]
    return _rusanov(&L, rl, rr, s)


# ---------------------------------------------------------------- FV step

def fv_step(const double[:, ::1] rho, const double[:, ::1] sx, const double[:, ::1] sy,
            double dt, double hx, double hy, int kind, double r_max, double v_max,
            nodes, vals, slopes):
    cdef Py_ssize_t ny = rho.shape[0], nx = rho.shape[1], i, j
    cdef double[::1] nd = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double[::1] vl = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[::1] sl = np.ascontiguousarray(slopes, dtype=np.float64)
    cdef Law L
    L.kind = kind
    L.r_max = r_max
    L.v_max = v_max
    L.n = nd.shape[0]
    L.nodes = &nd[0]
    L.vals = &vl[0]
    L.slopes = &sl[0]
    fx_a = np.empty((ny, nx + 1))
    fy_a = np.empty((ny + 1, nx))
    new_a = np.empty((ny, nx))
    cdef double[:, ::1] fx = fx_a
    cdef double[:, ::1] fy = fy_a
    cdef double[:, ::1] new = new_a
    cdef double rl, rr
    cdef double cx = dt / hx
    cdef double cy = dt / hy
    with nogil:
        for j in range(ny):
            for i in range(nx + 1):
                rl = rho[j, i - 1] if i > 0 else 0.0
                rr = rho[j, i] if i < nx else 0.0
                fx[j, i] = _rusanov(&L, rl, rr, sx[j, i])
        for j in range(ny + 1):
            for i in range(nx):
                rl = rho[j - 1, i] if j > 0 else 0.0
                rr = rho[j, i] if j < ny else 0.0
                fy[j, i] = _rusanov(&L, rl, rr, sy[j, i])
        for j in range(ny):
            for i in range(nx):
                new[j, i] = rho[j, i] - cx * (fx[j, i + 1] - fx[j, i]) - cy * (fy[j + 1, i] - fy[j, i])
    return new_a, fx_a, fy_a


# ---------------------------------------------------------------- paths

cdef struct Field:
    const double* wx
    const double* wy
    Py_ssize_t stride
    double hx
    double hy
    int nx
    int ny


cdef inline void _sample(const Field* F, double x, double y, double* ox, double* oy) nogil:
    cdef double gx = x / F.hx + 0.5
    cdef double gy = y / F.hy + 0.5
    cdef int i0 = <int>floor(gx)
    cdef int j0 = <int>floor(gy)
    cdef double fx, fy
    cdef Py_ssize_t s = F.stride, a00, a01, a10, a11
    if i0 < 0:
        i0 = 0
    elif i0 > F.nx:
        i0 = F.nx
    if j0 < 0:
        j0 = 0
    elif j0 > F.ny:
        j0 = F.ny
    fx = gx - i0
    fy = gy - j0
    if fx < 0.0:
        fx = 0.0
    elif fx > 1.0:
        fx = 1.0
    if fy < 0.0:
        fy = 0.0
    elif fy > 1.0:
        fy = 1.0
    a00 = j0 * s + i0
    a01 = a00 + 1
    a10 = a00 + s
    a11 = a10 + 1
    ox[0] = (1.0 - fy) * ((1.0 - fx) * F.wx[a00] + fx * F.wx[a01]) + fy * (
        (1.0 - fx) * F.wx[a10] + fx * F.wx[a11])
    oy[0] = (1.0 - fy) * ((1.0 - fx) * F.wy[a00] + fx * F.wy[a01]) + fy * (
        (1.0 - fx) * F.wy[a10] + fx * F.wy[a11])


cdef inline void _rk4(const Field* F, double x, double y, double dt, double* ox, double* oy) nogil:
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y, h6
    _sample(F, x, y, &k1x, &k1y)
    _sample(F, x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, &k2x, &k2y)
    _sample(F, x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, &k3x, &k3y)
    _sample(F, x + dt * k3x, y + dt * k3y, &k4x, &k4y)
    h6 = dt / 6.0
    ox[0] = x + h6 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    oy[0] = y + h6 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)


cdef inline double _hypot(double a, double b) nogil:
    return sqrt(a * a + b * b)


cdef double _exit_fraction(const Field* F, double x, double y, double qx, double qy,
                           int axis, double line, double sgn, double dt) nogil:
    cdef double g0 = sgn * ((x if axis == 0 else y) - line)
    cdef double g1 = sgn * ((qx if axis == 0 else qy) - line)
    cdef double lo, hi, mid, mx, my, d, tau
    cdef int it
    if g0 < 0.0 and 0.0 < g1:
        lo = 0.0
        hi = 1.0
        for it in range(60):
            mid = 0.5 * (lo + hi)
            _rk4(F, x, y, mid * dt, &mx, &my)
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
        if tau < 0.0:
            return 0.0
        if tau > 1.0:
            return 1.0
        return tau
    return 1.0


cdef struct PathResult:
    int outcome
    double t_end
    double x
    double y
    int fi
    int fj
    int fd
    double wn
    Py_ssize_t n_rows


cdef int _trace(const Field* F, const signed char* cls, double x0, double y0, int ci, int cj,
                double dt, Py_ssize_t n_steps, double stall_tol, int stall_window,
                bint store, double* buf, Py_ssize_t cap, PathResult* res) nogil:
    """Core loop; with ``store`` writes (t, x, y) rows into ``buf`` while ``cap`` allows.

    Returns 1 if the buffer overflowed (caller retries with a larger one).
    """
    cdef double x = x0, y = y0, qx, qy, cx, cy, tx, ty, dx, dy, taux, tauy
    cdef double line = 0.0, sgn = 0.0, ex = 0.0, ey = 0.0, tau, mx, my, lo, hi, wxv, wyv
    cdef double t_end = 0.0
    cdef int stall = 0, outcome = TIME_CAPPED_C, axis, ni = 0, nj = 0, d = 0, c, exited, it
    cdef Py_ssize_t k, rows = 0, cstride = F.nx + 2
    cdef int max_walk = 4 * (F.nx + F.ny) + 8
    res.fi = -1
    res.fj = -1
    res.fd = -1
    if store and cap > 0:
        buf[0] = 0.0
        buf[1] = x0
        buf[2] = y0
    rows = 1
    _sample(F, x, y, &wxv, &wyv)
    res.wn = _hypot(wxv, wyv)
    for k in range(n_steps):
        _rk4(F, x, y, dt, &qx, &qy)
        cx = x
        cy = y
        tx = qx
        ty = qy
        exited = 0
        for it in range(max_walk):
            dx = tx - cx
            dy = ty - cy
            taux = INFINITY
            tauy = INFINITY
            if dx > 0.0:
                taux = ((ci + 1) * F.hx - cx) / dx
            elif dx < 0.0:
                taux = (ci * F.hx - cx) / dx
            if dy > 0.0:
                tauy = ((cj + 1) * F.hy - cy) / dy
            elif dy < 0.0:
                tauy = (cj * F.hy - cy) / dy
            if taux > 1.0 and tauy > 1.0:
                break
            if taux <= tauy:
                axis = 0
                if dx > 0.0:
                    ni = ci + 1; nj = cj; line = (ci + 1) * F.hx; sgn = 1.0; d = RIGHT
                else:
                    ni = ci - 1; nj = cj; line = ci * F.hx; sgn = -1.0; d = LEFT
                ex = line
                ey = cy + taux * dy
            else:
                axis = 1
                if dy > 0.0:
                    ni = ci; nj = cj + 1; line = (cj + 1) * F.hy; sgn = 1.0; d = UP
                else:
                    ni = ci; nj = cj - 1; line = cj * F.hy; sgn = -1.0; d = DOWN
                ex = cx + tauy * dx
                ey = line
            c = cls[(nj + 1) * cstride + ni + 1]
            if c == CLS_INSIDE:
                ci = ni
                cj = nj
                cx = ex
                cy = ey
            elif c == CLS_EXIT:
                tau = _exit_fraction(F, x, y, qx, qy, axis, line, sgn, dt)
                _rk4(F, x, y, tau * dt, &mx, &my)
                if axis == 0:
                    mx = line
                    lo = cj * F.hy
                    hi = (cj + 1) * F.hy
                    my = lo if my < lo else (hi if my > hi else my)
                else:
                    my = line
                    lo = ci * F.hx
                    hi = (ci + 1) * F.hx
                    mx = lo if mx < lo else (hi if mx > hi else mx)
                t_end = k * dt + tau * dt
                x = mx
                y = my
                res.fi = ci
                res.fj = cj
                res.fd = d
                exited = 1
                break
            else:
                if axis == 0:
                    tx = line
                else:
                    ty = line
                cx = ex
                cy = ey
        if exited:
            outcome = EXITED_C
            _sample(F, x, y, &wxv, &wyv)
            res.wn = _hypot(wxv, wyv)
            if store:
                if rows < cap:
                    buf[3 * rows] = t_end
                    buf[3 * rows + 1] = x
                    buf[3 * rows + 2] = y
                rows += 1
            break
        x = tx
        y = ty
        t_end = (k + 1) * dt
        _sample(F, x, y, &wxv, &wyv)
        res.wn = _hypot(wxv, wyv)
        if store:
            if rows < cap:
                buf[3 * rows] = t_end
                buf[3 * rows + 1] = x
                buf[3 * rows + 2] = y
            rows += 1
        if res.wn < stall_tol:
            stall += 1
            if stall >= stall_window:
                outcome = STALLED_C
                break
        else:
            stall = 0
    res.outcome = outcome
    res.t_end = t_end
    res.x = x
    res.y = y
    res.n_rows = rows
    return 1 if (store and rows > cap) else 0


cdef Field _make_field(const double[:, ::1] wx, const double[:, ::1] wy,
                       double hx, double hy, int nx, int ny):
    cdef Field F
    F.wx = &wx[0, 0]
    F.wy = &wy[0, 0]
    F.stride = wx.shape[1]
    F.hx = hx
    F.hy = hy
    F.nx = nx
    F.ny = ny
    return F


def sample(double x, double y, const double[:, ::1] wx, const double[:, ::1] wy,
           double hx, double hy, int nx, int ny):
    cdef Field F = _make_field(wx, wy, hx, hy, nx, ny)
    cdef double a, b
    _sample(&F, x, y, &a, &b)
    return a, b


def rk4(double x, double y, double dt, const double[:, ::1] wx, const double[:, ::1] wy,
        double hx, double hy, int nx, int ny):
    cdef Field F = _make_field(wx, wy, hx, hy, nx, ny)
    cdef double a, b
    _rk4(&F, x, y, dt, &a, &b)
    return a, b


def trace(double x0, double y0, int ci, int cj, const double[:, ::1] wx, const double[:, ::1] wy,
          const signed char[:, ::1] cls, double hx, double hy, int nx, int ny, double dt,
          Py_ssize_t n_steps, double stall_tol, int stall_window, bint store):
    cdef Field F = _make_field(wx, wy, hx, hy, nx, ny)
    cdef PathResult res
    cdef Py_ssize_t cap = (n_steps + 2 if n_steps < 4096 else 4096) if store else 1
    cdef double[:, ::1] buf
    while True:
        arr = np.empty((cap, 3))
        buf = arr
        if _trace(&F, &cls[0, 0], x0, y0, ci, cj, dt, n_steps, stall_tol, stall_window,
                  store, &buf[0, 0], cap, &res) == 0:
            break
        cap = res.n_rows
    if store:
        out = arr[: res.n_rows]
    elif res.outcome == EXITED_C or res.t_end > 0.0:
        out = np.array([[0.0, x0, y0], [res.t_end, res.x, res.y]])
    else:
        out = np.array([[0.0, x0, y0]])
    return out, res.outcome, res.t_end, res.fi, res.fj, res.fd, res.wn


def trace_many(const double[:, ::1] starts, const long[:, ::1] cells,
               const double[:, ::1] wx, const double[:, ::1] wy, const signed char[:, ::1] cls,
               double hx, double hy, int nx, int ny, double dt, Py_ssize_t n_steps,
               double stall_tol, int stall_window):
    cdef Field F = _make_field(wx, wy, hx, hy, nx, ny)
    cdef Py_ssize_t m = starts.shape[0], k
    outcome_a = np.empty(m, dtype=np.int64)
    t_a = np.empty(m)
    cdef long[::1] outcome = outcome_a
    cdef double[::1] t_out = t_a
    cdef PathResult res
    cdef double dummy[3]
    with nogil:
        for k in range(m):
            _trace(&F, &cls[0, 0], starts[k, 0], starts[k, 1], <int>cells[k, 0], <int>cells[k, 1],
                   dt, n_steps, stall_tol, stall_window, False, dummy, 1, &res)
            outcome[k] = res.outcome
            t_out[k] = res.t_end
    return outcome_a, t_a
