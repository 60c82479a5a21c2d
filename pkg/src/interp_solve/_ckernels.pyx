# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; mirrors ``_pykernels`` operation for operation."""

from libc.math cimport sqrt

cdef enum:
    LINEAR = 0
    POLAR = 1
    FORSAKEN = 2

cdef enum:
    GDA = 0
    EG = 1
    CEGPLUS = 2

COMPILED = True


cdef struct Params:
    int kind
    double p0, p1, p2, p3
    bint has_box
    double lo0, lo1, hi0, hi1


cdef inline void _field(const Params* P, double x, double y, double* fx, double* fy) noexcept nogil:
    cdef double c, r2, g, h, x2, x3, y2, y3
    if P.kind == LINEAR:
        fx[0] = P.p0 * x + P.p1 * y
        fy[0] = P.p2 * x + P.p3 * y
    elif P.kind == POLAR:
        c = P.p0 / 16.0
        r2 = x * x + y * y
        g = -1.0 + r2
        h = -9.0 + 16.0 * r2
        fx[0] = c * x * g * h - y
        fy[0] = c * y * g * h + x
    else:
        x2 = x * x
        x3 = x2 * x
        y2 = y * y
        y3 = y2 * y
        fx[0] = (y - P.p0) + ((0.5 * x - 2.0 * x3) + x3 * x2)
        fy[0] = -x + ((0.5 * y - 2.0 * y3) + y3 * y2)


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        v = lo
    if v > hi:
        v = hi
    return v


cdef inline void _project(const Params* P, double* x, double* y) noexcept nogil:
    if P.has_box:
        x[0] = _clamp(x[0], P.lo0, P.hi0)
        y[0] = _clamp(y[0], P.lo1, P.hi1)


cdef Params _params(int kind, p, box) except *:
    cdef Params P
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown field kind {kind}")
    P.kind = kind
    P.p0 = p[0]
    P.p1 = p[1]
    P.p2 = p[2]
    P.p3 = p[3]
    if box is None:
        P.has_box = False
        P.lo0 = P.lo1 = P.hi0 = P.hi1 = 0.0
    else:
        P.has_box = True
        P.lo0 = box[0]
        P.lo1 = box[1]
        P.hi0 = box[2]
        P.hi1 = box[3]
    return P


cdef inline void _step(const Params* P, int base, double* x, double* y,
                       double gamma, double alpha) noexcept nogil:
    cdef double fx, fy, hx, hy, bx, by, gx, gy, hbx, hby, two_alpha
    _field(P, x[0], y[0], &fx, &fy)
    if base == GDA:
        x[0] = x[0] - gamma * fx
        y[0] = y[0] - gamma * fy
        _project(P, x, y)
        return
    hx = x[0] - gamma * fx
    hy = y[0] - gamma * fy
    if base == EG and not P.has_box:
        _field(P, hx, hy, &gx, &gy)
        x[0] = x[0] - gamma * gx
        y[0] = y[0] - gamma * gy
        return
    bx = hx
    by = hy
    _project(P, &bx, &by)
    _field(P, bx, by, &gx, &gy)
    hbx = bx - gamma * gx
    hby = by - gamma * gy
    if base == EG:
        x[0] = x[0] - (hx - hbx)
        y[0] = y[0] - (hy - hby)
        return
    two_alpha = 2.0 * alpha
    x[0] = x[0] + two_alpha * (hbx - hx)
    y[0] = y[0] + two_alpha * (hby - hy)


def field(int kind, p, double x, double y):
    cdef Params P = _params(kind, p, None)
    cdef double fx, fy
    _field(&P, x, y, &fx, &fy)
    return fx, fy


def la_inner(int kind, p, box, int base, double x, double y, double gamma,
             double alpha, long tau):
    cdef Params P = _params(kind, p, box)
    cdef long t
    with nogil:
        for t in range(tau):
            _step(&P, base, &x, &y, gamma, alpha)
    return x, y


def prox_inner(int kind, p, box, double x, double y, double gamma, long tau, noise):
    cdef Params P = _params(kind, p, box)
    cdef double wx = x, wy = y, fx, fy
    cdef const double[:, ::1] nz
    cdef bint noisy = noise is not None
    cdef long t
    if noisy:
        nz = noise
        if nz.shape[0] < tau or nz.shape[1] != 2:
            raise ValueError("noise block has the wrong shape")
    with nogil:
        for t in range(tau):
            _field(&P, wx, wy, &fx, &fy)
            if noisy:
                fx = fx + nz[t, 0]
                fy = fy + nz[t, 1]
            wx = x - gamma * fx
            wy = y - gamma * fy
            _project(&P, &wx, &wy)
    return wx, wy


def prox_until(int kind, p, box, double x, double y, double gamma, double tol, long cap):
    cdef Params P = _params(kind, p, box)
    cdef double wx = x, wy = y, nx, ny, fx, fy, dx, dy
    cdef long t
    cdef long steps = cap
    cdef bint converged = False
    with nogil:
        for t in range(cap):
            _field(&P, wx, wy, &fx, &fy)
            nx = x - gamma * fx
            ny = y - gamma * fy
            _project(&P, &nx, &ny)
            dx = nx - wx
            dy = ny - wy
            wx = nx
            wy = ny
            if sqrt(dx * dx + dy * dy) <= tol:
                steps = t + 1
                converged = True
                break
    return wx, wy, steps, converged
