"""Pure-Python inner loops for the built-in 2-D fields.

This module and the compiled ``_ckernels`` extension expose the same
functions and perform the same floating-point operations in the same order,
so both produce bit-identical results (the extension is built without
fast-math or FMA contraction).

Field kinds: 0 linear ``(m00, m01, m10, m11)``, 1 polar game ``(a, ...)``,
2 forsaken ``(a, ...)``. ``box`` is ``None`` or ``(lo0, lo1, hi0, hi1)``.
Inner-loop bases: 0 GDA, 1 EG (FBF when a box is present), 2 CEG+.
"""

from math import sqrt

LINEAR = 0
POLAR = 1
FORSAKEN = 2

GDA = 0
EG = 1
CEGPLUS = 2

COMPILED = False


def field(kind, p, x, y):
    if kind == LINEAR:
        return p[0] * x + p[1] * y, p[2] * x + p[3] * y
    if kind == POLAR:
        c = p[0] / 16.0
        r2 = x * x + y * y
        g = -1.0 + r2
        h = -9.0 + 16.0 * r2
        return c * x * g * h - y, c * y * g * h + x
    if kind == FORSAKEN:
        x2 = x * x
        x3 = x2 * x
        y2 = y * y
        y3 = y2 * y
        return (y - p[0]) + ((0.5 * x - 2.0 * x3) + x3 * x2), -x + ((0.5 * y - 2.0 * y3) + y3 * y2)
    raise ValueError(f"unknown field kind {kind}")


def _clamp(v, lo, hi):
    if v < lo:
        v = lo
    if v > hi:
        v = hi
    return v


def _step(kind, p, box, base, x, y, gamma, alpha):
    if base == GDA:
        fx, fy = field(kind, p, x, y)
        x = x - gamma * fx
        y = y - gamma * fy
        if box is not None:
            x = _clamp(x, box[0], box[2])
            y = _clamp(y, box[1], box[3])
        return x, y
    fx, fy = field(kind, p, x, y)
    hx = x - gamma * fx
    hy = y - gamma * fy
    if base == EG and box is None:
        gx, gy = field(kind, p, hx, hy)
        return x - gamma * gx, y - gamma * gy
    if box is not None:
        bx = _clamp(hx, box[0], box[2])
        by = _clamp(hy, box[1], box[3])
    else:
        bx = hx
        by = hy
    gx, gy = field(kind, p, bx, by)
    hbx = bx - gamma * gx
    hby = by - gamma * gy
    if base == EG:
        return x - (hx - hbx), y - (hy - hby)
    two_alpha = 2.0 * alpha
    return x + two_alpha * (hbx - hx), y + two_alpha * (hby - hy)


def la_inner(kind, p, box, base, x, y, gamma, alpha, tau):
    """Apply ``tau`` base steps starting from ``(x, y)``."""
    for _ in range(tau):
        x, y = _step(kind, p, box, base, x, y, gamma, alpha)
    return x, y


def prox_inner(kind, p, box, x, y, gamma, tau, noise):
    """``tau`` fixed-point steps ``w <- J(z - gamma (F(w) + noise_t))`` from w = z."""
    wx = x
    wy = y
    for t in range(tau):
        fx, fy = field(kind, p, wx, wy)
        if noise is not None:
            fx = fx + noise[t, 0]
            fy = fy + noise[t, 1]
        wx = x - gamma * fx
        wy = y - gamma * fy
        if box is not None:
            wx = _clamp(wx, box[0], box[2])
            wy = _clamp(wy, box[1], box[3])
    return wx, wy


def prox_until(kind, p, box, x, y, gamma, tol, cap):
    """Deterministic fixed-point steps until the step length is <= tol.

    Returns ``(wx, wy, steps, converged)``.
    """
    wx = x
    wy = y
    for t in range(cap):
        fx, fy = field(kind, p, wx, wy)
        nx = x - gamma * fx
        ny = y - gamma * fy
        if box is not None:
            nx = _clamp(nx, box[0], box[2])
            ny = _clamp(ny, box[1], box[3])
        dx = nx - wx
        dy = ny - wy
        wx = nx
        wy = ny
        if sqrt(dx * dx + dy * dy) <= tol:
            return wx, wy, t + 1, True
    return wx, wy, cap, False
