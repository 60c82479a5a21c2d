"""Synthetic two-player problems and empirical estimators of their constants.

All built-in problems are 2-D fields ``F(x, y) = (d/dx phi, -d/dy phi)`` (or a
non-potential variant for the polar game) with closed-form Jacobians. Their
scalar evaluation goes through the same arithmetic as the kernel backend so
that numpy, pure-Python and compiled runs agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, root

from . import _pykernels as pk
from .core import (
    Box,
    DimensionError,
    EstimationError,
    Identity,
    ParameterError,
    ResolventMap,
    UnsupportedError,
    VectorField,
    as_point,
    sample_box,
)

__all__ = [
    "ProblemSpec",
    "quadratic_field",
    "quadratic_from_constants",
    "polar_game_field",
    "forsaken_field",
    "lne_forsaken_field",
    "linear_field",
    "sample_pairs",
    "estimate_lipschitz",
    "estimate_comonotonicity",
    "estimate_star_rho",
    "PROBLEMS",
    "make_problem",
]

ZERO_TOL = 1e-10
DEGENERATE = 1e-12

POLAR_RADIUS = 1.1
FORSAKEN_RADIUS = 1.5


@dataclass(frozen=True)
class ProblemSpec:
    """An inclusion problem ``0 in A z + F z`` with its known constants.

    ``rho_range`` is an annotation for problems whose comonotonicity constant
    is only known to lie in an interval; ``potential`` is the scalar function
    whose (descent, ascent) gradient is ``F`` when one exists.
    """

    field: VectorField
    resolvent: ResolventMap
    name: str
    rho: Optional[float] = None
    lipschitz: Optional[float] = None
    known_zero: Optional[np.ndarray] = None
    rho_range: Optional[tuple] = None
    potential: Optional[Callable] = None
    params: dict = dc_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.field.dim

    @property
    def is_linear(self) -> bool:
        return self.field.is_linear

    @property
    def constrained(self) -> bool:
        return not self.resolvent.is_identity

    @property
    def in_class(self) -> bool:
        """Whether the constants certify rho > -1/(2L)."""
        if self.rho is None or self.lipschitz is None:
            return False
        return self.rho > -1.0 / (2.0 * self.lipschitz)

    def box_tuple(self) -> Optional[tuple]:
        """Box as the ``(lo0, lo1, hi0, hi1)`` tuple the kernels expect."""
        b = self.resolvent.bounds()
        if b is None:
            return None
        lo, hi = b
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def exact_resolvent(self, gamma: float, z) -> np.ndarray:
        """``(I + gamma M)^-1 z`` for an unconstrained linear field."""
        if not self.is_linear or self.constrained:
            raise UnsupportedError(
                f"{self.name}: closed-form resolvent needs an unconstrained linear field"
            )
        M = self.field.matrix
        return np.linalg.solve(np.eye(self.dim) + gamma * M, as_point(z, self.dim))

    def nearest_zero(self, z0) -> np.ndarray:
        if self.known_zero is None:
            raise EstimationError(f"{self.name} has no known zero")
        return self.known_zero

    def summary(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "lipschitz": self.lipschitz,
            "rho": self.rho,
            "rho_range": list(self.rho_range) if self.rho_range else None,
            "known_zero": None if self.known_zero is None else self.known_zero.tolist(),
        }


def _check_zero(spec: ProblemSpec) -> None:
    z = spec.known_zero
    fz = spec.field.eval(z)
    b = spec.resolvent.bounds()
    if b is None:
        if np.linalg.norm(fz) > ZERO_TOL:
            raise ParameterError(f"{spec.name}: F(known_zero) = {fz} is not zero")
        return
    lo, hi = b
    for i in range(z.size):
        # -F must lie in the normal cone of the box at z
        if z[i] <= lo[i]:
            ok = fz[i] >= -ZERO_TOL
        elif z[i] >= hi[i]:
            ok = fz[i] <= ZERO_TOL
        else:
            ok = abs(fz[i]) <= ZERO_TOL
        if not ok:
            raise ParameterError(f"{spec.name}: known_zero violates stationarity in coordinate {i}")


def _kernel_field(kind: int, p: tuple, batch, jac, **meta) -> VectorField:
    def func(z):
        fx, fy = pk.field(kind, p, float(z[0]), float(z[1]))
        return np.array([fx, fy])

    return VectorField(func=func, dim=2, kernel=(kind, p), batch_func=batch, jacobian=jac, **meta)


# -- linear fields ----------------------------------------------------------


def _linear_rho(M: np.ndarray) -> Optional[float]:
    # <Mv, v> >= rho |Mv|^2  <=>  rho = min eig of sym(M^-1)
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        return None
    return float(np.linalg.eigvalsh(0.5 * (Minv + Minv.T))[0])


def linear_field(M, name: str = "linear") -> ProblemSpec:
    """Unconstrained problem with ``F(z) = M z`` in any dimension."""
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {M.shape}")
    d = M.shape[0]
    L = float(np.linalg.norm(M, 2))
    if L == 0.0:
        raise ParameterError("zero matrix gives a degenerate field")
    rho = _linear_rho(M)
    jac = lambda z: M.copy()
    if d == 2:
        p = (float(M[0, 0]), float(M[0, 1]), float(M[1, 0]), float(M[1, 1]))

        def batch(Z):
            x, y = Z[:, 0], Z[:, 1]
            return np.stack([p[0] * x + p[1] * y, p[2] * x + p[3] * y], axis=1)

        vf = _kernel_field(
            pk.LINEAR, p, batch, jac, lipschitz=L, rho=rho, zeros=(np.zeros(2),), matrix=M
        )
    else:
        vf = VectorField(
            func=lambda z: M @ z,
            dim=d,
            lipschitz=L,
            rho=rho,
            zeros=(np.zeros(d),),
            matrix=M,
            batch_func=lambda Z: Z @ M.T,
            jacobian=jac,
        )
    spec = ProblemSpec(
        field=vf,
        resolvent=Identity(),
        name=name,
        rho=rho,
        lipschitz=L,
        known_zero=np.zeros(d),
        params={"matrix": M.tolist()},
    )
    if abs(np.linalg.det(M)) > 0:
        _check_zero(spec)
    return spec


def quadratic_field(a: float, b: float) -> ProblemSpec:
    """Bilinear-plus-quadratic game ``phi = a x y + b/2 x^2 - b/2 y^2``.

    ``F(x, y) = (b x + a y, -a x + b y)`` with ``L = sqrt(a^2 + b^2)`` and
    ``rho = b / (a^2 + b^2)``.
    """
    a = float(a)
    b = float(b)
    if a < 0:
        raise ParameterError(f"a must be >= 0, got {a}")
    if a == 0.0 and b == 0.0:
        raise ParameterError("a = b = 0 gives a degenerate field")
    n2 = a * a + b * b
    M = np.array([[b, a], [-a, b]])
    base = linear_field(M, name="quadratic")
    phi = lambda x, y: a * x * y + 0.5 * b * x * x - 0.5 * b * y * y
    return ProblemSpec(
        field=replace(base.field, lipschitz=math.sqrt(n2), rho=b / n2),
        resolvent=Identity(),
        name="quadratic",
        rho=b / n2,
        lipschitz=math.sqrt(n2),
        known_zero=np.zeros(2),
        potential=phi,
        params={"a": a, "b": b},
    )


def quadratic_from_constants(L: float, rho: float) -> ProblemSpec:
    """Quadratic game with prescribed Lipschitz constant and comonotonicity."""
    L = float(L)
    rho = float(rho)
    if not L > 0:
        raise ParameterError(f"L must be positive, got {L}")
    if abs(rho) > 1.0 / L:
        raise ParameterError(f"|rho| must be <= 1/L = {1.0 / L}, got {rho}")
    a = math.sqrt(max(L * L - L ** 4 * rho * rho, 0.0))
    return quadratic_field(a, L * L * rho)


# -- polar game -------------------------------------------------------------


def _polar_batch(a):
    def batch(Z):
        x, y = Z[:, 0], Z[:, 1]
        c = a / 16.0
        r2 = x * x + y * y
        g = -1.0 + r2
        h = -9.0 + 16.0 * r2
        return np.stack([c * x * g * h - y, c * y * g * h + x], axis=1)

    return batch


def _polar_jac_many(a, Z):
    x, y = Z[:, 0], Z[:, 1]
    c = a / 16.0
    r2 = x * x + y * y
    g = r2 - 1.0
    h = 16.0 * r2 - 9.0
    cross = c * 2.0 * x * y * (h + 16.0 * g)
    J = np.empty((Z.shape[0], 2, 2))
    J[:, 0, 0] = c * (g * h + 2.0 * x * x * h + 32.0 * x * x * g)
    J[:, 0, 1] = cross - 1.0
    J[:, 1, 0] = cross + 1.0
    J[:, 1, 1] = c * (g * h + 2.0 * y * y * h + 32.0 * y * y * g)
    return J


def _box_lipschitz(jac_many, radius: float) -> float:
    """Max spectral norm of the Jacobian over ``[-radius, radius]^2``.

    The box is convex, so this is the Lipschitz constant of F on it. A dense
    grid locates the maximiser and a bounded local search polishes it.
    """
    g = np.linspace(-radius, radius, 601)
    X, Y = np.meshgrid(g, g)
    Z = np.stack([X.ravel(), Y.ravel()], axis=1)
    norms = np.linalg.norm(jac_many(Z), 2, axis=(1, 2))
    order = np.argsort(norms)[::-1][:8]
    best = float(norms[order[0]])
    obj = lambda z: -float(np.linalg.norm(jac_many(z.reshape(1, 2))[0], 2))
    for i in order:
        res = minimize(obj, Z[i], method="L-BFGS-B", bounds=[(-radius, radius)] * 2)
        best = max(best, -float(res.fun))
    return best


@lru_cache(maxsize=None)
def _polar_lipschitz(a: float) -> float:
    return _box_lipschitz(lambda Z: _polar_jac_many(a, Z), POLAR_RADIUS)


def polar_game_field(a: float = 1.0 / 3.0) -> ProblemSpec:
    """Polar game on the box ``|z|_inf <= 1.1``.

    ``F(z) = (psi(x, y) - y, psi(y, x) + x)`` with
    ``psi(x, y) = a/16 x (-1 + x^2 + y^2)(-9 + 16 x^2 + 16 y^2)``. The zero at
    the origin is surrounded by a repelling limit cycle, so GDA-type Lookahead
    can fail while the extragradient variants converge.
    """
    a = float(a)
    p = (a, 0.0, 0.0, 0.0)
    L = _polar_lipschitz(a) if a != 0.0 else 1.0
    box = Box.cube(POLAR_RADIUS, 2)
    vf = _kernel_field(
        pk.POLAR,
        p,
        _polar_batch(a),
        lambda z: _polar_jac_many(a, np.reshape(z, (1, 2)))[0],
        lipschitz=L,
        zeros=(np.zeros(2),),
        domain_box=box.bounds(),
    )
    spec = ProblemSpec(
        field=vf,
        resolvent=box,
        name="polar",
        lipschitz=L,
        known_zero=np.zeros(2),
        rho_range=(-1.0 / (8.0 * L), -1.0 / (10.0 * L)),
        params={"a": a},
    )
    _check_zero(spec)
    return spec


# -- forsaken ---------------------------------------------------------------


def _forsaken_batch(a):
    def batch(Z):
        x, y = Z[:, 0], Z[:, 1]
        x2 = x * x
        x3 = x2 * x
        y2 = y * y
        y3 = y2 * y
        return np.stack(
            [(y - a) + ((0.5 * x - 2.0 * x3) + x3 * x2), -x + ((0.5 * y - 2.0 * y3) + y3 * y2)],
            axis=1,
        )

    return batch


def _psi2(t):
    return 0.5 - 6.0 * t * t + 5.0 * t ** 4


def _forsaken_jac_many(Z):
    J = np.empty((Z.shape[0], 2, 2))
    J[:, 0, 0] = _psi2(Z[:, 0])
    J[:, 0, 1] = 1.0
    J[:, 1, 0] = -1.0
    J[:, 1, 1] = _psi2(Z[:, 1])
    return J


@lru_cache(maxsize=1)
def _forsaken_lipschitz() -> float:
    # the Jacobian does not depend on a
    return _box_lipschitz(_forsaken_jac_many, FORSAKEN_RADIUS)


@lru_cache(maxsize=None)
def _forsaken_zero(a: float) -> tuple:
    batch = _forsaken_batch(a)
    res = root(
        lambda z: batch(z.reshape(1, 2))[0],
        x0=np.array([0.08, 0.4]),
        jac=lambda z: _forsaken_jac_many(z.reshape(1, 2))[0],
        tol=1e-14,
    )
    if np.max(np.abs(batch(res.x.reshape(1, 2))[0])) > 1e-14:
        raise EstimationError(f"could not locate the zero of forsaken(a={a}): {res.message}")
    return tuple(res.x)


def forsaken_field(a: float = 0.45, name: str = "forsaken") -> ProblemSpec:
    """Forsaken game ``phi = x (y - a) + psi(x) - psi(y)`` on ``|z|_inf <= 1.5``.

    ``psi(t) = t^2/4 - t^4/2 + t^6/6``. The interior zero is located by a
    Newton solve; an attracting limit cycle surrounds it.
    """
    a = float(a)
    p = (a, 0.0, 0.0, 0.0)
    box = Box.cube(FORSAKEN_RADIUS, 2)
    zero = np.array(_forsaken_zero(a))
    psi = lambda t: 0.25 * t * t - 0.5 * t ** 4 + t ** 6 / 6.0
    L = _forsaken_lipschitz()
    vf = _kernel_field(
        pk.FORSAKEN,
        p,
        _forsaken_batch(a),
        lambda z: _forsaken_jac_many(np.reshape(z, (1, 2)))[0],
        lipschitz=L,
        zeros=(zero,),
        domain_box=box.bounds(),
    )
    spec = ProblemSpec(
        field=vf,
        resolvent=box,
        name=name,
        lipschitz=L,
        known_zero=zero,
        potential=lambda x, y: x * (y - a) + psi(x) - psi(y),
        params={"a": a},
    )
    _check_zero(spec)
    return spec


def lne_forsaken_field(a: float = 0.34) -> ProblemSpec:
    """Forsaken variant whose zero is locally attracting (default ``a = 0.34``)."""
    return forsaken_field(a, name="lne-forsaken")


# -- estimators -------------------------------------------------------------


def _domain(spec: ProblemSpec) -> Optional[tuple]:
    b = spec.resolvent.bounds()
    if b is None:
        b = spec.field.domain_box
    return b


def _require_unconstrained(spec: ProblemSpec, field_only: bool) -> None:
    if spec.constrained and not field_only:
        raise UnsupportedError(
            f"{spec.name} is constrained; pass field_only=True to estimate on F alone"
        )


def _sample_points(spec: ProblemSpec, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return sample_box(rng, n, _domain(spec), spec.dim)


def sample_pairs(spec: ProblemSpec, n: int, seed: int):
    """``n`` point pairs in the domain at mixed distances.

    Pair ``i`` joins a uniform point with a neighbour at a log-uniform
    distance between 1e-4 and the domain diameter (clipped to the domain),
    so both the local (Jacobian) and global scales are probed. All draws come
    from one ``(n, 2d + 1)`` matrix, so the first pairs do not depend on ``n``.
    """
    d = spec.dim
    b = _domain(spec)
    lo, hi = (np.full(d, -2.0), np.full(d, 2.0)) if b is None else b
    diam = float(np.linalg.norm(hi - lo))
    rng = np.random.default_rng(seed)
    draws = rng.random((n, 2 * d + 1))
    Z = lo + (hi - lo) * draws[:, :d]
    u = draws[:, d : 2 * d] - 0.5
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
    scale = np.exp(np.log(1e-4) + (np.log(diam) - np.log(1e-4)) * draws[:, 2 * d])
    W = np.clip(Z + scale[:, None] * u, lo, hi)
    return Z, W


def estimate_lipschitz(spec: ProblemSpec, samples: int = 10_000, seed: int = 0) -> float:
    """Largest ratio ``|Fz - Fz'| / |z - z'|`` over :func:`sample_pairs`.

    A lower bound on the Lipschitz constant on the domain; nondecreasing in
    ``samples`` for a fixed seed.
    """
    if samples < 2:
        raise ParameterError(f"samples must be >= 2, got {samples}")
    Z, W = sample_pairs(spec, samples, seed)
    dz = np.linalg.norm(Z - W, axis=1)
    df = np.linalg.norm(spec.field.eval_many(Z) - spec.field.eval_many(W), axis=1)
    keep = dz > 0
    if not np.any(keep):
        raise EstimationError("all sampled pairs coincide")
    return float(np.max(df[keep] / dz[keep]))


def _ratios(FZ, FW, Z, W):
    dv = FZ - FW
    n2 = np.einsum("ij,ij->i", dv, dv)
    keep = np.sqrt(n2) >= DEGENERATE
    r = np.einsum("ij,ij->i", dv, Z - W)[keep] / n2[keep]
    return r


def _comonotone_pairs(spec: ProblemSpec, samples: int, seed: int):
    Z = _sample_points(spec, samples, seed)
    FZ = spec.field.eval_many(Z)
    return Z, FZ


def estimate_comonotonicity(
    spec: ProblemSpec, samples: int = 10_000, seed: int = 0, field_only: bool = False
) -> float:
    """Smallest ratio ``<Fz - Fz', z - z'> / |Fz - Fz'|^2`` over sampled pairs.

    Pairs are consecutive sample points plus each sample paired with the
    known zero (when there is one), so the result never exceeds
    :func:`estimate_star_rho` on the same ``(samples, seed)``. A positive value
    also certifies cocoercivity with that constant.
    """
    if samples < 2:
        raise ParameterError(f"samples must be >= 2, got {samples}")
    _require_unconstrained(spec, field_only)
    Z, FZ = _comonotone_pairs(spec, samples, seed)
    parts = [_ratios(FZ[:-1], FZ[1:], Z[:-1], Z[1:])]
    if spec.known_zero is not None:
        zs = np.broadcast_to(spec.known_zero, Z.shape)
        fs = np.broadcast_to(spec.field.eval(spec.known_zero), Z.shape)
        parts.append(_ratios(FZ, fs, Z, zs))
    r = np.concatenate(parts)
    if r.size == 0:
        raise EstimationError("every sampled pair is degenerate")
    return float(np.min(r))


def estimate_star_rho(
    spec: ProblemSpec, samples: int = 10_000, seed: int = 0, field_only: bool = False
) -> float:
    """Smallest ratio ``<Fz, z - z*> / |Fz|^2`` over sampled points."""
    if spec.known_zero is None:
        raise EstimationError(f"{spec.name} has no known zero")
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")
    _require_unconstrained(spec, field_only)
    Z, FZ = _comonotone_pairs(spec, samples, seed)
    zs = np.broadcast_to(spec.known_zero, Z.shape)
    fs = np.broadcast_to(spec.field.eval(spec.known_zero), Z.shape)
    r = _ratios(FZ, fs, Z, zs)
    if r.size == 0:
        raise EstimationError("every sampled point is degenerate")
    return float(np.min(r))


# -- registry ---------------------------------------------------------------


def _make_quadratic(a=None, b=None, L=None, rho=None):
    if L is not None or rho is not None:
        if a is not None or b is not None:
            raise ParameterError("give either (a, b) or (L, rho) for quadratic, not both")
        return quadratic_from_constants(1.0 if L is None else L, 0.0 if rho is None else rho)
    return quadratic_field(1.0 if a is None else a, 0.0 if b is None else b)


PROBLEMS = {
    "quadratic": _make_quadratic,
    "polar": lambda a=1.0 / 3.0: polar_game_field(a),
    "forsaken": lambda a=0.45: forsaken_field(a),
    "lne-forsaken": lambda a=0.34: lne_forsaken_field(a),
}


def make_problem(name: str, **overrides) -> ProblemSpec:
    """Build a named preset, dropping overrides that are None."""
    try:
        ctor = PROBLEMS[name]
    except KeyError:
        raise ParameterError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}"
        ) from None
    kw = {k: float(v) for k, v in overrides.items() if v is not None}
    try:
        return ctor(**kw)
    except TypeError as exc:
        raise ParameterError(f"bad overrides for {name}: {exc}") from None
