"""Vector fields, resolvents, stochastic oracles and evaluation accounting.

Points are plain 1-D ``float64`` numpy arrays. Everything else in the package
is built on the small set of types defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "InterpSolveError",
    "ParameterError",
    "DimensionError",
    "EstimationError",
    "UnsupportedError",
    "DiagnosticsError",
    "ConvergenceError",
    "DivergenceError",
    "BudgetExceeded",
    "ParseError",
    "as_point",
    "VectorField",
    "ResolventMap",
    "Identity",
    "Box",
    "resolvent_apply",
    "StochasticOracle",
    "oracle_eval",
    "EvalBudget",
]


class InterpSolveError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(InterpSolveError, ValueError):
    pass


class DimensionError(InterpSolveError, ValueError):
    pass


class EstimationError(InterpSolveError):
    pass


class UnsupportedError(InterpSolveError):
    pass


class DiagnosticsError(InterpSolveError):
    pass


class ParseError(InterpSolveError):
    pass


class BudgetExceeded(InterpSolveError):
    pass


class _RunError(InterpSolveError):
    """Error that carries the partial trajectory of an aborted run."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConvergenceError(_RunError):
    pass


class DivergenceError(_RunError):
    pass


def as_point(z, dim: Optional[int] = None) -> np.ndarray:
    """Convert ``z`` to a finite 1-D float64 array, checking its dimension."""
    p = np.array(z, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise DimensionError("a point needs at least one coordinate")
    if dim is not None and p.size != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ParameterError(f"point has non-finite coordinates: {p}")
    return p


@dataclass(frozen=True)
class VectorField:
    """A deterministic operator F: R^d -> R^d with optional metadata.

    ``kernel`` names a built-in closed form, ``(kind, params)``, that the
    kernel backend knows how to evaluate; fields without one always run
    through the generic numpy path. ``matrix`` is set for linear fields.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    lipschitz: Optional[float] = None
    rho: Optional[float] = None
    zeros: tuple = ()
    domain_box: Optional[tuple] = None
    kernel: Optional[tuple] = None
    matrix: Optional[np.ndarray] = None
    batch_func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, z) -> np.ndarray:
        return self.func(z)

    def eval(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimensionError(f"field expects dimension {self.dim}, got shape {z.shape}")
        return self.func(z)

    def eval_many(self, Z) -> np.ndarray:
        """Evaluate on the rows of an ``(n, d)`` array."""
        Z = np.asarray(Z, dtype=np.float64)
        if self.batch_func is not None:
            return self.batch_func(Z)
        return np.array([self.func(z) for z in Z]).reshape(Z.shape)

    @property
    def is_linear(self) -> bool:
        return self.matrix is not None


class ResolventMap:
    """Resolvent (id + gamma A)^-1 of a maximally monotone operator A."""

    dim: Optional[int] = None

    def apply(self, gamma: float, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_identity(self) -> bool:
        return False

    def bounds(self) -> Optional[tuple]:
        """Box bounds as ``(lower, upper)`` or None for the whole space."""
        return None


class Identity(ResolventMap):
    """Resolvent of A = 0."""

    def apply(self, gamma, z):
        return z

    @property
    def is_identity(self):
        return True

    def __repr__(self):
        return "Identity()"


class Box(ResolventMap):
    """Resolvent of the normal cone of a box, i.e. the projection onto it.

    The projection does not depend on gamma.
    """

    def __init__(self, lower, upper):
        lo = np.array(lower, dtype=np.float64).reshape(-1)
        hi = np.array(upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionError("box bounds have different dimensions")
        if np.any(lo > hi):
            raise ParameterError("box lower bound exceeds upper bound")
        self.lower = lo
        self.upper = hi
        self.dim = lo.size

    @classmethod
    def cube(cls, radius: float, dim: int = 2) -> "Box":
        return cls(np.full(dim, -radius), np.full(dim, radius))

    def apply(self, gamma, z):
        return np.minimum(np.maximum(z, self.lower), self.upper)

    def bounds(self):
        return self.lower, self.upper

    def contains(self, z, tol=0.0) -> bool:
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


def resolvent_apply(rmap: ResolventMap, gamma: float, z) -> np.ndarray:
    """Apply ``(id + gamma A)^-1`` to ``z`` with argument checking."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    p = as_point(z, rmap.dim)
    return rmap.apply(gamma, p)


class StochasticOracle:
    """Unbiased Gaussian-noise oracle around a deterministic field.

    Each sample is ``F(z) + zeta`` with ``zeta ~ N(0, sigma0^2 I)``. A batch
    of ``n`` samples is averaged; since the mean of ``n`` such Gaussians is
    exactly ``N(0, sigma0^2/n I)``, the mean is drawn in one shot and the call
    counter still advances by ``n``.

    Randomness comes from Philox streams keyed by the seed. Standalone calls
    (:func:`oracle_eval`) share one sequential stream; solver runs use
    :meth:`noise_block`, which opens an independent stream per outer
    iteration ``k`` and hands inner iteration ``t`` the ``t``-th row of it.
    Changing batch sizes therefore never shifts other draws.
    """

    def __init__(self, base: VectorField, sigma0: float = 0.0, seed: int = 0):
        if sigma0 < 0 or not math.isfinite(sigma0):
            raise ParameterError(f"sigma0 must be finite and >= 0, got {sigma0}")
        self.base = base
        self.sigma0 = float(sigma0)
        self.seed = int(seed)
        self.calls = 0
        self._rng = self._stream(())

    def _stream(self, key: tuple) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))

    def _count(self, rows: int, batch: int) -> None:
        # sigma0 = 0 makes every batch a single exact evaluation
        self.calls += rows * (batch if self.sigma0 > 0 else 1)

    def sample(self, z, batch: int = 1) -> np.ndarray:
        if batch < 1:
            raise ParameterError(f"batch must be >= 1, got {batch}")
        fz = self.base.eval(z)
        self._count(1, batch)
        if self.sigma0 == 0.0:
            return fz
        scale = self.sigma0 / math.sqrt(batch)
        return fz + scale * self._rng.standard_normal(self.base.dim)

    def noise_block(self, k: int, rows: int, batch: int) -> Optional[np.ndarray]:
        """Batch-mean noise for ``rows`` inner steps of outer iteration ``k``.

        Returns None (and counts ``rows`` calls) when sigma0 is zero.
        """
        if batch < 1:
            raise ParameterError(f"batch must be >= 1, got {batch}")
        self._count(rows, batch)
        if self.sigma0 == 0.0:
            return None
        g = self._stream((int(k),))
        scale = self.sigma0 / math.sqrt(batch)
        return scale * g.standard_normal((rows, self.base.dim))

    def default_block(self, rows: int, batch: int) -> Optional[np.ndarray]:
        """Like :meth:`noise_block` but drawn from the sequential stream."""
        if batch < 1:
            raise ParameterError(f"batch must be >= 1, got {batch}")
        self._count(rows, batch)
        if self.sigma0 == 0.0:
            return None
        scale = self.sigma0 / math.sqrt(batch)
        return scale * self._rng.standard_normal((rows, self.base.dim))


def oracle_eval(oracle: StochasticOracle, z, batch: int = 1) -> np.ndarray:
    """Mean of ``batch`` noisy evaluations of the oracle's field at ``z``."""
    return oracle.sample(as_point(z, oracle.base.dim), batch)


@dataclass
class EvalBudget:
    max_oracle_calls: int
    used: int = 0

    def remaining(self) -> int:
        return self.max_oracle_calls - self.used

    def can_spend(self, n: int) -> bool:
        return self.used + n <= self.max_oracle_calls

    def spend(self, n: int) -> None:
        if not self.can_spend(n):
            raise BudgetExceeded(
                f"spending {n} calls would exceed the budget "
                f"({self.used}/{self.max_oracle_calls} used)"
            )
        self.used += n


def sample_box(rng: np.random.Generator, n: int, box: Optional[tuple], dim: int) -> np.ndarray:
    """Uniform samples from a box, or from [-2, 2]^dim when unconstrained."""
    if box is None:
        lo, hi = np.full(dim, -2.0), np.full(dim, 2.0)
    else:
        lo, hi = box
    u = rng.random((n, dim))
    return lo + (hi - lo) * u
