"""Iteration schemes: single steps, full runs, and inner-loop schedules.

Every scheme is available as a single-step function on a :class:`VectorField`
(useful for composition and property tests) and as a run over a
:class:`~interp_solve.problems.ProblemSpec` that returns a :class:`Trajectory`.

Runs on the built-in 2-D problems hand their inner loops to the kernel
backend (compiled when available). Other fields go through numpy with the
same operation order, so both paths give bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .core import (
    ConvergenceError,
    DivergenceError,
    EvalBudget,
    ParameterError,
    ResolventMap,
    StochasticOracle,
    UnsupportedError,
    VectorField,
    as_point,
)
from .problems import ProblemSpec

__all__ = [
    "SolverParams",
    "Trajectory",
    "km_iterate",
    "gda_step",
    "eg_step",
    "egplus_step",
    "cegplus_step",
    "fbf_step",
    "approx_prox",
    "deterministic_prox",
    "la_gda_tau2_closed_form",
    "tau_schedule",
    "batch_schedule",
    "rapp_run",
    "relaxed_pp_run",
    "lookahead_run",
    "km_exact_run",
    "gda_run",
    "eg_run",
    "egplus_run",
    "cegplus_run",
    "fbf_run",
    "SOLVERS",
    "run_solver",
]

DIVERGENCE_NORM = 1e12
INNER_CAP = 1_000_000
BASES = {"gda": kernels.GDA, "eg": kernels.EG, "cegplus": kernels.CEGPLUS}
BATCH_MODES = ("best", "last")


@dataclass(frozen=True)
class SolverParams:
    """Hyperparameters shared by all solvers.

    ``batch`` is a fixed minibatch size or ``"best"`` / ``"last"`` for the
    growing schedules of :func:`batch_schedule`. ``strict=False`` turns
    hypothesis violations (for example ``gamma * L >= 1`` or ``lam = 1``)
    into trajectory warnings so that deliberately out-of-theory runs can be
    reproduced. ``record_errors=None`` records inner-loop errors only when a
    closed-form resolvent is available.
    """

    gamma: float
    lam: float = 0.5
    tau: int = 1
    alpha: float = 0.5
    K: int = 100
    sigma0: float = 0.0
    batch: Union[int, str] = 1
    seed: int = 0
    strict: bool = True
    inner_tol: float = 1e-12
    record_errors: Optional[bool] = None
    max_oracle_calls: Optional[int] = None
    target: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.lam <= 1:
            raise ParameterError(f"lam must be in (0, 1], got {self.lam}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ParameterError(f"tau must be an integer >= 1, got {self.tau}")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if int(self.K) != self.K or self.K < 0:
            raise ParameterError(f"K must be an integer >= 0, got {self.K}")
        if not (math.isfinite(self.sigma0) and self.sigma0 >= 0):
            raise ParameterError(f"sigma0 must be >= 0, got {self.sigma0}")
        if isinstance(self.batch, str):
            if self.batch.lower() not in BATCH_MODES:
                raise ParameterError(f"batch must be an integer or one of {BATCH_MODES}")
            object.__setattr__(self, "batch", self.batch.lower())
        elif int(self.batch) != self.batch or self.batch < 1:
            raise ParameterError(f"batch must be >= 1, got {self.batch}")
        if not self.inner_tol > 0:
            raise ParameterError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.max_oracle_calls is not None and self.max_oracle_calls < 1:
            raise ParameterError("max_oracle_calls must be >= 1")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "K", int(self.K))

    def batch_size(self, k: int) -> int:
        """Minibatch size for outer step ``k`` (0-indexed)."""
        if self.sigma0 == 0.0:
            return 1
        if isinstance(self.batch, str):
            return batch_schedule(k + 1, self.batch)
        return int(self.batch)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """Outer iterates of a run and everything needed to check bounds on it.

    ``oracle_calls[k]`` is the cumulative number of single-sample field
    evaluations spent to reach ``iterates[k]``. ``aux_iterates[k]`` is the
    inner point produced from ``iterates[k]`` (the approximate resolvent, the
    last Lookahead inner iterate, or the extrapolated point). When
    ``errors_estimated`` is set, ``recorded_errors`` came from a longer
    reference inner loop instead of a closed-form resolvent.
    """

    iterates: np.ndarray
    oracle_calls: np.ndarray
    solver: str
    params: Optional[SolverParams] = None
    problem: dict = dc_field(default_factory=dict)
    aux_iterates: Optional[np.ndarray] = None
    recorded_errors: Optional[np.ndarray] = None
    errors_estimated: bool = False
    stop_reason: str = "K"
    warnings: list = dc_field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


# -- schedules --------------------------------------------------------------


def tau_schedule(K: int, gammaL: float, mode: str = "last") -> int:
    """Inner iterations making the inner-loop error decay like 1/K or 1/K^2.

    ``best``: ``ceil(log K / log(1/gammaL))``; ``last``: ``ceil(log K^2 /
    log(1/gammaL))``; never below 1.
    """
    if not 0 < gammaL < 1:
        raise ParameterError(f"gammaL must be in (0, 1), got {gammaL}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    mode = mode.lower()
    if mode not in BATCH_MODES:
        raise ParameterError(f"mode must be one of {BATCH_MODES}, got {mode!r}")
    power = 1 if mode == "best" else 2
    # guard against log ratios that land a hair above an integer
    t = math.ceil(power * math.log(K) / math.log(1.0 / gammaL) - 1e-9)
    return max(1, t)


def batch_schedule(k: int, mode: str = "last") -> int:
    """Minibatch size ``k^2`` (best iterate) or ``k^3`` (last iterate)."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    mode = mode.lower()
    if mode == "best":
        return k * k
    if mode == "last":
        return k * k * k
    raise ParameterError(f"mode must be one of {BATCH_MODES}, got {mode!r}")


# -- single steps -----------------------------------------------------------


def _check_lam_open(lam: float) -> None:
    if not 0 < lam < 1:
        raise ParameterError(f"lambda must be in (0, 1), got {lam}")


def _apply(A: Optional[ResolventMap], gamma: float, z: np.ndarray) -> np.ndarray:
    return z if A is None or A.is_identity else A.apply(gamma, z)


def km_iterate(
    T: Callable[[np.ndarray], np.ndarray],
    z0,
    lam: float,
    K: int,
    calls_per_step: int = 1,
) -> Trajectory:
    """Krasnosel'skii-Mann iteration ``z <- (1 - lam) z + lam T(z)``.

    Any inexactness lives inside ``T``. ``aux_iterates[k]`` holds ``T(z^k)``.
    """
    _check_lam_open(lam)
    z = as_point(z0)
    its = [z]
    aux = []
    for _ in range(int(K)):
        tz = np.asarray(T(z), dtype=np.float64)
        if tz.shape != z.shape:
            raise ParameterError("T must preserve the dimension")
        aux.append(tz)
        z = (1.0 - lam) * z + lam * tz
        its.append(z)
    return Trajectory(
        iterates=np.array(its),
        oracle_calls=np.arange(len(its), dtype=np.int64) * calls_per_step,
        solver="km",
        aux_iterates=np.array(aux).reshape(-1, z.size),
    )


def gda_step(F: VectorField, z, gamma: float, A: Optional[ResolventMap] = None) -> np.ndarray:
    """``z - gamma F(z)``, projected when a resolvent is given. One call."""
    return _apply(A, gamma, z - gamma * F(z))


def eg_step(F: VectorField, z, gamma: float, A: Optional[ResolventMap] = None) -> np.ndarray:
    """Extragradient ``z - gamma F(z - gamma F z)``. Two calls.

    With a resolvent both half-steps are projected.
    """
    zb = _apply(A, gamma, z - gamma * F(z))
    return _apply(A, gamma, z - gamma * F(zb))


def egplus_step(
    F: VectorField, z, gamma: float, lam: float, A: Optional[ResolventMap] = None
) -> np.ndarray:
    """Relaxed extragradient ``(1 - lam) z + lam EG(z)``. Two calls."""
    _check_lam_open(lam)
    return (1.0 - lam) * z + lam * eg_step(F, z, gamma, A)


def cegplus_step(F: VectorField, A: ResolventMap, z, gamma: float, alpha: float):
    """Constrained EG+ step with ``H = id - gamma F``. Two calls.

    Returns ``(next, zbar)`` where ``zbar = J(H z)`` and
    ``next = z + 2 alpha (H zbar - H z)``.
    """
    hz = z - gamma * F(z)
    zb = _apply(A, gamma, hz)
    hzb = zb - gamma * F(zb)
    two_alpha = 2.0 * alpha
    return z + two_alpha * (hzb - hz), zb


def fbf_step(F: VectorField, A: ResolventMap, z, gamma: float) -> np.ndarray:
    """Forward-backward-forward step ``z - (H z - H zbar)``. Two calls."""
    hz = z - gamma * F(z)
    zb = _apply(A, gamma, hz)
    hzb = zb - gamma * F(zb)
    return z - (hz - hzb)


def _prox_loop(F, A, z, gamma, tau, noise):
    w = z
    for t in range(tau):
        fw = F(w)
        if noise is not None:
            fw = fw + noise[t]
        w = _apply(A, gamma, z - gamma * fw)
    return w


def approx_prox(
    oracle: StochasticOracle,
    A: ResolventMap,
    z,
    gamma: float,
    tau: int,
    batch: int = 1,
    strict: bool = True,
) -> np.ndarray:
    """Approximate resolvent by ``tau`` fixed-point steps ``w <- J(z - gamma F(w))``.

    Starts from ``w = z``; spends ``tau * batch`` oracle calls. For
    ``gamma L < 1`` the map is a contraction, so the deterministic error
    shrinks by ``(gamma L)^tau``.
    """
    if tau < 1:
        raise ParameterError(f"tau must be >= 1, got {tau}")
    L = oracle.base.lipschitz
    if strict and L is not None and gamma * L >= 1:
        raise ParameterError(f"gamma*L = {gamma * L} >= 1: the inner loop is not a contraction")
    z = as_point(z, oracle.base.dim)
    noise = oracle.default_block(tau, batch)
    return _prox_loop(oracle.base, A, z, gamma, tau, noise)


def la_gda_tau2_closed_form(F: VectorField, z, gamma: float, lam: float) -> np.ndarray:
    """One Lookahead-GDA step with two inner steps, written as the average of
    a GDA step and an EG+ step, each with stepsize ``2 lam gamma``."""
    if not 0 < lam < 0.5:
        raise ParameterError(f"lambda must be in (0, 1/2), got {lam}")
    fz = F(z)
    return 0.5 * (z - 2.0 * lam * gamma * fz) + 0.5 * (z - 2.0 * lam * gamma * F(z - gamma * fz))


# -- run machinery ----------------------------------------------------------


class _Recorder:
    """Collects iterates and enforces budget, divergence and target stops."""

    def __init__(self, solver, problem, params, z0, monitor):
        self.solver = solver
        self.problem = problem
        self.params = params
        self.its = [z0]
        self.aux = []
        self.errs = []
        self.calls = [0]
        self.warnings = []
        self.estimated = False
        self.stop = "K"
        self.budget = (
            EvalBudget(params.max_oracle_calls) if params.max_oracle_calls is not None else None
        )
        self.monitor = monitor
        if params.target is not None and monitor is None:
            self.monitor = _default_monitor(problem)

    def affordable(self, cost: int) -> bool:
        if self.budget is None or self.budget.can_spend(cost):
            return True
        self.stop = "budget"
        return False

    def hit_target(self) -> bool:
        if self.params.target is None:
            return False
        if self.monitor(self.its[-1]) <= self.params.target:
            self.stop = "target"
            return True
        return False

    def push(self, z, cost, aux=None, err=None):
        if self.budget is not None:
            self.budget.spend(cost)
        self.its.append(z)
        self.calls.append(self.calls[-1] + cost)
        if aux is not None:
            self.aux.append(aux)
        if err is not None:
            self.errs.append(err)
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) > DIVERGENCE_NORM:
            self.stop = "divergence"
            raise DivergenceError(
                f"{self.solver}: |z| exceeded {DIVERGENCE_NORM:g} at step {len(self.its) - 1}",
                self.trajectory(),
            )

    def trajectory(self) -> Trajectory:
        d = self.its[0].size
        return Trajectory(
            iterates=np.array(self.its),
            oracle_calls=np.array(self.calls, dtype=np.int64),
            solver=self.solver,
            params=self.params,
            problem=self.problem.summary(),
            aux_iterates=np.array(self.aux).reshape(-1, d) if self.aux else None,
            recorded_errors=np.array(self.errs) if self.errs else None,
            errors_estimated=self.estimated,
            stop_reason=self.stop,
            warnings=list(self.warnings),
        )


def _default_monitor(problem):
    from .diagnostics import default_residual

    return lambda z: default_residual(problem, z)


def _use_kernel(problem: ProblemSpec, engine: str) -> bool:
    if engine == "numpy":
        return False
    if engine not in ("auto", "kernel"):
        raise ParameterError(f"engine must be 'auto', 'kernel' or 'numpy', got {engine!r}")
    ok = problem.field.kernel is not None and problem.dim == 2
    if engine == "kernel" and not ok:
        raise UnsupportedError(f"{problem.name} has no kernel implementation")
    return ok


def _violation(rec: _Recorder, msg: str) -> None:
    if rec.params.strict:
        raise ParameterError(msg)
    rec.warnings.append(msg)


def _validate_resolvent_scheme(rec: _Recorder) -> None:
    p, prob = rec.params, rec.problem
    if not p.lam < 1:
        _violation(rec, f"lambda must be in (0, 1), got {p.lam}")
    L = prob.lipschitz
    if L is None:
        rec.warnings.append("L unknown; contraction of the inner loop not checked")
    elif p.gamma * L >= 1:
        _violation(rec, f"gamma*L = {p.gamma * L:.6g} must be < 1")
    if prob.rho is None:
        rec.warnings.append("rho unknown; stepsize lower bound not checked")
    elif not p.gamma > max(-2.0 * prob.rho, 0.0):
        _violation(rec, f"gamma = {p.gamma} must exceed max(-2 rho, 0) = {max(-2.0 * prob.rho, 0.0)}")


def _validate_alpha(rec: _Recorder) -> None:
    p, rho = rec.params, rec.problem.rho
    if rho is None:
        rec.warnings.append("rho unknown; alpha range not checked")
    elif not 2.0 * p.alpha < 1.0 + 2.0 * rho / p.gamma:
        _violation(rec, f"2*alpha = {2.0 * p.alpha} must be < 1 + 2 rho/gamma = {1.0 + 2.0 * rho / p.gamma}")


def _start(problem: ProblemSpec, z0) -> np.ndarray:
    return as_point(z0, problem.dim)


def _no_noise(params: SolverParams, solver: str) -> None:
    if params.sigma0 > 0:
        raise UnsupportedError(f"{solver} does not take a stochastic oracle; use rapp")


def _record_errors(problem: ProblemSpec, params: SolverParams) -> bool:
    if params.record_errors is None:
        return problem.is_linear and not problem.constrained
    return params.record_errors


def deterministic_prox(problem: ProblemSpec, z, gamma: float, tau: int, use_kernel: bool = True):
    """Noise-free approximate resolvent with ``tau`` inner steps; no call accounting."""
    use_kernel = use_kernel and problem.field.kernel is not None and problem.dim == 2
    if use_kernel:
        kind, p = problem.field.kernel
        wx, wy = kernels.backend.prox_inner(kind, p, problem.box_tuple(), z[0], z[1], gamma, tau, None)
        return np.array([wx, wy])
    return _prox_loop(problem.field, problem.resolvent, z, gamma, tau, None)


# -- runs -------------------------------------------------------------------


def rapp_run(
    problem: ProblemSpec,
    params: SolverParams,
    z0,
    monitor: Optional[Callable] = None,
    engine: str = "auto",
) -> Trajectory:
    """Relaxed approximate proximal point method.

    Each outer step runs ``tau`` inner fixed-point steps with minibatch
    ``params.batch_size(k)`` and interpolates ``z <- (1 - lam) z + lam w``.
    Recorded errors are ``|w - J(z^k)|`` against the closed-form resolvent
    on linear problems and against a ``4 tau`` reference loop otherwise.
    """
    rec = _Recorder("rapp", problem, params, _start(problem, z0), monitor)
    _validate_resolvent_scheme(rec)
    use_k = _use_kernel(problem, engine)
    oracle = StochasticOracle(problem.field, params.sigma0, params.seed)
    record = _record_errors(problem, params)
    exact = problem.is_linear and not problem.constrained
    rec.estimated = record and not exact
    g, lam, tau = params.gamma, params.lam, params.tau
    box = problem.box_tuple()
    z = rec.its[0]
    if not rec.hit_target():
        for k in range(params.K):
            n = params.batch_size(k)
            cost = tau * n if params.sigma0 > 0 else tau
            if not rec.affordable(cost):
                break
            noise = oracle.noise_block(k, tau, n)
            if use_k:
                kind, p = problem.field.kernel
                wx, wy = kernels.backend.prox_inner(kind, p, box, z[0], z[1], g, tau, noise)
                w = np.array([wx, wy])
            else:
                w = _prox_loop(problem.field, problem.resolvent, z, g, tau, noise)
            err = None
            if record:
                ref = problem.exact_resolvent(g, z) if exact else deterministic_prox(problem, z, g, 4 * tau, use_k)
                err = float(np.linalg.norm(w - ref))
            z = (1.0 - lam) * z + lam * w
            rec.push(z, cost, aux=w, err=err)
            if rec.hit_target():
                break
    return rec.trajectory()


def relaxed_pp_run(
    problem: ProblemSpec,
    params: SolverParams,
    z0,
    inner_tol: Optional[float] = None,
    monitor: Optional[Callable] = None,
    engine: str = "auto",
) -> Trajectory:
    """Relaxed proximal point with the resolvent computed to ``inner_tol``.

    The inner loop stops once consecutive inner iterates differ by at most
    ``inner_tol``; hitting :data:`INNER_CAP` raises :class:`ConvergenceError`.
    """
    tol = params.inner_tol if inner_tol is None else inner_tol
    if not tol > 0:
        raise ParameterError(f"inner_tol must be positive, got {tol}")
    _no_noise(params, "relaxed-pp")
    rec = _Recorder("relaxed-pp", problem, params, _start(problem, z0), monitor)
    _validate_resolvent_scheme(rec)
    use_k = _use_kernel(problem, engine)
    exact = problem.is_linear and not problem.constrained
    record = _record_errors(problem, params) and exact
    g, lam = params.gamma, params.lam
    box = problem.box_tuple()
    z = rec.its[0]
    if not rec.hit_target():
        for k in range(params.K):
            cap = INNER_CAP
            if rec.budget is not None:
                cap = min(cap, rec.budget.remaining())
                if cap < 1:
                    rec.stop = "budget"
                    break
            if use_k:
                kind, p = problem.field.kernel
                wx, wy, steps, ok = kernels.backend.prox_until(kind, p, box, z[0], z[1], g, tol, cap)
                w = np.array([wx, wy])
            else:
                w, steps, ok = _prox_until_numpy(problem, z, g, tol, cap)
            if not ok:
                if cap < INNER_CAP:
                    rec.stop = "budget"
                    break
                raise ConvergenceError(
                    f"relaxed-pp: inner loop did not reach tol {tol:g} in {INNER_CAP} steps at outer step {k}",
                    rec.trajectory(),
                )
            err = float(np.linalg.norm(w - problem.exact_resolvent(g, z))) if record else None
            z = (1.0 - lam) * z + lam * w
            rec.push(z, steps, aux=w, err=err)
            if rec.hit_target():
                break
    return rec.trajectory()


def _prox_until_numpy(problem, z, gamma, tol, cap):
    F, A = problem.field, problem.resolvent
    w = z
    for t in range(cap):
        nw = _apply(A, gamma, z - gamma * F(w))
        d = nw - w
        w = nw
        if math.sqrt(float(d @ d)) <= tol:
            return w, t + 1, True
    return w, cap, False


def _base_step_numpy(problem, base, z, gamma, alpha):
    F, A = problem.field, problem.resolvent
    if base == kernels.GDA:
        return gda_step(F, z, gamma, A)
    if base == kernels.EG:
        if A.is_identity:
            return eg_step(F, z, gamma)
        return fbf_step(F, A, z, gamma)
    return cegplus_step(F, A, z, gamma, alpha)[0]


def lookahead_run(
    problem: ProblemSpec,
    base: str,
    params: SolverParams,
    z0,
    monitor: Optional[Callable] = None,
    engine: str = "auto",
) -> Trajectory:
    """Lookahead around ``tau`` steps of a base method.

    ``base`` is ``"gda"`` (projected GDA), ``"eg"`` (EG, or FBF under a
    constraint) or ``"cegplus"``. The last inner iterate is interpolated
    with the anchor: ``z <- (1 - lam) z + lam w^tau``.
    """
    try:
        b = BASES[base.lower()] if isinstance(base, str) else int(base)
    except KeyError:
        raise ParameterError(f"unknown base {base!r}; choose from {sorted(BASES)}") from None
    name = {kernels.GDA: "la-gda", kernels.EG: "la-eg", kernels.CEGPLUS: "la-cegplus"}[b]
    _no_noise(params, name)
    rec = _Recorder(name, problem, params, _start(problem, z0), monitor)
    if not params.lam < 1:
        _violation(rec, f"lambda must be in (0, 1), got {params.lam}")
    if b == kernels.CEGPLUS:
        _validate_alpha(rec)
    use_k = _use_kernel(problem, engine)
    g, lam, tau, alpha = params.gamma, params.lam, params.tau, params.alpha
    cost = tau if b == kernels.GDA else 2 * tau
    box = problem.box_tuple()
    z = rec.its[0]
    if not rec.hit_target():
        for _ in range(params.K):
            if not rec.affordable(cost):
                break
            if use_k:
                kind, p = problem.field.kernel
                wx, wy = kernels.backend.la_inner(kind, p, box, b, z[0], z[1], g, alpha, tau)
                w = np.array([wx, wy])
            else:
                w = z
                for _t in range(tau):
                    w = _base_step_numpy(problem, b, w, g, alpha)
            z = (1.0 - lam) * z + lam * w
            rec.push(z, cost, aux=w)
            if rec.hit_target():
                break
    return rec.trajectory()


def _drive(rec, params, step, cost, aux):
    z = rec.its[0]
    if rec.hit_target():
        return rec.trajectory()
    for _ in range(params.K):
        if not rec.affordable(cost):
            break
        out = step(z)
        if aux:
            z, a = out
        else:
            z, a = out, None
        rec.push(z, cost, aux=a)
        if rec.hit_target():
            break
    return rec.trajectory()


def _make_rec(name, problem, params, z0, monitor):
    _no_noise(params, name)
    return _Recorder(name, problem, params, _start(problem, z0), monitor)


def gda_run(problem, params, z0, monitor=None) -> Trajectory:
    """Projected simultaneous GDA."""
    rec = _make_rec("gda", problem, params, z0, monitor)
    F, A, g = problem.field, problem.resolvent, params.gamma
    return _drive(rec, params, lambda z: gda_step(F, z, g, A), 1, False)


def eg_run(problem, params, z0, monitor=None) -> Trajectory:
    """Projected extragradient."""
    rec = _make_rec("eg", problem, params, z0, monitor)
    F, A, g = problem.field, problem.resolvent, params.gamma
    return _drive(rec, params, lambda z: eg_step(F, z, g, A), 2, False)


def egplus_run(problem, params, z0, monitor=None) -> Trajectory:
    """EG+ : KM relaxation of (projected) extragradient."""
    rec = _make_rec("egplus", problem, params, z0, monitor)
    if not params.lam < 1:
        _violation(rec, f"lambda must be in (0, 1), got {params.lam}")
    F, A, g, lam = problem.field, problem.resolvent, params.gamma, params.lam

    def step(z):
        return (1.0 - lam) * z + lam * eg_step(F, z, g, A)

    return _drive(rec, params, step, 2, False)


def cegplus_run(problem, params, z0, monitor=None) -> Trajectory:
    """CEG+ iteration; ``aux_iterates[k]`` is the extrapolated point of step k."""
    rec = _make_rec("cegplus", problem, params, z0, monitor)
    _validate_alpha(rec)
    L = problem.lipschitz
    if L is not None and params.gamma * L > 1:
        _violation(rec, f"gamma*L = {params.gamma * L:.6g} must be <= 1")
    F, A, g, a = problem.field, problem.resolvent, params.gamma, params.alpha
    return _drive(rec, params, lambda z: cegplus_step(F, A, z, g, a), 2, True)


def fbf_run(problem, params, z0, monitor=None) -> Trajectory:
    """Forward-backward-forward splitting."""
    rec = _make_rec("fbf", problem, params, z0, monitor)
    F, A, g = problem.field, problem.resolvent, params.gamma
    return _drive(rec, params, lambda z: fbf_step(F, A, z, g), 2, False)


def km_exact_run(problem, params, z0, monitor=None) -> Trajectory:
    """Relaxed proximal point with the closed-form resolvent of a linear field.

    Each resolvent evaluation is counted as one oracle call.
    """
    rec = _make_rec("km-exact", problem, params, z0, monitor)
    if not problem.is_linear or problem.constrained:
        raise UnsupportedError("km-exact needs an unconstrained linear problem")
    _validate_resolvent_scheme(rec)
    g, lam = params.gamma, params.lam

    def step(z):
        w = problem.exact_resolvent(g, z)
        return (1.0 - lam) * z + lam * w, w

    traj = _drive(rec, params, step, 1, True)
    traj.recorded_errors = np.zeros(traj.K)
    return traj


SOLVERS = {
    "gda": lambda pr, pa, z0, **kw: gda_run(pr, pa, z0, **kw),
    "eg": lambda pr, pa, z0, **kw: eg_run(pr, pa, z0, **kw),
    "egplus": lambda pr, pa, z0, **kw: egplus_run(pr, pa, z0, **kw),
    "cegplus": lambda pr, pa, z0, **kw: cegplus_run(pr, pa, z0, **kw),
    "fbf": lambda pr, pa, z0, **kw: fbf_run(pr, pa, z0, **kw),
    "km-exact": lambda pr, pa, z0, **kw: km_exact_run(pr, pa, z0, **kw),
    "relaxed-pp": lambda pr, pa, z0, **kw: relaxed_pp_run(pr, pa, z0, **kw),
    "rapp": lambda pr, pa, z0, **kw: rapp_run(pr, pa, z0, **kw),
    "la-gda": lambda pr, pa, z0, **kw: lookahead_run(pr, "gda", pa, z0, **kw),
    "la-eg": lambda pr, pa, z0, **kw: lookahead_run(pr, "eg", pa, z0, **kw),
    "la-cegplus": lambda pr, pa, z0, **kw: lookahead_run(pr, "cegplus", pa, z0, **kw),
}


def run_solver(name: str, problem: ProblemSpec, params: SolverParams, z0, monitor=None) -> Trajectory:
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ParameterError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
    return fn(problem, params, z0, monitor=monitor)
