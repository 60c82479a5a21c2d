"""Residuals and checks of the convergence bounds against recorded runs.

Every check returns a :class:`BoundReport` comparing a left-hand side
sequence with its right-hand side bound, index by index. A bound whose
hypotheses fail for the given constants is reported as inapplicable rather
than as violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .core import DiagnosticsError, ParameterError, UnsupportedError, as_point
from .problems import ProblemSpec, sample_pairs
from .solvers import SolverParams, Trajectory, deterministic_prox

__all__ = [
    "RESIDUAL_KINDS",
    "ResidualSeries",
    "BoundReport",
    "residual",
    "default_residual",
    "residual_series",
    "check_km_bound",
    "check_last_iterate",
    "check_la2_bound",
    "check_cegplus_bounds",
    "check_fejer",
    "check_bounded_iterates",
    "check_h_cocoercivity",
    "aggregate_reports",
    "slope_fit",
    "loglog_slope",
]

RESIDUAL_KINDS = ("exact", "estimated", "operator", "step")
ATOL = 1e-9
RTOL = 1e-9


def _sat(lhs, rhs, atol=ATOL, rtol=RTOL):
    return lhs <= rhs + atol + rtol * np.abs(rhs)


@dataclass(frozen=True)
class ResidualSeries:
    """Per-iterate residual values of one kind at a fixed stepsize."""

    values: np.ndarray
    kind: str
    gamma: float
    tau_ref: Optional[int] = None


@dataclass
class BoundReport:
    """Index-wise comparison ``lhs[i] <= rhs[i]`` (up to tolerance).

    Composite reports carry ``children`` and no sequences of their own.
    """

    bound_name: str
    lhs: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    rhs: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    satisfied: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, dtype=bool))
    D_estimate: float = float("nan")
    applicable: bool = True
    reason: str = ""
    info: dict = dc_field(default_factory=dict)
    children: list = dc_field(default_factory=list)

    @property
    def margin(self) -> float:
        if self.lhs.size == 0:
            return float("inf")
        return float(np.min(self.rhs - self.lhs))

    @property
    def ok(self) -> bool:
        """True when every applicable part holds at every index."""
        if not self.applicable:
            return True
        own = bool(np.all(self.satisfied))
        return own and all(c.ok for c in self.children)

    def first_violation(self) -> Optional[int]:
        bad = np.flatnonzero(~self.satisfied)
        return int(bad[0]) if bad.size else None

    def to_dict(self) -> dict:
        out = {
            "bound": self.bound_name,
            "applicable": self.applicable,
            "satisfied": self.ok if self.applicable else None,
        }
        if not self.applicable:
            out["reason"] = self.reason
        if self.lhs.size:
            out.update(
                n=int(self.lhs.size),
                margin=self.margin,
                first_violation=self.first_violation(),
                lhs_last=float(self.lhs[-1]),
                rhs_last=float(self.rhs[-1]),
            )
        if math.isfinite(self.D_estimate):
            out["D_estimate"] = self.D_estimate
        if self.info:
            out["info"] = self.info
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out


def _report(name, lhs, rhs, D=float("nan"), atol=ATOL, rtol=RTOL, **info):
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    return BoundReport(name, lhs, rhs, _sat(lhs, rhs, atol, rtol), D_estimate=D, info=info)


def _inapplicable(name, reason, **info):
    return BoundReport(name, applicable=False, reason=reason, info=info)


# -- residuals --------------------------------------------------------------


def residual(problem: ProblemSpec, z, gamma: float, method: str = "exact", tau_ref: int = 50) -> float:
    """Stationarity measure at ``z``.

    ``exact``: ``|z - J(z)|`` via the closed-form resolvent (linear fields).
    ``estimated``: the same with ``J`` replaced by ``tau_ref`` inner steps.
    ``operator``: ``|F z|`` (unconstrained only). ``step``: ``|z - zbar|``
    with ``zbar = J_A(z - gamma F z)``.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    z = as_point(z, problem.dim)
    if method == "exact":
        return float(np.linalg.norm(z - problem.exact_resolvent(gamma, z)))
    if method == "estimated":
        L = problem.lipschitz
        if L is not None and gamma * L >= 1:
            raise ParameterError(f"estimated resolvent needs gamma*L < 1, got {gamma * L}")
        return float(np.linalg.norm(z - deterministic_prox(problem, z, gamma, tau_ref)))
    if method == "operator":
        if problem.constrained:
            raise UnsupportedError("operator-norm residual is only meaningful without constraints")
        return float(np.linalg.norm(problem.field(z)))
    if method == "step":
        zb = problem.resolvent.apply(gamma, z - gamma * problem.field(z))
        return float(np.linalg.norm(z - zb))
    raise ParameterError(f"unknown residual kind {method!r}; choose from {RESIDUAL_KINDS}")


def default_residual(problem: ProblemSpec, z) -> float:
    """Step residual at stepsize 1/L (1 when L is unknown)."""
    g = 1.0 / problem.lipschitz if problem.lipschitz else 1.0
    return residual(problem, z, g, "step")


def residual_series(
    problem: ProblemSpec, traj: Trajectory, kind: str, gamma: Optional[float] = None, tau_ref: int = 50
) -> ResidualSeries:
    """Residual of every outer iterate; ``gamma`` defaults to the run's."""
    if gamma is None:
        if traj.params is None:
            raise DiagnosticsError("trajectory has no params; pass gamma")
        gamma = traj.params.gamma
    if kind == "exact":
        # one solve for the whole series
        if not problem.is_linear or problem.constrained:
            raise UnsupportedError("exact residual needs an unconstrained linear field")
        M = np.eye(problem.dim) + gamma * problem.field.matrix
        J = np.linalg.solve(M, traj.iterates.T).T
        vals = np.linalg.norm(traj.iterates - J, axis=1)
    else:
        vals = np.array([residual(problem, z, gamma, kind, tau_ref) for z in traj.iterates])
    return ResidualSeries(vals, kind, gamma, tau_ref if kind == "estimated" else None)


# -- helpers ----------------------------------------------------------------


def _dist(traj: Trajectory, z_star) -> np.ndarray:
    z_star = as_point(z_star, traj.iterates.shape[1])
    return np.linalg.norm(traj.iterates - z_star, axis=1)


def _lam(traj: Trajectory, lam: Optional[float]) -> float:
    if lam is not None:
        return lam
    if traj.params is None:
        raise DiagnosticsError("trajectory has no params; pass lam")
    return traj.params.lam


def _errors(traj: Trajectory) -> tuple:
    if traj.recorded_errors is not None:
        e = np.asarray(traj.recorded_errors, dtype=np.float64)
        if e.size < traj.K:
            raise DiagnosticsError(f"{e.size} recorded errors for {traj.K} steps")
        return e[: traj.K], False
    if traj.params is not None and traj.params.sigma0 > 0:
        raise DiagnosticsError("stochastic run without recorded errors")
    return np.zeros(traj.K), True


def _prefix_mean(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x) / np.arange(1, x.size + 1)


# -- bounds -----------------------------------------------------------------


def check_km_bound(
    traj: Trajectory, residuals: ResidualSeries, z_star, lam: Optional[float] = None
) -> BoundReport:
    """Averaged-residual bound of the inexact KM iteration, at every prefix.

    ``(1/K) sum_k r_k^2 <= (|z^0 - z*|^2 + sum_k eps_k) / (lam (1 - lam) K)``
    with ``eps_k = 2 lam |e^k| |z^k - z*| + lam^2 |e^k|^2``.
    """
    lam = _lam(traj, lam)
    if not 0 < lam < 1:
        return _inapplicable("km", f"lambda = {lam} is not in (0, 1)")
    K = traj.K
    if K == 0:
        return _report("km", [], [])
    dist = _dist(traj, z_star)
    e, assumed = _errors(traj)
    eps = 2.0 * lam * e * dist[:K] + lam * lam * e * e
    r2 = residuals.values[:K] ** 2
    ks = np.arange(1, K + 1)
    lhs = _prefix_mean(r2)
    rhs = (dist[0] ** 2 + np.cumsum(eps)) / (lam * (1.0 - lam) * ks)
    return _report("km", lhs, rhs, float(dist.max()), errors_assumed_zero=assumed)


def check_last_iterate(
    traj: Trajectory, residuals: ResidualSeries, z_star, lam: Optional[float] = None
) -> BoundReport:
    """Per-step residual decrease and the last-iterate prefix bound.

    Step: ``r_{k+1}^2 <= r_k^2 + delta_k`` with
    ``delta_k = 4 |e^k| (|z^{k+1} - z*| + |z^k - z*|)``. Prefix:
    ``r_K^2 <= (|z^0 - z*|^2 + sum eps) / (lam (1 - lam) K) +
    (1/K) sum_j (j + 1) delta_j``. The prefix bound is flagged vacuous where
    it exceeds ``r_0^2``.
    """
    if residuals.kind not in ("exact", "estimated"):
        raise DiagnosticsError(f"last-iterate bounds need resolvent residuals, got {residuals.kind!r}")
    lam = _lam(traj, lam)
    if not 0 < lam < 1:
        return _inapplicable("last_iterate", f"lambda = {lam} is not in (0, 1)")
    K = traj.K
    dist = _dist(traj, z_star)
    e, assumed = _errors(traj)
    r2 = residuals.values[: K + 1] ** 2
    delta = 4.0 * e * (dist[1 : K + 1] + dist[:K])
    step = _report("last_iterate_step", r2[1:], r2[:K] + delta, float(dist.max()))
    eps = 2.0 * lam * e * dist[:K] + lam * lam * e * e
    ks = np.arange(1, K + 1)
    rhs = (dist[0] ** 2 + np.cumsum(eps)) / (lam * (1.0 - lam) * ks) + np.cumsum(ks * delta) / ks
    prefix = _report("last_iterate_rate", r2[1:], rhs, float(dist.max()))
    vacuous = int(np.count_nonzero(rhs >= r2[0])) if K else 0
    prefix.info["vacuous_prefixes"] = vacuous
    return BoundReport(
        "last_iterate",
        D_estimate=float(dist.max()),
        children=[step, prefix],
        info={"errors_assumed_zero": assumed, "errors_estimated": traj.errors_estimated},
    )


def check_la2_bound(
    traj: Trajectory, problem: ProblemSpec, params: SolverParams, z_star
) -> BoundReport:
    """Averaged ``|F zbar^k|^2`` bound for Lookahead-GDA with two inner steps.

    ``zbar^k = z^k - gamma F z^k``. Applies for ``gamma <= 1/L``,
    ``lam in (0, 1/2)``, ``2 rho > -(1 - 2 lam) gamma`` and
    ``2 rho >= 2 lam gamma - (1 - gamma^2 L^2) gamma``.
    """
    name = "la2"
    rho, L = problem.rho, problem.lipschitz
    if rho is None or L is None:
        raise DiagnosticsError(f"{problem.name} lacks rho or L metadata")
    g, lam = params.gamma, params.lam
    if params.tau != 2:
        return _inapplicable(name, f"needs tau = 2, got {params.tau}")
    if problem.constrained:
        return _inapplicable(name, "unconstrained problems only")
    if not 0 < lam < 0.5:
        return _inapplicable(name, f"lambda = {lam} is not in (0, 1/2)")
    if g * L > 1:
        return _inapplicable(name, f"gamma*L = {g * L} > 1")
    if not 2 * rho > -(1 - 2 * lam) * g:
        return _inapplicable(name, "2 rho > -(1 - 2 lam) gamma fails")
    if not 2 * rho >= 2 * lam * g - (1 - g * g * L * L) * g:
        return _inapplicable(name, "2 rho >= 2 lam gamma - (1 - gamma^2 L^2) gamma fails")
    K = traj.K
    dist = _dist(traj, z_star)
    Z = traj.iterates[:K]
    F = problem.field
    Zb = Z - g * F.eval_many(Z)
    f2 = np.sum(F.eval_many(Zb) ** 2, axis=1)
    coef = lam * g * ((1 - 2 * lam) * g + 2 * rho)
    ks = np.arange(1, K + 1)
    return _report(name, _prefix_mean(f2), dist[0] ** 2 / (coef * ks), float(dist.max()), coefficient=coef)


def _rho_for_bounds(problem: ProblemSpec) -> tuple:
    if problem.rho is not None:
        return problem.rho, "metadata"
    if problem.rho_range is not None:
        return problem.rho_range[0], "rho_range lower end"
    raise DiagnosticsError(f"{problem.name} has no rho information")


def check_fejer(traj: Trajectory, z_star, tol: float = 1e-12) -> BoundReport:
    """``|z^{k+1} - z*| <= |z^k - z*| + tol`` for every step."""
    dist = _dist(traj, z_star)
    return _report("fejer", dist[1:], dist[:-1], float(dist.max()), atol=tol, rtol=0.0)


def check_cegplus_bounds(
    traj: Trajectory, problem: ProblemSpec, params: SolverParams, z_star
) -> BoundReport:
    """Fejer monotonicity and the two averaged CEG+ bounds.

    With ``a = 2 alpha`` (the step is ``z + 2 alpha (H zbar - H z)``):

    * ``(1/K) sum |z^k - zbar^k|^2 <= D0^2 / (a (1 - gamma^2 L^2) K)``
      for ``a in (0, 1]`` and ``gamma < 1/L``;
    * ``(1/K) sum dist(0, S zbar^k)^2 <= D0^2 / (a gamma^2 (1 + 2 rho/gamma - a) K)``
      for ``a in (0, 1)``,

    both requiring ``a < 1 + 2 rho / gamma`` and ``gamma > max(-2 rho, 0)``.
    ``dist(0, S zbar)`` is computed as ``|H z - H zbar| / gamma``.
    """
    rho, rho_src = _rho_for_bounds(problem)
    L = problem.lipschitz
    if L is None:
        raise DiagnosticsError(f"{problem.name} lacks L metadata")
    g = params.gamma
    a = 2.0 * params.alpha
    K = traj.K
    dist = _dist(traj, z_star)
    D0 = dist[0]
    common = None
    if not g > max(-2.0 * rho, 0.0):
        common = f"gamma = {g} must exceed max(-2 rho, 0)"
    elif g * L > 1:
        common = f"gamma*L = {g * L} > 1"
    elif not a < 1.0 + 2.0 * rho / g:
        common = f"2 alpha = {a} must be < 1 + 2 rho/gamma = {1.0 + 2.0 * rho / g}"

    Z = traj.iterates[:K]
    F, A = problem.field, problem.resolvent
    HZ = Z - g * F.eval_many(Z)
    if traj.aux_iterates is not None and traj.solver == "cegplus":
        Zb = traj.aux_iterates[:K]
    else:
        Zb = np.array([A.apply(g, h) for h in HZ]).reshape(Z.shape)
    HZb = Zb - g * F.eval_many(Zb)
    ks = np.arange(1, K + 1)

    if common:
        ii = _inapplicable("cegplus_ii", common)
    elif not (0 < a <= 1):
        ii = _inapplicable("cegplus_ii", f"2 alpha = {a} not in (0, 1]")
    elif not g * L < 1:
        ii = _inapplicable("cegplus_ii", "needs gamma < 1/L strictly")
    else:
        lhs = _prefix_mean(np.sum((Z - Zb) ** 2, axis=1))
        ii = _report("cegplus_ii", lhs, D0 ** 2 / (a * (1 - g * g * L * L) * ks), float(dist.max()))

    if common:
        iii = _inapplicable("cegplus_iii", common)
    elif not (0 < a < 1):
        iii = _inapplicable("cegplus_iii", f"2 alpha = {a} not in (0, 1)")
    else:
        lhs = _prefix_mean(np.sum(((HZ - HZb) / g) ** 2, axis=1))
        coef = a * g * g * (1 + 2 * rho / g - a)
        iii = _report("cegplus_iii", lhs, D0 ** 2 / (coef * ks), float(dist.max()))

    children = [check_fejer(traj, z_star), ii, iii]
    if common:
        children[0] = _inapplicable("fejer", common)
    return BoundReport(
        "cegplus",
        D_estimate=float(dist.max()),
        children=children,
        info={"rho": rho, "rho_source": rho_src, "alpha_effective": a},
    )


def check_bounded_iterates(traj: Trajectory, z_star, lam: Optional[float] = None) -> BoundReport:
    """``|z^{k+1} - z*| <= |z^0 - z*| + lam sum_{j<=k} |e^j|``."""
    lam = _lam(traj, lam)
    dist = _dist(traj, z_star)
    e, assumed = _errors(traj)
    return _report(
        "bounded_iterates", dist[1:], dist[0] + lam * np.cumsum(e), float(dist.max()),
        errors_assumed_zero=assumed,
    )


def check_h_cocoercivity(problem: ProblemSpec, gamma: float, samples: int = 10_000, seed: int = 0) -> BoundReport:
    """``<H z' - H z, z' - z> >= |H z' - H z|^2 / 2 + (1 - gamma^2 L^2) |z' - z|^2 / 2``
    on sampled pairs, with ``H = id - gamma F``."""
    L = problem.lipschitz
    if L is not None and gamma * L > 1 + 1e-12:
        raise ParameterError(f"gamma*L = {gamma * L} exceeds 1")
    if L is None:
        raise DiagnosticsError(f"{problem.name} lacks L metadata")
    Z, W = sample_pairs(problem, samples, seed)
    F = problem.field
    dH = (W - gamma * F.eval_many(W)) - (Z - gamma * F.eval_many(Z))
    dz = W - Z
    lhs = 0.5 * np.sum(dH * dH, axis=1) + 0.5 * (1 - gamma * gamma * L * L) * np.sum(dz * dz, axis=1)
    rhs = np.sum(dH * dz, axis=1)
    return _report("h_cocoercivity", lhs, rhs)


def aggregate_reports(reports: Sequence[BoundReport], min_reps: int = 30, se_slack: float = 3.0) -> BoundReport:
    """Check a bound that holds in expectation over seeded replications.

    The mean of ``lhs - rhs`` across replications must be <= ``se_slack``
    standard errors (plus the usual tolerance) at every index.
    """
    reps = [r for r in reports if r.applicable]
    if len(reps) < min_reps:
        raise DiagnosticsError(f"need >= {min_reps} applicable replications, got {len(reps)}")
    n = min(r.lhs.size for r in reps)
    lhs = np.array([r.lhs[:n] for r in reps])
    rhs = np.array([r.rhs[:n] for r in reps])
    diff = lhs - rhs
    se = diff.std(axis=0, ddof=1) / math.sqrt(len(reps))
    ml, mr = lhs.mean(axis=0), rhs.mean(axis=0)
    sat = _sat(ml, mr + se_slack * se)
    return BoundReport(
        reps[0].bound_name + "_mean",
        ml,
        mr,
        sat,
        D_estimate=max(r.D_estimate for r in reps),
        info={"replications": len(reps), "se_slack": se_slack},
    )


# -- rates ------------------------------------------------------------------


def loglog_slope(xs, ys) -> Optional[float]:
    """Least-squares slope of ``log y`` against ``log x``; None if any y is 0."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or xs.size != ys.size:
        raise ParameterError("need at least two matching points")
    if np.any(ys <= 0):
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def slope_fit(residuals: ResidualSeries, checkpoints: Sequence[int]) -> Optional[float]:
    """Slope of ``log(residual^2)`` against ``log K`` at the checkpoints.

    Returns None when a checkpoint residual is exactly zero (converged).
    """
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size < 2 or np.any(np.diff(cps) <= 0):
        raise ParameterError("checkpoints must be increasing with at least two entries")
    if cps[-1] >= residuals.values.size or cps[0] < 1:
        raise ParameterError("checkpoint outside the residual series")
    return loglog_slope(cps, residuals.values[cps] ** 2)
