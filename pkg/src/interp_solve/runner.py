"""Run configurations, execution and output files for the command line."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field as dc_field, fields, replace
from typing import Optional

import numpy as np

from . import diagnostics as dg
from . import kernels
from .core import DiagnosticsError, DivergenceError, InterpSolveError, ParameterError, ParseError, UnsupportedError
from .problems import PROBLEMS, ProblemSpec, make_problem
from .solvers import SOLVERS, SolverParams, Trajectory, run_solver, tau_schedule

__all__ = [
    "RunConfig",
    "CHECKS",
    "Z0_PRESETS",
    "resolve",
    "execute",
    "format_float",
    "trajectory_csv",
]

CHECKS = ("km", "last-iterate", "la2", "cegplus", "fejer", "bounded", "h-cocoercivity")
Z0_PRESETS = {
    "quadratic": (1.0, 0.0),
    "polar": (1.0, 1.0),
    "forsaken": (0.5, 0.5),
    "lne-forsaken": (0.5, 0.5),
}
TAU_AUTO = ("auto-best", "auto-last")


def format_float(x: float) -> str:
    """17 significant digits; round-trips every float64."""
    return "%.16e" % x


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``gamma`` may be ``"auto"`` (1/L, or 0.9/L when the CEG+ check is
    requested) and ``tau`` may be ``"auto-best"`` / ``"auto-last"``.
    ``z0`` is a coordinate list or ``"default"`` for the problem's preset.
    """

    problem: str = "quadratic"
    a: Optional[float] = None
    b: Optional[float] = None
    L: Optional[float] = None
    rho: Optional[float] = None
    solver: str = "rapp"
    gamma: object = "auto"
    lam: float = 0.5
    tau: object = 1
    alpha: float = 0.5
    K: int = 100
    sigma0: float = 0.0
    batch: object = 1
    seed: int = 0
    z0: object = "default"
    checks: list = dc_field(default_factory=list)
    target: Optional[float] = None
    residual: str = "auto"
    max_calls: Optional[int] = None
    inner_tol: float = 1e-12
    unchecked: bool = False
    output: str = "out"

    # config-file keys mirror the command-line flags
    KEYS = {"lam": "lambda", "max_calls": "max-calls", "inner_tol": "inner-tol"}

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ParameterError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.solver not in SOLVERS:
            raise ParameterError(f"unknown solver {self.solver!r}; choose from {sorted(SOLVERS)}")
        for c in self.checks:
            if c not in CHECKS:
                raise ParameterError(f"unknown check {c!r}; choose from {CHECKS}")
        if self.residual != "auto" and self.residual not in dg.RESIDUAL_KINDS:
            raise ParameterError(f"unknown residual kind {self.residual!r}")
        if isinstance(self.gamma, str) and self.gamma != "auto":
            raise ParameterError(f"gamma must be a number or 'auto', got {self.gamma!r}")
        if isinstance(self.tau, str) and self.tau not in TAU_AUTO:
            raise ParameterError(f"tau must be an integer or one of {TAU_AUTO}, got {self.tau!r}")
        if isinstance(self.z0, str) and self.z0 != "default":
            raise ParameterError(f"z0 must be coordinates or 'default', got {self.z0!r}")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or (f.name == "checks" and not v):
                continue
            lines.append(f"{self.KEYS.get(f.name, f.name)} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        inv = {v: k for k, v in cls.KEYS.items()}
        kw = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{source}:{n}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            name = inv.get(key, key)
            kw[name] = val
        return cls.from_strings(kw, source)

    @classmethod
    def from_strings(cls, kw: dict, source: str = "<flags>") -> "RunConfig":
        """Build from string values (config file entries or CLI flags)."""
        known = {f.name for f in fields(cls)}
        out = {}
        for name, val in kw.items():
            if name not in known:
                raise ParseError(f"{source}: unknown key {name!r}")
            try:
                out[name] = _parse_value(name, val)
            except ValueError as exc:
                raise ParseError(f"{source}: bad value for {name}: {val!r} ({exc})") from None
        cfg = cls(**out)
        cfg.validate()
        return cfg

    def merged(self, overrides: dict) -> "RunConfig":
        cfg = replace(self, **overrides)
        cfg.validate()
        return cfg


def _num_or(val: str, words, conv):
    return val if val in words else conv(val)


def _parse_value(name: str, val):
    if not isinstance(val, str):
        return val
    if name in ("a", "b", "L", "rho", "lam", "alpha", "sigma0", "target", "inner_tol"):
        return float(val)
    if name in ("K", "seed", "max_calls"):
        return int(float(val)) if "e" in val.lower() else int(val)
    if name == "gamma":
        return _num_or(val, ("auto",), float)
    if name == "tau":
        return _num_or(val, TAU_AUTO, int)
    if name == "batch":
        return _num_or(val.lower(), ("best", "last"), int)
    if name == "z0":
        return val if val == "default" else [float(x) for x in val.split(",")]
    if name == "checks":
        return [c.strip() for c in val.split(",") if c.strip()]
    if name == "unchecked":
        low = val.lower()
        if low not in ("true", "false", "1", "0"):
            raise ValueError("expected true/false")
        return low in ("true", "1")
    return val


# -- resolution -------------------------------------------------------------


@dataclass
class Resolved:
    problem: ProblemSpec
    params: SolverParams
    z0: np.ndarray
    residual_kind: str
    residual_gamma: float
    z_star: Optional[np.ndarray]


def resolve(cfg: RunConfig) -> Resolved:
    """Turn a config into concrete objects, resolving the ``auto`` values."""
    cfg.validate()
    problem = make_problem(cfg.problem, a=cfg.a, b=cfg.b, L=cfg.L, rho=cfg.rho)
    L = problem.lipschitz
    if cfg.gamma == "auto":
        if L is None:
            raise ParameterError("gamma auto needs a known Lipschitz constant")
        gamma = (0.9 if "cegplus" in cfg.checks else 1.0) / L
    else:
        gamma = float(cfg.gamma)
    if isinstance(cfg.tau, str):
        if L is None:
            raise ParameterError("automatic tau needs a known Lipschitz constant")
        tau = tau_schedule(max(cfg.K, 1), gamma * L, cfg.tau.split("-")[1])
    else:
        tau = int(cfg.tau)
    params = SolverParams(
        gamma=gamma,
        lam=cfg.lam,
        tau=tau,
        alpha=cfg.alpha,
        K=cfg.K,
        sigma0=cfg.sigma0,
        batch=cfg.batch,
        seed=cfg.seed,
        strict=not cfg.unchecked,
        inner_tol=cfg.inner_tol,
        max_oracle_calls=cfg.max_calls,
        target=cfg.target,
    )
    z0 = np.array(Z0_PRESETS[cfg.problem] if cfg.z0 == "default" else cfg.z0, dtype=np.float64)
    if z0.size != problem.dim:
        raise ParameterError(f"z0 has {z0.size} coordinates, problem has {problem.dim}")
    exact_ok = problem.is_linear and not problem.constrained
    kind = cfg.residual
    if kind == "auto":
        kind = "exact" if exact_ok else "step"
    if kind in ("exact", "estimated"):
        rgamma = gamma
    else:
        rgamma = 1.0 / L if L else gamma
    z_star = None if problem.known_zero is None else problem.nearest_zero(z0)
    return Resolved(problem, params, z0, kind, rgamma, z_star)


# -- execution --------------------------------------------------------------


def _default_checks(cfg: RunConfig, res: Resolved) -> list:
    lin = res.problem.is_linear and not res.problem.constrained
    if cfg.solver in ("km-exact", "relaxed-pp") or (cfg.solver == "rapp" and cfg.sigma0 == 0):
        return ["km", "last-iterate"] if lin else []
    if cfg.solver == "cegplus":
        return ["cegplus"]
    if cfg.solver == "la-gda" and res.params.tau == 2 and lin:
        return ["la2"]
    return []


def _resolvent_series(res: Resolved, traj: Trajectory):
    p = res.problem
    if p.is_linear and not p.constrained:
        return dg.residual_series(p, traj, "exact")
    L = p.lipschitz
    if L is not None and res.params.gamma * L < 1:
        return dg.residual_series(p, traj, "estimated", tau_ref=50)
    raise DiagnosticsError("no resolvent residual available (needs a linear field or gamma*L < 1)")


def run_checks(names, res: Resolved, traj: Trajectory) -> dict:
    out = {}
    for name in names:
        try:
            if res.z_star is None and name != "h-cocoercivity":
                raise DiagnosticsError("problem has no known zero")
            if name == "km":
                rep = dg.check_km_bound(traj, _resolvent_series(res, traj), res.z_star)
            elif name == "last-iterate":
                rep = dg.check_last_iterate(traj, _resolvent_series(res, traj), res.z_star)
            elif name == "la2":
                rep = dg.check_la2_bound(traj, res.problem, res.params, res.z_star)
            elif name == "cegplus":
                rep = dg.check_cegplus_bounds(traj, res.problem, res.params, res.z_star)
            elif name == "fejer":
                rep = dg.check_fejer(traj, res.z_star)
            elif name == "bounded":
                rep = dg.check_bounded_iterates(traj, res.z_star)
            else:
                rep = dg.check_h_cocoercivity(res.problem, res.params.gamma)
            out[name] = rep.to_dict()
        except (DiagnosticsError, UnsupportedError, ParameterError) as exc:
            out[name] = {"bound": name, "applicable": False, "satisfied": None, "reason": str(exc)}
    return out


def trajectory_csv(traj: Trajectory, residuals: np.ndarray, dist: np.ndarray) -> str:
    d = traj.iterates.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "oracle_calls", "residual", "dist_to_zero"] + [f"z_{i}" for i in range(d)])
    for k, z in enumerate(traj.iterates):
        w.writerow(
            [k, int(traj.oracle_calls[k]), format_float(residuals[k]), format_float(dist[k])]
            + [format_float(x) for x in z]
        )
    return buf.getvalue()


def _slopes(values: np.ndarray) -> dict:
    K = values.size - 1
    cps = [10 ** j for j in range(1, 10) if 10 ** j <= K]
    if len(cps) < 2:
        return {}
    rs = dg.ResidualSeries(values, "", 0.0)
    return {"checkpoints": cps, "residual_sq_slope": dg.slope_fit(rs, cps)}


def check_output(path: str) -> None:
    """Fail early when ``path`` cannot hold the run's files."""
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise OSError(f"output path {path!r} is not writable: {exc}") from None


def execute(cfg: RunConfig, write: bool = True) -> dict:
    """Run one configuration; write ``trajectory.csv`` and ``report.json``.

    Returns the report. A diverging run still writes its partial output and
    sets ``status`` to ``"divergence"``.
    """
    if write:
        check_output(cfg.output)
    res = resolve(cfg)
    status = "ok"
    try:
        mon = lambda z: dg.residual(res.problem, z, res.residual_gamma, res.residual_kind)
        traj = run_solver(cfg.solver, res.problem, res.params, res.z0, monitor=mon)
    except DivergenceError as exc:
        traj = exc.trajectory
        status = "divergence"
    vals = np.array([dg.residual(res.problem, z, res.residual_gamma, res.residual_kind) for z in traj.iterates])
    dist = (
        np.linalg.norm(traj.iterates - res.z_star, axis=1)
        if res.z_star is not None
        else np.full(len(traj.iterates), math.nan)
    )
    checks = cfg.checks or _default_checks(cfg, res)
    report = {
        "status": status,
        "config": _jsonable(cfg),
        "resolved": {"gamma": res.params.gamma, "tau": res.params.tau, "residual_kind": res.residual_kind, "residual_gamma": res.residual_gamma},
        "problem": res.problem.summary(),
        "params": res.params.to_dict(),
        "backend": kernels.BACKEND_NAME,
        "stop_reason": traj.stop_reason,
        "warnings": traj.warnings,
        "iterations": traj.K,
        "oracle_calls": int(traj.oracle_calls[-1]),
        "final_residual": float(vals[-1]),
        "final_dist_to_zero": float(dist[-1]),
        "bounds": run_checks(checks, res, traj) if status == "ok" else {},
        "slope_fit": _slopes(vals),
    }
    if write:
        with open(os.path.join(cfg.output, "trajectory.csv"), "w", newline="") as fh:
            fh.write(trajectory_csv(traj, vals, dist))
        with open(os.path.join(cfg.output, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return report


def _jsonable(cfg: RunConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# -- sweeps -----------------------------------------------------------------


def _preset_fig_forsaken(base: RunConfig) -> list:
    common = dict(
        problem="forsaken", a=None, b=None, L=None, rho=None, z0="default",
        max_calls=100_000, K=1_000_000, target=None,
    )
    return [
        ("la-gda", dict(solver="la-gda", tau=20, lam=0.2, gamma="auto")),
        ("la-cegplus", dict(solver="la-cegplus", tau=20, lam=0.2, alpha=0.1, gamma="auto")),
        ("rapp", dict(solver="rapp", tau=10, lam=0.2, gamma=4.0 / _L("forsaken"), unchecked=True)),
        ("app", dict(solver="rapp", tau=10, lam=1.0, gamma=4.0 / _L("forsaken"), unchecked=True)),
    ], common


def _preset_fig_la(base: RunConfig) -> list:
    runs = []
    for prob, extra in (("polar", {}), ("quadratic", {"L": 1.0, "rho": -1.0 / 3.0})):
        for tag, kw in (
            ("la-gda-tau2", dict(solver="la-gda", tau=2)),
            ("la-gda-tau10", dict(solver="la-gda", tau=10)),
            ("la-eg", dict(solver="la-eg", tau=10)),
            ("la-cegplus", dict(solver="la-cegplus", tau=10, alpha=0.1)),
        ):
            over = dict(problem=prob, a=None, b=None, L=None, rho=None, gamma="auto", lam=0.1)
            over.update(extra)
            over.update(kw)
            runs.append((f"{prob}-{tag}", over))
    return runs, dict(z0="default", max_calls=100_000, K=1_000_000, target=None, unchecked=True)


def _L(name: str) -> float:
    return make_problem(name).lipschitz


PRESETS = {"fig-forsaken": _preset_fig_forsaken, "fig-la": _preset_fig_la}


def expand_grid(base: RunConfig, axes: dict) -> list:
    """Cartesian product of ``axes`` (name -> list of strings) in declared order."""
    if not axes:
        raise ParameterError("sweep grid is empty")
    points = [({}, [])]
    for key, values in axes.items():
        if not values:
            raise ParameterError(f"grid axis {key!r} has no values")
        points = [(dict(kw, **{key: v}), tags + [f"{key}={v}"]) for kw, tags in points for v in values]
    out = []
    for kw, tags in points:
        parsed = RunConfig.from_strings({k: v for k, v in kw.items()}, "<grid>")
        over = {k: getattr(parsed, k) for k in kw}
        out.append(("_".join(tags), over))
    return out


def preset_runs(name: str, base: RunConfig) -> list:
    try:
        runs, common = PRESETS[name](base)
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return [(label, dict(common, **kw)) for label, kw in runs]


def _sweep_one(cfg: RunConfig) -> dict:
    try:
        rep = execute(cfg)
    except (InterpSolveError, OSError) as exc:
        return {"status": "error", "error": str(exc)}
    return rep


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in label)


def sweep(base: RunConfig, runs: list, outdir: str, jobs: int = 1) -> list:
    """Execute ``runs`` (label, overrides) and write ``summary.csv``.

    Rows follow the declared order whatever the completion order.
    """
    check_output(outdir)
    cfgs = []
    for i, (label, over) in enumerate(runs):
        cfg = base.merged(dict(over, output=os.path.join(outdir, f"{i:03d}_{_safe(label)}")))
        cfgs.append((label, cfg))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_sweep_one, [c for _, c in cfgs]))
    else:
        reports = [_sweep_one(c) for _, c in cfgs]
    rows = []
    for i, ((label, cfg), rep) in enumerate(zip(cfgs, reports)):
        bounds = rep.get("bounds", {})
        flags = ";".join(
            f"{k}:{'na' if not v.get('applicable') else ('pass' if v.get('satisfied') else 'fail')}"
            for k, v in sorted(bounds.items())
        )
        rows.append(
            {
                "index": i,
                "label": label,
                "problem": cfg.problem,
                "solver": cfg.solver,
                "status": rep.get("status"),
                "stop_reason": rep.get("stop_reason", ""),
                "final_residual": format_float(rep["final_residual"]) if "final_residual" in rep else "",
                "oracle_calls": rep.get("oracle_calls", ""),
                "bounds": flags,
                "output": cfg.output,
                "error": rep.get("error", ""),
            }
        )
    with open(os.path.join(outdir, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


# -- reports ----------------------------------------------------------------


def _report_files(paths) -> list:
    files = []
    for p in paths:
        if os.path.isdir(p):
            for root, _dirs, names in sorted(os.walk(p)):
                if "report.json" in names:
                    files.append(os.path.join(root, "report.json"))
        elif os.path.exists(p):
            files.append(p)
        else:
            raise ParameterError(f"no such file or directory: {p}")
    return sorted(files)


def _walk_bounds(d: dict, counts: dict) -> None:
    name = d.get("bound")
    if name is None:
        return
    c = counts.setdefault(name, {"pass": 0, "fail": 0, "inapplicable": 0})
    if not d.get("applicable"):
        c["inapplicable"] += 1
    elif d.get("satisfied"):
        c["pass"] += 1
    else:
        c["fail"] += 1
    for child in d.get("children", []):
        _walk_bounds(child, counts)


def aggregate(paths) -> dict:
    """Per-bound pass/fail counts over the reports found under ``paths``."""
    if not paths:
        raise ParameterError("report needs at least one path")
    files = _report_files(paths)
    if not files:
        raise ParameterError("no report.json files found")
    counts = {}
    for f in files:
        try:
            with open(f) as fh:
                doc = json.load(fh)
            bounds = doc["bounds"]
            if not isinstance(bounds, dict):
                raise TypeError("'bounds' is not an object")
            for b in bounds.values():
                _walk_bounds(b, counts)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{f}: malformed report ({exc})") from None
    return {"runs": len(files), "bounds": counts}
