"""Monte Carlo simulation of controlled SDEs and pathwise transformation checks.

Ito systems use Euler-Maruyama; Stratonovich systems use the stochastic Heun
(trapezoidal) scheme, which converges to the Stratonovich solution. Brownian
increments come from :mod:`stoflin.philox` keyed by ``(base_seed + path, step)``
so every path is reproducible on its own.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DimensionError, PreconditionError
from .evaluate import compile_exprs
from .expr import ZERO, Expr, as_expr, simplify
from .philox import normals
from .parser import parse
from .system import Convention, Diffeo, StochasticSystem
from .transform import apply_correcting, coord_transform

DEFAULT_BUDGET = 2 * 10**8


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``control`` may use the state variables and the parameter ``t``. ``x_init``
    defaults to the system's equilibrium. ``save_every`` thins the stored grid.
    """

    t_end: float = 1.0
    dt: float = 0.01
    n_paths: int = 1000
    base_seed: int = 0
    control: Expr | str = ZERO
    x_init: tuple | None = None
    save_every: int = 1
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.t_end <= 0 or self.dt <= 0:
            raise ValueError("t_end and dt must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError("dt must not exceed t_end")
        if self.n_paths < 1 or self.save_every < 1:
            raise ValueError("n_paths and save_every must be at least 1")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must fit in 64 bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_dt(self, dt: float) -> "SimConfig":
        return SimConfig(self.t_end, dt, self.n_paths, self.base_seed, self.control, self.x_init, self.save_every, self.budget)


@dataclass
class TrajectoryEnsemble:
    times: np.ndarray
    paths: np.ndarray
    seeds: np.ndarray
    convention: Convention
    exited: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.exited is None:
            self.exited = ~np.all(np.isfinite(self.paths), axis=(1, 2))

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def dim(self) -> int:
        return self.paths.shape[2]

    @property
    def exit_fraction(self) -> float:
        return float(np.mean(self.exited))

    @property
    def final(self) -> np.ndarray:
        return self.paths[:, -1, :]

    def alive(self) -> np.ndarray:
        return self.paths[~self.exited]

    def to_csv(self, path) -> None:
        """Write ``path,step,t,x1..xn`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "step", "t"] + [f"x{i}" for i in range(1, self.dim + 1)])
            for p in range(self.n_paths):
                for k, t in enumerate(self.times):
                    w.writerow([p, k, repr(float(t))] + [repr(float(v)) for v in self.paths[p, k]])


def _drift_parts(s: StochasticSystem, control):
    if s.chart is not None:
        raise PreconditionError("simulation needs a system in its own coordinates (use a transform with an inverse)")
    n = s.dim
    u = simplify(parse(control, n) if isinstance(control, str) else as_expr(control))
    closed = list(s.f + s.g.scale(u)) if u != ZERO else list(s.f)
    drift = compile_exprs(closed, n)
    sig = s.sigma_matrix
    if sig.shape[1] != 1:
        raise DimensionError("the simulator handles a single noise channel")
    disp = compile_exprs([row[0] for row in sig.rows], n)
    return drift, disp


def simulate(s: StochasticSystem, cfg: SimConfig) -> TrajectoryEnsemble:
    """Simulate ``cfg.n_paths`` paths of the closed loop ``u = cfg.control``.

    Paths whose state becomes non-finite are frozen at NaN and flagged in
    ``exited``.
    """
    n, N, K = s.dim, cfg.n_paths, cfg.n_steps
    if N * K > cfg.budget:
        raise BudgetExceededError(f"{N} paths x {K} steps exceeds the budget {cfg.budget}")
    drift, disp = _drift_parts(s, cfg.control)
    x_init = np.asarray(cfg.x_init if cfg.x_init is not None else s.z0(), dtype=float)
    if x_init.shape != (n,):
        raise DimensionError(f"initial state must have {n} entries")
    seeds = (np.uint64(cfg.base_seed) + np.arange(N, dtype=np.uint64)).astype(np.uint64)
    X = np.tile(x_init, (N, 1))
    saved = [X.copy()]
    times = [0.0]
    dt = cfg.t_end / K
    sq = np.sqrt(dt)
    params = dict(s.params)
    heun = s.convention is Convention.STRATONOVICH
    stochastic = s.convention is not Convention.DETERMINISTIC
    with np.errstate(all="ignore"):
        for k in range(K):
            t = k * dt
            params["t"] = t
            dW = normals(seeds, k)[:, None] * sq if stochastic else 0.0
            a = drift(X, params)
            b = disp(X, params) if stochastic else 0.0
            if heun:
                Xp = X + a * dt + b * dW
                params["t"] = t + dt
                a2 = drift(Xp, params)
                b2 = disp(Xp, params)
                X = X + 0.5 * (a + a2) * dt + 0.5 * (b + b2) * dW
            else:
                X = X + a * dt + b * dW
            bad = ~np.all(np.isfinite(X), axis=1)
            X[bad] = np.nan
            if (k + 1) % cfg.save_every == 0 or k + 1 == K:
                saved.append(X.copy())
                times.append((k + 1) * dt)
    paths = np.stack(saved, axis=1)
    return TrajectoryEnsemble(np.array(times), paths, seeds, s.convention)


def pushforward_paths(e: TrajectoryEnsemble, T: Diffeo, params=None) -> TrajectoryEnsemble:
    """Apply ``T`` to every stored state."""
    if T.dim != e.dim:
        raise DimensionError(f"map of dimension {T.dim} applied to {e.dim}-dimensional paths")
    flat = e.paths.reshape(-1, e.dim)
    with np.errstate(all="ignore"):
        out = T.apply(flat, params).reshape(e.paths.shape)
    exited = e.exited | ~np.all(np.isfinite(out), axis=(1, 2))
    return TrajectoryEnsemble(e.times.copy(), out, e.seeds.copy(), e.convention, exited)


def _check_grid(a: TrajectoryEnsemble, b: TrajectoryEnsemble):
    if a.paths.shape[1:] != b.paths.shape[1:] or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise DimensionError("ensembles do not share a time grid")


def compare_ensembles(a: TrajectoryEnsemble, b: TrajectoryEnsemble, mode: str = "pathwise", tol: float | None = None) -> dict:
    """Pathwise or weak comparison of two ensembles on the same grid.

    ``pathwise`` needs identical seeds and reports the worst absolute
    difference over surviving paths (``tol`` absolute, default 1e-12).
    ``weak`` reports per-time differences of means and second moments with
    standard errors; ``tol`` is in standard errors (default 3).
    """
    _check_grid(a, b)
    if mode == "pathwise":
        if a.n_paths != b.n_paths or not np.array_equal(a.seeds, b.seeds):
            raise PreconditionError("pathwise comparison needs the same seeds")
        ok = ~(a.exited | b.exited)
        diff = a.paths[ok] - b.paths[ok]
        d = float(np.max(np.abs(diff), initial=0.0))
        rms = float(np.sqrt(np.mean(diff[:, -1, :] ** 2))) if ok.any() else 0.0
        tol = 1e-12 if tol is None else tol
        return {
            "mode": mode,
            "max_pathwise": d,
            "rms_final": rms,
            "passed": bool(d <= tol),
            "exit_fraction": float(np.mean(~ok)),
        }
    if mode != "weak":
        raise ValueError("mode must be 'pathwise' or 'weak'")
    tol = 3.0 if tol is None else tol
    A, B = a.alive(), b.alive()
    rows, worst = [], 0.0
    for k, t in enumerate(a.times):
        xa, xb = A[:, k, :], B[:, k, :]
        dmean = xa.mean(axis=0) - xb.mean(axis=0)
        se = np.sqrt(xa.var(axis=0, ddof=1) / len(xa) + xb.var(axis=0, ddof=1) / len(xb)) if min(len(xa), len(xb)) > 1 else np.zeros(a.dim)
        dm2 = (xa**2).mean(axis=0) - (xb**2).mean(axis=0)
        se2 = np.sqrt((xa**2).var(axis=0, ddof=1) / len(xa) + (xb**2).var(axis=0, ddof=1) / len(xb)) if min(len(xa), len(xb)) > 1 else np.zeros(a.dim)
        z = np.where(se > 0, np.abs(dmean) / np.where(se > 0, se, 1), np.where(dmean != 0, np.inf, 0.0))
        worst = max(worst, float(np.max(z)))
        rows.append({"t": float(t), "dmean": dmean.tolist(), "stderr": se.tolist(), "dsecond": dm2.tolist(), "stderr_second": se2.tolist()})
    exit_fraction = float((a.exited.sum() + b.exited.sum()) / (a.n_paths + b.n_paths))
    return {"mode": mode, "weak": rows, "max_z": worst, "passed": bool(worst <= tol), "exit_fraction": exit_fraction}


def _fit_order(dts, errs) -> float | None:
    dts, errs = np.asarray(dts, float), np.asarray(errs, float)
    ok = errs > 0
    if ok.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(dts[ok]), np.log(errs[ok]), 1)
    return float(slope)


def _commutation_once(s_ito: StochasticSystem, T: Diffeo, cfg: SimConfig):
    x_init = np.asarray(cfg.x_init if cfg.x_init is not None else s_ito.x0, dtype=float)
    z_init = tuple(T.apply(x_init[None, :], s_ito.params)[0])
    zcfg = SimConfig(cfg.t_end, cfg.dt, cfg.n_paths, cfg.base_seed, ZERO, z_init, cfg.save_every, cfg.budget)
    xcfg = SimConfig(cfg.t_end, cfg.dt, cfg.n_paths, cfg.base_seed, ZERO, tuple(x_init), cfg.save_every, cfg.budget)
    A = pushforward_paths(simulate(s_ito, xcfg), T, s_ito.params)
    B = simulate(coord_transform(s_ito, T, preserve_equilibrium=False), zcfg)
    strat_z = coord_transform(apply_correcting(s_ito, "forward"), T, preserve_equilibrium=False)
    C = simulate(strat_z, zcfg)
    return A, B, C


def verify_commutation(s_ito: StochasticSystem, T: Diffeo, cfg: SimConfig, dts: Sequence[float] | None = None) -> dict:
    """Sample-path check that transforming then simulating matches simulating then transforming.

    Route A pushes Euler-Maruyama paths of ``s_ito`` through ``T``; route B
    simulates the Ito-transformed system; route C simulates the corrected
    Stratonovich system transformed by plain pushforward with the Heun scheme.
    All routes share Brownian increments. The strong order is fitted from the
    RMS end-point A-B error over ``dts`` (default ``dt, dt/4, dt/16``).
    """
    if s_ito.convention is not Convention.ITO:
        raise PreconditionError("verify_commutation expects an Ito system")
    if T.inverse is None:
        raise PreconditionError("verify_commutation needs T with a symbolic inverse")
    dts = list(dts) if dts is not None else [cfg.dt, cfg.dt / 4, cfg.dt / 16]
    rms_ab, rms_ac, first = [], [], None
    for dt in dts:
        A, B, C = _commutation_once(s_ito, T, cfg.with_dt(dt))
        ok = ~(A.exited | B.exited | C.exited)
        rms_ab.append(float(np.sqrt(np.mean((A.final[ok] - B.final[ok]) ** 2))) if ok.any() else float("nan"))
        rms_ac.append(float(np.sqrt(np.mean((A.final[ok] - C.final[ok]) ** 2))) if ok.any() else float("nan"))
        if first is None:
            first = (A, B, C, ok)
    A, B, C, ok = first
    max_ab = float(np.max(np.abs(A.paths[ok] - B.paths[ok]), initial=0.0))
    max_ac = float(np.max(np.abs(A.paths[ok] - C.paths[ok]), initial=0.0))
    weak = compare_ensembles(A, B, "weak")
    return {
        "max_pathwise": max_ab,
        "max_pathwise_AC": max_ac,
        "dts": [float(d) for d in dts],
        "rms_AB": rms_ab,
        "rms_AC": rms_ac,
        "order_estimate": _fit_order(dts, rms_ab),
        "order_estimate_AC": _fit_order(dts, rms_ac),
        "weak": weak["weak"],
        "exit_fraction": float(np.mean(~ok)),
    }
