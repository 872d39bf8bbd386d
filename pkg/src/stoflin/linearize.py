"""Linearizability tests and construction of linearizing transformations.

Variants
--------
``det``
    deterministic state feedback linearization.
``strat_g``
    Stratonovich, linear in the control part only (same as ``det``).
``strat_gsigma``
    Stratonovich, linear control and constant dispersion.
``ito_gsigma``
    Ito, via the correcting term and the Stratonovich ``gsigma`` pipeline.
``ito_g_commuting``
    Ito, control-linear, for dispersions commuting with the control brackets.
``ito_g``
    Ito chain ``T_{i+1} = L_f T_i + P_sigma T_i`` for a user-supplied output.
``sigma``
    dispersion-linear, for a user-supplied feedback ``alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConventionError,
    IntegrationError,
    LinearizationError,
    PreconditionError,
    SingularDistributionError,
    TooManyDomainFailures,
)
from .evaluate import compile_exprs
from .expr import (
    ONE,
    ZERO,
    Const,
    Expr,
    Mul,
    Var,
    as_expr,
    atan,
    exp,
    expand,
    ln,
    sinh,
    sqrt,
    tan,
    differentiate,
    is_zero,
    register_derivative,
    simplify,
    split_constant_factor,
    substitute,
    to_string,
    variables,
)
from .fields import Distribution, MatrixField, VectorField, as_matrix
from .integrate import integrate, sec_antiderivative
from .lie import (
    ad_iter,
    ad_list,
    diffusion_matrix,
    involutivity_residual,
    lie_bracket,
    lie_derivative,
    matrix_rank,
    ranks_on_samples,
    second_order_apply,
)
from .sampling import check_skips, finite_rows
from .system import Convention, Diffeo, Feedback, StochasticSystem
from .transform import (
    apply_correcting,
    coord_transform,
    correcting_term,
    feedback_transform,
    ito_scalar,
)

VARIANTS = ("det", "strat_g", "strat_gsigma", "ito_g_commuting", "ito_gsigma", "sigma", "ito_g")
HALF = Const(Fraction(1, 2))
CONST_TOL = 1e-7
ZERO_TOL = 1e-8
DECOUPLING_FLOOR = 1e-10


def normalize_variant(name: str) -> str:
    v = name.strip().lower().replace("-", "_")
    if v not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return v


# --------------------------------------------------------------------------
# linearity reports


def controllability_matrix(A, B) -> np.ndarray:
    """``[B, AB, ..., A^{n-1} B]`` for ``B`` of shape ``(n,)`` or ``(n, m)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    blocks, cur = [], B
    for _ in range(A.shape[0]):
        blocks.append(cur)
        cur = A @ cur
    return np.hstack(blocks)


def controllability_rank(A, B, tol: float = 1e-8) -> int:
    return matrix_rank(controllability_matrix(A, B), tol)


@dataclass
class LinearityReport:
    is_g_linear: bool
    is_sigma_linear: bool
    is_gsigma_linear: bool
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    g_controllable: bool
    sigma_controllable: bool
    gsigma_controllable: bool
    residuals: dict = field(default_factory=dict)
    ranks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "is_g_linear": self.is_g_linear,
            "is_sigma_linear": self.is_sigma_linear,
            "is_gsigma_linear": self.is_gsigma_linear,
            "g_controllable": self.g_controllable,
            "sigma_controllable": self.sigma_controllable,
            "gsigma_controllable": self.gsigma_controllable,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "S": self.S.tolist(),
            "ranks": dict(self.ranks),
            "residuals": dict(self.residuals),
        }


def _jacobian_at(exprs: Sequence[Expr], n: int, point, params) -> np.ndarray:
    J = [[differentiate(e, j) for j in range(1, n + 1)] for e in exprs]
    flat = [e for row in J for e in row]
    vals = compile_exprs(flat, n)(np.array([point]), params)[0]
    return vals.reshape(len(exprs), n)


def _state_points(s: StochasticSystem, X: np.ndarray) -> np.ndarray:
    return s.chart.apply(X, s.params) if s.chart is not None else X


def _rel_std(V: np.ndarray) -> tuple[float, np.ndarray]:
    mean = V.mean(axis=0)
    if len(V) < 2:
        return 0.0, mean
    std = V.std(axis=0, ddof=1)
    return float(np.max(std / (1.0 + np.abs(mean)), initial=0.0)), mean


def verify_linear(s: StochasticSystem, tol: float = CONST_TOL, n_samples: int = 64, rank_tol: float = 1e-8) -> LinearityReport:
    """Sampled linearity and controllability report.

    ``A`` is the drift Jacobian at the equilibrium; the drift is linear when it
    matches ``A z`` on the samples. ``g`` and ``sigma`` are constant when their
    relative sample standard deviation is at most ``tol``; ``B`` and ``S`` are
    their sample means.
    """
    n = s.dim
    X = np.asarray(s.sampler.sample(n_samples), dtype=float)
    Z = _state_points(s, X)
    F = s.f.evaluate(X, s.params)
    G = s.g.evaluate(X, s.params)
    Sm = as_matrix(s.sigma).evaluate(X, s.params).reshape(len(X), -1)
    mask = finite_rows(Z, F, G, Sm)
    check_skips(mask, "linearity test")
    Z, F, G, Sm = Z[mask], F[mask], G[mask], Sm[mask]

    Jf = _jacobian_at(list(s.f), s.base_dim, s.x0, s.params)
    if s.chart is not None:
        Jc = _jacobian_at(list(s.chart.forward), s.base_dim, s.x0, s.params)
        A = Jf @ np.linalg.inv(Jc)
    else:
        A = Jf
    AZ = Z @ A.T
    f_res = float(np.max(np.abs(F - AZ) / (1.0 + np.maximum(np.abs(F), np.abs(AZ))), initial=0.0))
    g_res, B = _rel_std(G)
    s_res, Svec = _rel_std(Sm)
    k = s.noise_dim
    S = Svec.reshape(n, k)

    f_ok = f_res <= tol
    g_lin = bool(f_ok and g_res <= tol)
    s_lin = bool(f_ok and s_res <= tol)
    rb = controllability_rank(A, B, rank_tol)
    rs = controllability_rank(A, S, rank_tol) if np.any(S) else 0
    rgs = matrix_rank(np.hstack([controllability_matrix(A, B), controllability_matrix(A, S)]), rank_tol)
    return LinearityReport(
        is_g_linear=g_lin,
        is_sigma_linear=s_lin,
        is_gsigma_linear=bool(g_lin and s_lin),
        A=A,
        B=B,
        S=S,
        g_controllable=rb == n,
        sigma_controllable=rs == n,
        gsigma_controllable=rgs == n,
        residuals={"f_linear": f_res, "g_constant": g_res, "sigma_constant": s_res},
        ranks={"g": rb, "sigma": rs, "gsigma": rgs},
    )


def check_det_sfb(s: StochasticSystem, sampler=None, tol: float = 1e-8, n_samples: int = 64, f: VectorField | None = None) -> dict:
    """Nonsingularity of ``span{ad_f^i g, i < n}`` and involutivity of ``span{ad_f^i g, i < n-1}``.

    The dispersion is ignored. ``f`` overrides the drift (used with the
    corrected drift of Ito systems).
    """
    sampler = sampler or s.sampler
    drift = f or s.f
    n = s.dim
    gens = ad_list(drift, s.g, n)
    X = np.asarray(sampler.sample(n_samples), dtype=float)
    ranks = ranks_on_samples(Distribution(gens), X, s.params, tol)
    ok = ranks >= 0
    check_skips(ok, "distribution rank")
    min_rank = int(ranks[ok].min())
    nonsingular = min_rank == n
    if n == 1:
        return {"nonsingular": nonsingular, "involutive": True, "min_rank": min_rank, "involutivity_residual": 0.0}
    try:
        res = involutivity_residual(Distribution(gens[: n - 1]), sampler, s.params, n_samples, tol)
        involutive = res <= tol
    except SingularDistributionError:
        res, involutive = float("inf"), False
    return {"nonsingular": bool(nonsingular), "involutive": bool(involutive), "min_rank": min_rank, "involutivity_residual": res}


# --------------------------------------------------------------------------
# linearizing transformations


def _tidy(e: Expr) -> Expr:
    """The expanded form of ``e`` when it prints shorter."""
    x = simplify(expand(e))
    return x if len(to_string(x)) < len(to_string(e)) else e


@dataclass
class LinearizingTransformation:
    """Coordinate change ``T`` plus feedback ``fb`` produced by one of the pipelines."""

    T: Diffeo
    fb: Feedback
    variant: str
    lam: Expr
    s_constants: list | None = None
    residuals: dict = field(default_factory=dict)
    passed: bool = False
    notes: list = field(default_factory=list)

    def apply(self, s: StochasticSystem, convention: Convention | None = None) -> StochasticSystem:
        """Closed loop under ``fb`` expressed in ``z = T(x)``.

        ``convention`` reinterprets the source system first (useful to apply an
        Ito-derived transformation to the corrected Stratonovich system).
        """
        src = s if convention is None else s.with_convention(convention)
        closed = feedback_transform(src, self.fb, check=False)
        out = coord_transform(closed, self.T, preserve_equilibrium=False)
        if out.chart is not None:
            return out
        sig = out.sigma
        sig = VectorField([_tidy(e) for e in sig]) if isinstance(sig, VectorField) else sig
        return out.replace(f=VectorField([_tidy(e) for e in out.f]), g=VectorField([_tidy(e) for e in out.g]), sigma=sig)

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "passed": bool(self.passed),
            "residuals": {k: self.residuals[k] for k in sorted(self.residuals)},
            "T": [to_string(e) for e in self.T.forward],
            "Tinv": None if self.T.inverse is None else [to_string(e) for e in self.T.inverse],
            "alpha": to_string(self.fb.alpha),
            "beta": to_string(self.fb.beta),
            "s_constants": None if self.s_constants is None else [float(v) for v in self.s_constants],
        }
        if self.notes:
            d["notes"] = list(self.notes)
        return d


def _sample_values(exprs: Sequence[Expr], s: StochasticSystem, sampler, n_samples: int) -> np.ndarray:
    X = np.asarray(sampler.sample(n_samples), dtype=float)
    vals = compile_exprs(list(exprs), s.base_dim)(X, s.params)
    mask = finite_rows(vals)
    check_skips(mask, "sampled condition")
    return vals[mask]


def _max_abs(e: Expr, s: StochasticSystem, sampler, n_samples: int) -> float:
    if is_zero(e):
        return 0.0
    v = _sample_values([e], s, sampler, n_samples)[:, 0]
    return float(np.max(np.abs(v), initial=0.0))


def _min_abs(e: Expr, s: StochasticSystem, sampler, n_samples: int) -> float:
    if is_zero(e):
        return 0.0
    v = _sample_values([e], s, sampler, n_samples)[:, 0]
    return float(np.min(np.abs(v), initial=np.inf))


def _chain_step(variant: str, s: StochasticSystem, alpha: Expr | None):
    """Drift used by the chain and the recursion ``T -> T_next``."""
    sig = s.sigma_field if variant not in ("det", "strat_g") else None
    if variant in ("det", "strat_g", "strat_gsigma"):
        drift = s.f
        return drift, lambda T: lie_derivative(drift, T)
    if variant == "ito_gsigma":
        drift = s.f + correcting_term(s.sigma)
        return drift, lambda T: lie_derivative(drift, T)
    if variant == "ito_g_commuting":
        drift = s.f + correcting_term(s.sigma)
        return drift, lambda T: simplify(lie_derivative(drift, T) + HALF * lie_derivative(sig, lie_derivative(sig, T)))
    if variant == "ito_g":
        drift = s.f
        return drift, lambda T: simplify(lie_derivative(drift, T) + ito_scalar(s.sigma, T))
    if variant == "sigma":
        drift = s.f + s.g.scale(alpha if alpha is not None else ZERO)
        if s.convention is Convention.ITO:
            drift = drift + correcting_term(s.sigma)
        return drift, lambda T: lie_derivative(drift, T)
    raise ValueError(variant)


def chain_from_lambda(
    s: StochasticSystem,
    lam: Expr,
    variant: str = "det",
    alpha: Expr | None = None,
    tol: float = ZERO_TOL,
    n_samples: int = 64,
    verify: bool = True,
) -> LinearizingTransformation:
    """Build ``T_1 = lam, T_{i+1} = step(T_i)`` and the feedback of the variant.

    Raises
    ------
    LinearizationError
        ``chain`` when ``L_g T_i`` does not vanish for ``i < n``; ``decoupling``
        when ``L_g T_n`` vanishes somewhere on the samples; ``jacobian`` when
        ``T`` is singular at ``x0``.

    Notes
    -----
    With ``verify`` the closed loop is checked against the variant's linearity
    requirement; the outcome sets ``passed`` and failures are kept in ``notes``
    rather than raised.
    """
    variant = normalize_variant(variant)
    if s.chart is not None:
        raise PreconditionError("chain construction needs a system in its own coordinates")
    lam = simplify(as_expr(lam))
    n = s.dim
    _, step = _chain_step(variant, s, alpha)
    ctrl = s.sigma_field if variant == "sigma" else s.g
    Ts = [lam]
    for _ in range(n - 1):
        Ts.append(step(Ts[-1]))
    residuals = {}
    for i, Ti in enumerate(Ts[:-1], 1):
        r = _max_abs(lie_derivative(ctrl, Ti), s, s.sampler, n_samples)
        residuals[f"LgT{i}"] = r
        if r > tol:
            raise LinearizationError("chain", f"L_g T_{i} does not vanish (max {r:.3g})", residuals)
    LgTn = lie_derivative(ctrl, Ts[-1])
    dmin = _min_abs(LgTn, s, s.sampler, n_samples)
    residuals["decoupling_min"] = dmin
    if dmin < DECOUPLING_FLOOR:
        raise LinearizationError("decoupling", "the decoupling term L_g T_n vanishes on the domain", residuals)
    J = _jacobian_at(Ts, n, s.x0, s.params)
    rank = matrix_rank(J)
    residuals["jacobian_rank"] = rank
    if rank < n:
        raise LinearizationError("jacobian", f"T has Jacobian rank {rank} < {n} at x0", residuals)
    if variant == "sigma":
        fb = Feedback(alpha if alpha is not None else ZERO, ONE)
    else:
        fb = Feedback(-step(Ts[-1]) / LgTn, ONE / LgTn)
    T0 = compile_exprs(Ts, n)(np.array([s.x0]), s.params)[0]
    residuals["T_at_x0"] = float(np.max(np.abs(T0)))
    lt = LinearizingTransformation(Diffeo(Ts, triangular_inverse(Ts)), fb, variant, lam, residuals=residuals)
    if verify:
        src = s.without_noise() if variant == "det" else s
        try:
            _round_trip(lt, src, _REQUIREMENT[variant])
        except LinearizationError as exc:
            lt.notes.append(str(exc))
    return lt


def _univariate_inverses(x: Expr, z: Expr) -> list:
    return [
        (sec_antiderivative(x), atan(sinh(z))),
        (exp(x) - 1, ln(z + 1)),
        (sinh(x), ln(z + sqrt(z ** 2 + 1))),
        (atan(x), tan(z)),
        (ln(x + 1), exp(z) - 1),
    ]


def triangular_inverse(Ts: Sequence[Expr]) -> tuple | None:
    """Symbolic inverse of a triangular map, or None.

    Each ``T_i`` must bring in exactly one new variable, either affinely
    (``a x_k + p`` with ``a, p`` free of ``x_k``) or as a scaled entry of a
    small table of invertible one-variable maps.
    """
    known: dict = {}
    for i, T in enumerate(Ts, 1):
        new = variables(T) - known.keys()
        if len(new) != 1:
            return None
        k = new.pop()
        zi = Var(i)
        a = differentiate(T, k)
        if k not in variables(a):
            p = simplify(T - a * Var(k))
            if k in variables(p):
                return None
            known[k] = simplify((zi - substitute(p, known)) / substitute(a, known))
            continue
        if variables(T) != {k}:
            return None
        c, h = split_constant_factor(T)
        for fw, inv in _univariate_inverses(Var(k), zi / c):
            if simplify(fw) == h:
                known[k] = simplify(inv)
                break
        else:
            return None
    return tuple(known[j] for j in range(1, len(Ts) + 1))


# --------------------------------------------------------------------------
# the planar output solver


def _numerically_zero(e: Expr, s: StochasticSystem, n_samples: int = 64) -> bool:
    if is_zero(e):
        return True
    try:
        return _max_abs(e, s, s.sampler, n_samples) <= 1e-14
    except TooManyDomainFailures:
        return False


def _separate(r: Expr):
    """Split ``r`` into ``p(x1) * q(x2)``; None when some factor mixes both."""
    r = simplify(r)
    items = r.args if isinstance(r, Mul) else (r,)
    p, q = [], []
    for it in items:
        vs = variables(it)
        if vs <= {1}:
            p.append(it)
        elif vs <= {2}:
            q.append(it)
        else:
            return None
    return simplify(Mul(p)) if p else ONE, simplify(Mul(q)) if q else ONE


def _x0_map(s: StochasticSystem) -> dict:
    out = {}
    for i, v in enumerate(s.x0, 1):
        out[i] = Const(Fraction(int(v))) if float(v).is_integer() else Const(float(v))
    return out


def normalize_output(lam: Expr, s: StochasticSystem) -> Expr:
    """Shift so ``lam(x0) = 0`` and flip the sign so the first nonzero gradient entry at ``x0`` is positive."""
    lam = simplify(lam)
    n = s.dim
    grads = [differentiate(lam, j) for j in range(1, n + 1)]
    v0 = substitute(lam, _x0_map(s))
    if not variables(v0) and not is_zero(v0):
        lam = simplify(lam - v0)
    g0 = compile_exprs(grads, n)(np.array([s.x0]), s.params)[0]
    nz = [g for g in g0 if abs(g) > 1e-12]
    if nz and nz[0] < 0:
        lam = simplify(-lam)
        grads = [simplify(-d) for d in grads]
    # keep the exact gradient attached to the shifted/flipped output
    for j, d in enumerate(grads, 1):
        if j in variables(lam):
            register_derivative(lam, j, d)
    return lam


def solve_lambda_n2(s: StochasticSystem, generator: VectorField | None = None) -> list:
    """Output candidates ``lam`` with ``L_g lam = 0`` for planar (or scalar) systems.

    The annihilator of ``g`` is ``omega = (-g2, g1)``; an integrating factor is
    found when the slope ``g2/g1`` is a function of one variable or a product of
    one-variable factors. The returned generator is shifted to vanish at ``x0``;
    any smooth function of it with nonzero derivative is also a solution.

    Raises
    ------
    LinearizationError
        ``solve`` stage: dimension other than 1 or 2, a slope that does not
        separate, or an integrand outside the antiderivative table.
    """
    g = generator or s.g
    n = s.dim
    if n == 1:
        return [normalize_output(Var(1), s)]
    if n != 2:
        raise LinearizationError("solve", f"the planar solver needs n = 2, got n = {n}")
    g1, g2 = g[0], g[1]
    x1, x2 = Var(1), Var(2)
    try:
        if _numerically_zero(g1, s):
            lam = x1
        elif _numerically_zero(g2, s):
            lam = x2
        else:
            r = simplify(g2 / g1)
            vs = variables(r)
            if vs <= {1}:
                lam = x2 - integrate(r, 1)
            elif vs <= {2}:
                lam = x1 - integrate(simplify(1 / r), 2)
            else:
                parts = _separate(r)
                if parts is None:
                    raise LinearizationError("solve", f"slope {to_string(r)} does not separate (unsupported form)")
                p, q = parts
                lam = integrate(simplify(1 / q), 2) - integrate(p, 1)
    except IntegrationError as exc:
        raise LinearizationError("solve", f"omega is not integrable with the table: {exc}") from exc
    return [normalize_output(lam, s)]


def _fit_gauge(drift: VectorField, sigma: VectorField, lam0: Expr, s: StochasticSystem, n_samples: int = 64) -> Expr:
    """Choose ``phi(lam0)`` so that ``L_{ad^i sigma} phi(lam0)`` is constant.

    Only coordinate outputs ``lam0 = x_k`` with a first nonvanishing condition
    depending on ``x_k`` alone are re-gauged; otherwise ``lam0`` is kept.
    """
    n = s.dim
    for i in range(n):
        q = lie_derivative(ad_iter(drift, sigma, i), lam0)
        if _numerically_zero(q, s, n_samples):
            continue
        vals = _sample_values([q], s, s.sampler, n_samples)[:, 0]
        if np.std(vals) <= CONST_TOL * (1 + abs(np.mean(vals))):
            return lam0
        k = next((j for j in range(1, n + 1) if lam0 == Var(j)), None)
        if k is None or not variables(q) <= {k}:
            return lam0
        _, var_part = split_constant_factor(q)
        try:
            phi = integrate(simplify(1 / var_part), k)
        except IntegrationError as exc:
            raise LinearizationError("gauge", f"cannot integrate 1/({to_string(var_part)})") from exc
        return normalize_output(phi, s)
    return lam0


def strat_gsigma_check(s: StochasticSystem, T, tol: float = CONST_TOL, n_samples: int = 64) -> list:
    """Means of ``L_{ad_f^i sigma} lam`` for ``i < n`` after checking they are constant.

    ``T`` is a :class:`LinearizingTransformation`, a :class:`Diffeo` (its
    first component is the output) or an output expression.

    Raises
    ------
    LinearizationError
        ``sigma-check`` stage, with the worst index in the diagnostics.
    """
    if s.convention is Convention.ITO:
        raise ConventionError("the dispersion condition is stated for Stratonovich systems")
    if isinstance(T, LinearizingTransformation):
        lam = T.lam
    elif isinstance(T, Diffeo):
        lam = T.forward[0]
    else:
        lam = simplify(as_expr(T))
    n = s.dim
    sig = s.sigma_field
    means, devs = [], []
    for i in range(n):
        q = lie_derivative(ad_iter(s.f, sig, i), lam)
        if is_zero(q):
            means.append(0.0)
            devs.append(0.0)
            continue
        v = _sample_values([q], s, s.sampler, n_samples)[:, 0]
        m = float(np.mean(v))
        means.append(m)
        devs.append(float(np.std(v, ddof=1) / (1 + abs(m))) if len(v) > 1 else 0.0)
    worst = int(np.argmax(devs))
    if devs[worst] > tol:
        raise LinearizationError(
            "sigma-check",
            f"L_(ad_f^{worst} sigma) lambda is not constant (relative std {devs[worst]:.3g})",
            {"index": worst, "relative_std": devs[worst], "means": means},
        )
    return means


def _require_sfb(s: StochasticSystem, drift: VectorField | None = None, n_samples: int = 64):
    rep = check_det_sfb(s, n_samples=n_samples, f=drift)
    if not rep["nonsingular"]:
        raise LinearizationError("sfb-conditions", f"control distribution is singular (min rank {rep['min_rank']})", rep)
    if not rep["involutive"]:
        raise LinearizationError("sfb-conditions", "control distribution is not involutive", rep)
    return rep


def _round_trip(lt: LinearizingTransformation, s: StochasticSystem, need: str, tol: float = CONST_TOL) -> LinearityReport:
    out = lt.apply(s)
    rep = verify_linear(out, tol)
    lt.residuals.update({f"closed_loop_{k}": v for k, v in rep.residuals.items()})
    ok = {
        "g": rep.is_g_linear and rep.g_controllable,
        "gsigma": rep.is_gsigma_linear and rep.g_controllable,
        "sigma": rep.is_sigma_linear and rep.sigma_controllable,
    }[need]
    if not ok:
        raise LinearizationError("verify", f"closed loop is not {need}-linear and controllable", rep.to_dict())
    lt.passed = True
    return rep


_REQUIREMENT = {
    "det": "g",
    "strat_g": "g",
    "ito_g": "g",
    "ito_g_commuting": "g",
    "strat_gsigma": "gsigma",
    "ito_gsigma": "gsigma",
    "sigma": "sigma",
}


def _output(s, lam, generator=None):
    if lam is not None:
        return simplify(as_expr(lam))
    return solve_lambda_n2(s, generator)[0]


def det_linearize(s: StochasticSystem, lam: Expr | None = None, n_samples: int = 64) -> LinearizingTransformation:
    """Deterministic feedback linearization of the control part (dispersion ignored)."""
    d = s.without_noise() if s.convention is not Convention.DETERMINISTIC else s
    _require_sfb(d, n_samples=n_samples)
    lt = chain_from_lambda(d, _output(d, lam), "det", n_samples=n_samples, verify=False)
    _round_trip(lt, d, "g")
    return lt


def strat_g_linearize(s: StochasticSystem, lam: Expr | None = None, n_samples: int = 64) -> LinearizingTransformation:
    """Stratonovich control-linearization: identical to the deterministic problem."""
    if s.convention is Convention.ITO:
        raise ConventionError("strat_g expects a Stratonovich system")
    lt = det_linearize(s, lam, n_samples)
    lt.variant = "strat_g"
    _round_trip(lt, s, "g")
    return lt


def strat_gsigma_linearize(s: StochasticSystem, lam: Expr | None = None, n_samples: int = 64) -> LinearizingTransformation:
    """Stratonovich linearization with constant transformed dispersion.

    Solves for the output, fixes its gauge against the dispersion conditions,
    builds the chain and checks those conditions.
    """
    if s.convention is Convention.ITO:
        raise ConventionError("strat_gsigma expects a Stratonovich system")
    _require_sfb(s, n_samples=n_samples)
    if lam is None:
        lam0 = solve_lambda_n2(s)[0]
        lam = _fit_gauge(s.f, s.sigma_field, lam0, s, n_samples)
    lt = chain_from_lambda(s, lam, "strat_gsigma", n_samples=n_samples, verify=False)
    lt.s_constants = strat_gsigma_check(s, lt, n_samples=n_samples)
    _round_trip(lt, s, "gsigma")
    return lt


def ito_gsigma_linearize(s: StochasticSystem, lam: Expr | None = None, n_samples: int = 64) -> LinearizingTransformation:
    """Ito linearization with constant dispersion, through the equivalent Stratonovich system."""
    if s.convention is not Convention.ITO:
        raise ConventionError("ito_gsigma expects an Ito system")
    X0 = np.array([s.x0])
    f0 = s.f.evaluate(X0, s.params)[0]
    c0 = correcting_term(s.sigma).evaluate(X0, s.params)[0]
    if np.any(np.abs(f0) > 1e-10) or np.any(np.abs(c0) > 1e-10):
        raise PreconditionError("Ito gsigma linearization needs f(x0) = 0 and corr(x0) = 0")
    strat = apply_correcting(s, "forward")
    try:
        lt = strat_gsigma_linearize(strat, lam, n_samples)
    except LinearizationError as exc:
        raise LinearizationError(exc.stage, f"Stratonovich stage failed: {exc}", exc.diagnostics) from exc
    lt.variant = "ito_gsigma"
    lt.passed = False
    z_strat = lt.apply(strat)
    back = correcting_term(z_strat.sigma, z_strat.chart)
    X = np.asarray(s.sampler.sample(n_samples), dtype=float)
    vals = back.evaluate(X, s.params)
    vals = vals[finite_rows(vals)]
    lt.residuals["backward_corr"] = float(np.max(np.abs(vals), initial=0.0))
    if lt.residuals["backward_corr"] > ZERO_TOL:
        raise LinearizationError("backward-corr", "the transformed dispersion has a nonzero correcting term", lt.residuals)
    _round_trip(lt, s, "gsigma")
    return lt


def commutation_residual(s: StochasticSystem, n_samples: int = 64) -> tuple[float, VectorField]:
    """Worst sampled norm of ``[ad_fbar^i g, sigma]`` for ``i < n`` with ``fbar = f + corr``."""
    sig = s.sigma_field
    fbar = s.f + correcting_term(s.sigma)
    worst = 0.0
    for i in range(s.dim):
        br = lie_bracket(ad_iter(fbar, s.g, i), sig)
        if br.is_zero():
            continue
        v = _sample_values(list(br), s, s.sampler, n_samples)
        worst = max(worst, float(np.max(np.linalg.norm(v, axis=1), initial=0.0)))
    return worst, fbar


def ito_g_commuting_linearize(s: StochasticSystem, lam: Expr | None = None, n_samples: int = 64, tol: float = ZERO_TOL) -> LinearizingTransformation:
    """Ito control-linearization when the dispersion commutes with the corrected control brackets."""
    if s.convention is not Convention.ITO:
        raise ConventionError("ito_g_commuting expects an Ito system")
    worst, fbar = commutation_residual(s, n_samples)
    if worst > tol:
        raise LinearizationError("commutation", f"dispersion does not commute with the control brackets (norm {worst:.3g})", {"worst_norm": worst})
    _require_sfb(s, fbar, n_samples)
    lt = chain_from_lambda(s, _output(s, lam), "ito_g_commuting", n_samples=n_samples, verify=False)
    lt.residuals["commutation"] = worst
    _round_trip(lt, s, "g")
    return lt


def ito_g_linearize(s: StochasticSystem, lam: Expr, n_samples: int = 64) -> LinearizingTransformation:
    """General Ito control-linearization for a given output ``lam`` (verifier, not solver)."""
    if s.convention is not Convention.ITO:
        raise ConventionError("ito_g expects an Ito system")
    if lam is None:
        raise PreconditionError("the general Ito chain needs an explicit output lambda")
    lt = chain_from_lambda(s, lam, "ito_g", n_samples=n_samples, verify=False)
    _round_trip(lt, s, "g")
    return lt


def ito_g_conditions_given_lambda(s: StochasticSystem, lam: Expr, tol: float = ZERO_TOL, n_samples: int = 64) -> dict:
    """Second-order operator conditions on ``lam`` for Ito control-linearization.

    Checks ``O(g,0) O^i(f,F) lam = 0`` for ``i <= n-2`` and nonvanishing for
    ``i = n-1`` with ``F_ij = sigma_i sigma_j / 2``. When all pass, the report
    carries ``T_i = O^{i-1}(f,F) lam`` and the feedback
    ``alpha = -O^n(f,F) lam / L_g T_n``, ``beta = 1 / L_g T_n``.
    """
    if s.convention is not Convention.ITO:
        raise ConventionError("these conditions are stated for Ito systems")
    n = s.dim
    F = diffusion_matrix(s.sigma_field)
    zero_F = MatrixField([[ZERO] * n for _ in range(n)])
    Ts = [simplify(as_expr(lam))]
    for _ in range(n - 1):
        Ts.append(second_order_apply(s.f, F, Ts[-1]))
    conds, passed = [], True
    for i, Ti in enumerate(Ts):
        c = second_order_apply(s.g, zero_F, Ti)
        if i < n - 1:
            v = _max_abs(c, s, s.sampler, n_samples)
            ok = v <= tol
        else:
            v = _min_abs(c, s, s.sampler, n_samples)
            ok = v >= DECOUPLING_FLOOR
        conds.append({"index": i, "value": v, "passed": bool(ok)})
        passed = passed and ok
    report = {"passed": bool(passed), "conditions": conds, "T": [to_string(t) for t in Ts]}
    if passed:
        LgTn = lie_derivative(s.g, Ts[-1])
        report["alpha"] = to_string(simplify(-second_order_apply(s.f, F, Ts[-1]) / LgTn))
        report["beta"] = to_string(simplify(ONE / LgTn))
    return report


def ito_g_conditions_first_order(s: StochasticSystem, lam: Expr, tol: float = ZERO_TOL, n_samples: int = 64) -> dict:
    """The same conditions through the auxiliary first-order unknowns ``S_i = L_sigma T_i``.

    ``T_{i+1} = L_fbar T_i + S'_i / 2`` with ``S'_i = L_sigma S_i`` and
    ``fbar = f + corr``; conditions ``L_g T_i = 0`` for ``i < n`` and
    ``L_g T_n != 0``.
    """
    if s.convention is not Convention.ITO:
        raise ConventionError("these conditions are stated for Ito systems")
    n = s.dim
    sig = s.sigma_field
    fbar = s.f + correcting_term(s.sigma)
    Ts = [simplify(as_expr(lam))]
    Ss = []
    for _ in range(n - 1):
        Si = lie_derivative(sig, Ts[-1])
        Ss.append(Si)
        Ts.append(simplify(lie_derivative(fbar, Ts[-1]) + HALF * lie_derivative(sig, Si)))
    conds, passed = [], True
    for i, Ti in enumerate(Ts):
        c = lie_derivative(s.g, Ti)
        if i < n - 1:
            v = _max_abs(c, s, s.sampler, n_samples)
            ok = v <= tol
        else:
            v = _min_abs(c, s, s.sampler, n_samples)
            ok = v >= DECOUPLING_FLOOR
        conds.append({"index": i, "value": v, "passed": bool(ok)})
        passed = passed and ok
    return {"passed": bool(passed), "conditions": conds, "T": [to_string(t) for t in Ts], "S": [to_string(x) for x in Ss]}


# --------------------------------------------------------------------------
# dispersion linearization


class SigmaCheck:
    """Outcome of the dispersion-linearization conditions; truthy when they hold."""

    def __init__(self, passed: bool, residuals: dict):
        self.passed = bool(passed)
        self.residuals = dict(residuals)

    def __bool__(self):
        return self.passed

    def __repr__(self):
        return f"SigmaCheck(passed={self.passed}, residuals={self.residuals})"


def sigma_linearize_check(
    s: StochasticSystem,
    alpha: Expr = ZERO,
    sampler=None,
    tol: float = ZERO_TOL,
    n_samples: int = 64,
) -> SigmaCheck:
    """Odd bracket conditions ``[sigma, ad^l_{f + g alpha} sigma] = 0`` for ``l = 1, 3, ..., 2n-1`` plus rank ``n`` of ``{ad^j sigma, j < n}``."""
    sampler = sampler or s.sampler
    n = s.dim
    sig = s.sigma_field
    drift = s.f + s.g.scale(simplify(as_expr(alpha)))
    if s.convention is Convention.ITO:
        drift = drift + correcting_term(s.sigma)
    residuals = {}
    ok = True
    X = np.asarray(sampler.sample(n_samples), dtype=float)
    for l in range(1, 2 * n, 2):
        br = lie_bracket(sig, ad_iter(drift, sig, l))
        if br.is_zero():
            residuals[f"bracket_{l}"] = 0.0
            continue
        v = br.evaluate(X, s.params)
        v = v[finite_rows(v)]
        r = float(np.max(np.linalg.norm(v, axis=1), initial=0.0))
        residuals[f"bracket_{l}"] = r
        ok = ok and r <= tol
    ranks = ranks_on_samples(Distribution(ad_list(drift, sig, n)), X, s.params)
    valid = ranks[ranks >= 0]
    min_rank = int(valid.min()) if valid.size else 0
    residuals["min_rank"] = min_rank
    ok = ok and min_rank == n
    return SigmaCheck(ok, residuals)


def sigma_linearize(s: StochasticSystem, alpha: Expr = ZERO, lam: Expr | None = None, n_samples: int = 64) -> LinearizingTransformation:
    """Dispersion linearization for a given feedback ``alpha`` (``beta = 1``)."""
    alpha = simplify(as_expr(alpha))
    chk = sigma_linearize_check(s, alpha, n_samples=n_samples)
    if not chk:
        raise LinearizationError("sigma-conditions", "odd bracket or rank condition fails", chk.residuals)
    drift, _ = _chain_step("sigma", s, alpha)
    sig = s.sigma_field
    if lam is None:
        lam0 = solve_lambda_n2(s, sig)[0]
        lam = _fit_gauge(drift, sig, lam0, s, n_samples)
    lt = chain_from_lambda(s, lam, "sigma", alpha=alpha, n_samples=n_samples, verify=False)
    lt.residuals.update({k: float(v) for k, v in chk.residuals.items()})
    _round_trip(lt, s, "sigma")
    return lt


def linearize(
    s: StochasticSystem,
    variant: str,
    lam: Expr | None = None,
    alpha: Expr | None = None,
    n_samples: int = 64,
) -> LinearizingTransformation:
    """Dispatch to the pipeline of ``variant`` (see module docstring)."""
    v = normalize_variant(variant)
    if v == "det":
        return det_linearize(s, lam, n_samples)
    if v == "strat_g":
        return strat_g_linearize(s, lam, n_samples)
    if v == "strat_gsigma":
        return strat_gsigma_linearize(s, lam, n_samples)
    if v == "ito_gsigma":
        return ito_gsigma_linearize(s, lam, n_samples)
    if v == "ito_g_commuting":
        return ito_g_commuting_linearize(s, lam, n_samples)
    if v == "ito_g":
        return ito_g_linearize(s, lam, n_samples)
    return sigma_linearize(s, alpha if alpha is not None else ZERO, lam, n_samples)
