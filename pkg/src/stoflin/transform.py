"""Coordinate and feedback transformations of stochastic systems.

Under the Stratonovich and deterministic conventions every field is pushed
forward contravariantly. Under the Ito convention the drift additionally gains
the Ito term ``P_sigma T``. The correcting term ``-1/2 (dsigma/dx) sigma`` converts
an Ito system into the Stratonovich system with the same solutions.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConventionError, DimensionError, PreconditionError
from .evaluate import compile_exprs
from .expr import ZERO, Add, Const, Expr, Mul, Var, as_expr, differentiate, simplify, substitute, variables
from .fields import MatrixField, VectorField, as_matrix
from .lie import lie_derivative
from .sampling import DomainSampler, ImageSampler
from .system import EQ_TOL, Convention, Diffeo, Feedback, StochasticSystem

HALF = Const(Fraction(1, 2))
MAX_CHART_DIM = 4


def _forward(T) -> tuple:
    if isinstance(T, Diffeo):
        return T.forward
    return tuple(simplify(as_expr(e)) for e in T)


def _subs_map(exprs) -> dict:
    return {i: e for i, e in enumerate(exprs, 1)}


def _at(e: Expr, chart: Diffeo | None) -> Expr:
    """``e`` (a function of chart coordinates) composed with the chart map."""
    if chart is None:
        return e
    return substitute(e, _subs_map(chart.forward))


# --------------------------------------------------------------------------
# symbolic inverse Jacobians for chart-mode systems


def _det(M):
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return simplify(M[0][0] * M[1][1] - M[0][1] * M[1][0])
    terms = []
    for j in range(n):
        if M[0][j] == ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        sign = 1 if j % 2 == 0 else -1
        terms.append(Mul((Const(sign), M[0][j], _det(minor))))
    return simplify(Add(terms)) if terms else ZERO


def inverse_jacobian(chart: Diffeo) -> MatrixField:
    """Symbolic ``(dC/dx)^{-1}`` by cofactors; limited to small dimensions."""
    n = chart.dim
    if n > MAX_CHART_DIM:
        raise DimensionError(f"symbolic Jacobian inverse supports n <= {MAX_CHART_DIM}")
    J = [[differentiate(c, j) for j in range(1, n + 1)] for c in chart.forward]
    det = _det(J)
    if det == ZERO:
        raise PreconditionError("chart Jacobian is identically singular")
    if n == 1:
        return MatrixField([[simplify(1 / det)]])
    inv = []
    for i in range(n):
        row = []
        for j in range(n):
            minor = [r[:i] + r[i + 1:] for k, r in enumerate(J) if k != j]
            sign = 1 if (i + j) % 2 == 0 else -1
            row.append(simplify(Const(sign) * _det(minor) / det))
        inv.append(row)
    return MatrixField(inv)


def _pull_back(v: VectorField, chart: Diffeo | None) -> VectorField:
    """Base-coordinate field whose pushforward through the chart is ``v``."""
    if chart is None:
        return v
    Ji = inverse_jacobian(chart)
    n = v.dim
    return VectorField([Add([Mul((Ji[i, j], v[j])) for j in range(n)]) for i in range(n)])


# --------------------------------------------------------------------------
# Ito term and correcting term


def _covariance(S: MatrixField):
    n, k = S.shape
    return [[simplify(Add([Mul((S[i, c], S[j, c])) for c in range(k)])) for j in range(n)] for i in range(n)]


def _ito_scalar(cov, h: Expr, chart: Diffeo | None) -> Expr:
    n = len(cov)
    terms = []
    for i in range(n):
        di = differentiate(h, i + 1)
        if di == ZERO:
            continue
        for j in range(n):
            if cov[i][j] == ZERO:
                continue
            dij = differentiate(di, j + 1)
            if dij == ZERO:
                continue
            terms.append(Mul((_at(dij, chart), cov[i][j])))
    return simplify(Mul((HALF, Add(terms)))) if terms else ZERO


def ito_scalar(sigma, h: Expr, chart: Diffeo | None = None) -> Expr:
    """Ito term of one scalar function: ``1/2 sum_ij d2h/dx_i dx_j (sigma sigma^T)_ij``."""
    S = as_matrix(sigma)
    h = as_expr(h)
    vs = variables(h)
    if vs and max(vs) > S.shape[0]:
        raise DimensionError(f"function uses x{max(vs)} but sigma has {S.shape[0]} rows")
    return _ito_scalar(_covariance(S), h, chart)


def ito_term(sigma, T, chart: Diffeo | None = None) -> VectorField:
    """``(P_sigma T)_m = 1/2 sum_ij d2T_m/dx_i dx_j (sigma sigma^T)_ij``.

    ``T`` is a Diffeo or a sequence of ``n`` scalar maps. With a ``chart``,
    ``sigma`` is given in chart coordinates as a function of the base state and
    the second derivatives of ``T`` are taken in chart coordinates.
    """
    Tf = _forward(T)
    S = as_matrix(sigma)
    if len(Tf) != S.shape[0]:
        raise DimensionError(f"map has {len(Tf)} components but sigma has {S.shape[0]} rows")
    for e in Tf:
        vs = variables(e)
        if vs and max(vs) > S.shape[0]:
            raise DimensionError(f"map uses x{max(vs)} but sigma has {S.shape[0]} rows")
    cov = _covariance(S)
    return VectorField([_ito_scalar(cov, Tm, chart) for Tm in Tf])


def correcting_term(sigma, chart: Diffeo | None = None) -> VectorField:
    """``corr_r = -1/2 sum_j sum_i dsigma_rj/dx_i sigma_ij``.

    With a ``chart`` the derivatives are taken in chart coordinates.
    """
    S = as_matrix(sigma)
    n, k = S.shape
    comps = [[] for _ in range(n)]
    for c in range(k):
        col = S.column(c)
        w = _pull_back(col, chart)
        for r in range(n):
            comps[r].append(lie_derivative(w, col[r]))
    return VectorField([simplify(Mul((Const(Fraction(-1, 2)), Add(t)))) for t in comps])


def apply_correcting(s: StochasticSystem, direction: str = "forward") -> StochasticSystem:
    """Switch between the Ito and the solution-equivalent Stratonovich system.

    ``forward`` maps Ito ``f`` to Stratonovich ``f + corr``; ``inverse`` maps
    Stratonovich ``f`` to Ito ``f - corr``.
    """
    corr = correcting_term(s.sigma, s.chart)
    if direction == "forward":
        if s.convention is not Convention.ITO:
            raise ConventionError(f"forward correction needs an Ito system, got {s.convention.value}")
        return s.replace(f=s.f + corr, convention=Convention.STRATONOVICH)
    if direction == "inverse":
        if s.convention is not Convention.STRATONOVICH:
            raise ConventionError(f"inverse correction needs a Stratonovich system, got {s.convention.value}")
        return s.replace(f=s.f - corr, convention=Convention.ITO)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


# --------------------------------------------------------------------------
# coordinate transformations


def _jacobian_rows(Tf: Sequence[Expr], n: int):
    return [[differentiate(t, j) for j in range(1, n + 1)] for t in Tf]


def _apply_jacobian(J, v: VectorField, chart: Diffeo | None) -> VectorField:
    rows = []
    for Jrow in J:
        terms = [Mul((_at(Jrow[j], chart), v[j])) for j in range(len(Jrow)) if Jrow[j] != ZERO]
        rows.append(Add(terms) if terms else ZERO)
    return VectorField(rows)


def pushforward(T: Diffeo, v: VectorField) -> VectorField:
    """``(dT/dx v) o T^{-1}``, a field in the new coordinates."""
    if T.inverse is None:
        raise PreconditionError("pushforward needs the inverse map")
    if T.dim != v.dim:
        raise DimensionError(f"map has dimension {T.dim}, field has {v.dim}")
    J = _jacobian_rows(T.forward, T.dim)
    pushed = _apply_jacobian(J, v, None)
    m = _subs_map(T.inverse)
    return VectorField([substitute(c, m) for c in pushed])


def _image_sampler(sampler, T: Diffeo, params):
    if isinstance(sampler, ImageSampler):
        inner = sampler.forward
        return ImageSampler(sampler.base, T.compose_after(inner), params)
    if isinstance(sampler, DomainSampler):
        return ImageSampler(sampler, T.forward, params)
    raise PreconditionError(f"cannot map a sampler of type {type(sampler).__name__}")


def coord_transform(
    s: StochasticSystem,
    T: Diffeo,
    preserve_equilibrium: bool = True,
    chart_mode: bool | None = None,
) -> StochasticSystem:
    """The system in coordinates ``z = T(x)``.

    Parameters
    ----------
    s : StochasticSystem
    T : Diffeo
        Written in the current coordinates of ``s``.
    preserve_equilibrium : bool
        Require ``T(x0) = 0`` (within 1e-10).
    chart_mode : bool, optional
        Keep the result as a function of the base state (see
        :class:`StochasticSystem`). Defaults to True exactly when ``T`` has no
        inverse or ``s`` is already in chart mode.

    Raises
    ------
    PreconditionError
        ``T`` does not fix the equilibrium at the origin, or dimensions disagree.
    """
    if T.dim != s.dim:
        raise DimensionError(f"map has dimension {T.dim}, system has {s.dim}")
    if chart_mode is None:
        chart_mode = s.chart is not None or T.inverse is None
    if not chart_mode and T.inverse is None:
        raise PreconditionError("expressing the system in z needs the inverse map")
    z0_old = np.array([s.z0()])
    z0 = T.apply(z0_old, s.params)[0]
    if preserve_equilibrium and (not np.all(np.isfinite(z0)) or np.any(np.abs(z0) > EQ_TOL)):
        raise PreconditionError(f"T(x0) = {z0.tolist()} is not the origin")

    chart = s.chart if chart_mode else None
    J = _jacobian_rows(T.forward, T.dim)
    f_new = _apply_jacobian(J, s.f, chart)
    if s.convention is Convention.ITO:
        f_new = f_new + ito_term(s.sigma, T, chart)
    g_new = _apply_jacobian(J, s.g, chart)
    S = as_matrix(s.sigma)
    cols = [_apply_jacobian(J, S.column(c), chart) for c in range(S.shape[1])]
    sigma_new = cols[0] if isinstance(s.sigma, VectorField) else MatrixField.from_columns(cols)

    if chart_mode:
        if s.chart is None:
            new_chart = T
        else:
            fw = T.compose_after(s.chart.forward)
            inv = None
            if T.inverse is not None and s.chart.inverse is not None:
                inv = Diffeo(s.chart.inverse).compose_after(T.inverse)
            new_chart = Diffeo(fw, inv)
        return s.replace(f=f_new, g=g_new, sigma=sigma_new, chart=new_chart)

    m = _subs_map(T.inverse)
    sub = lambda v: VectorField([substitute(c, m) for c in v])  # noqa: E731
    if isinstance(sigma_new, VectorField):
        sigma_z = sub(sigma_new)
    else:
        sigma_z = MatrixField([[substitute(e, m) for e in row] for row in sigma_new.rows])
    return StochasticSystem(
        f=sub(f_new),
        g=sub(g_new),
        sigma=sigma_z,
        convention=s.convention,
        x0=tuple(float(v) for v in z0),
        params=s.params,
        sampler=_image_sampler(s.sampler, T, s.params),
    )


def to_z_mode(s: StochasticSystem) -> StochasticSystem:
    """Re-express a chart-mode system in its chart coordinates (needs the chart inverse)."""
    if s.chart is None:
        return s
    if s.chart.inverse is None:
        raise PreconditionError("the chart has no symbolic inverse")
    m = _subs_map(s.chart.inverse)
    sub = lambda v: VectorField([substitute(c, m) for c in v])  # noqa: E731
    sig = s.sigma
    sig = sub(sig) if isinstance(sig, VectorField) else MatrixField([[substitute(e, m) for e in r] for r in sig.rows])
    return StochasticSystem(
        f=sub(s.f),
        g=sub(s.g),
        sigma=sig,
        convention=s.convention,
        x0=s.z0(),
        params=s.params,
        sampler=_image_sampler(s.sampler, s.chart, s.params),
    )


# --------------------------------------------------------------------------
# feedback and composition


def feedback_transform(
    s: StochasticSystem,
    fb: Feedback,
    check: bool = True,
    preserve_equilibrium: bool = False,
    n_samples: int = 64,
) -> StochasticSystem:
    """Closed loop under ``u = alpha + beta v``: drift ``f + g alpha``, control ``g beta``.

    Raises
    ------
    PreconditionError
        ``beta`` comes within 1e-10 of zero on the sampler, or (when
        ``preserve_equilibrium``) ``alpha(x0) != 0``.
    """
    if check and fb.beta_margin(s.sampler, s.params, n_samples) < 1e-10:
        raise PreconditionError("feedback gain beta is singular on the sampled domain")
    if preserve_equilibrium:
        a0 = compile_exprs([fb.alpha], s.base_dim)(np.array([s.x0]), s.params)[0, 0]
        if not abs(a0) <= EQ_TOL:
            raise PreconditionError(f"alpha(x0) = {a0!r} is not zero")
    return s.replace(f=s.f + s.g.scale(fb.alpha), g=s.g.scale(fb.beta))


def compose_diffeos(R: Diffeo, S: Diffeo) -> Diffeo:
    """``S o R`` with inverse ``R^{-1} o S^{-1}`` (None when either inverse is missing)."""
    if R.dim != S.dim:
        raise DimensionError(f"cannot compose maps of dimensions {R.dim} and {S.dim}")
    fw = S.compose_after(R.forward)
    inv = None
    if R.inverse is not None and S.inverse is not None:
        inv = Diffeo(R.inverse).compose_after(S.inverse)
    return Diffeo(fw, inv)


def _exact_inverse(A):
    n = len(A)
    M = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            raise PreconditionError("linear map is singular")
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        M[c] = [v / p for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                k = M[r][c]
                M[r] = [a - k * b for a, b in zip(M[r], M[c])]
    return [row[n:] for row in M]


def linear_diffeo(A) -> Diffeo:
    """``z = A x`` with its exact inverse (float entries are rationalised)."""
    A = [[Fraction(v).limit_denominator(10**12) if isinstance(v, float) else Fraction(v) for v in row] for row in A]
    n = len(A)
    Ainv = _exact_inverse(A)
    x = [Var(i) for i in range(1, n + 1)]
    fw = [Add([Mul((Const(A[i][j]), x[j])) for j in range(n)]) for i in range(n)]
    inv = [Add([Mul((Const(Ainv[i][j]), x[j])) for j in range(n)]) for i in range(n)]
    return Diffeo(fw, inv)
