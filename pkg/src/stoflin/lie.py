"""Lie derivatives, brackets, distributions and second-order operators."""
from __future__ import annotations

import threading
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import DimensionError, SingularDistributionError, TooManyDomainFailures
from .evaluate import Point, compile_exprs, evaluate
from .expr import ZERO, Add, Const, Expr, Mul, as_expr, differentiate, simplify, variables
from .fields import Distribution, MatrixField, VectorField
from .sampling import check_skips, finite_rows

HALF = Const(Fraction(1, 2))


def _check_scalar(f: VectorField, h: Expr):
    vs = variables(h)
    if vs and max(vs) > f.dim:
        raise DimensionError(f"scalar uses x{max(vs)} but the field has dimension {f.dim}")


def lie_derivative(f: VectorField, h: Expr) -> Expr:
    """``L_f h = sum_i f_i dh/dx_i``."""
    h = as_expr(h)
    _check_scalar(f, h)
    terms = [Mul((fi, differentiate(h, i))) for i, fi in enumerate(f.comps, 1) if i in variables(h)]
    return simplify(Add(terms)) if terms else ZERO


def multi_lie(f: VectorField, h: Expr, k: int) -> Expr:
    """``L_f^k h``; ``k = 0`` returns ``h``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = simplify(as_expr(h))
    _check_scalar(f, out)
    for _ in range(k):
        out = lie_derivative(f, out)
    return out


def jacobian(v: VectorField, n: int | None = None) -> MatrixField:
    """``dv_i/dx_j`` as an ``len(v) x n`` matrix field."""
    n = n or v.dim
    return MatrixField([[differentiate(c, j) for j in range(1, n + 1)] for c in v.comps])


def lie_bracket(f: VectorField, g: VectorField) -> VectorField:
    """``[f, g] = (dg/dx) f - (df/dx) g``."""
    if f.dim != g.dim:
        raise DimensionError(f"dimension mismatch: {f.dim} vs {g.dim}")
    return VectorField([lie_derivative(f, gi) - lie_derivative(g, fi) for fi, gi in zip(f.comps, g.comps)])


_AD_CACHE: dict = {}
_AD_LOCK = threading.Lock()
_AD_CACHE_LIMIT = 512


def ad_iter(f: VectorField, g: VectorField, k: int) -> VectorField:
    """``ad_f^k g`` with ``ad_f^0 g = g`` and ``ad_f^{k+1} g = [f, ad_f^k g]``.

    Intermediate brackets are cached per ``(f, g)`` pair.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if f.dim != g.dim:
        raise DimensionError(f"dimension mismatch: {f.dim} vs {g.dim}")
    key = (f, g)
    with _AD_LOCK:
        chain = _AD_CACHE.get(key)
        if chain is None:
            if len(_AD_CACHE) >= _AD_CACHE_LIMIT:
                _AD_CACHE.clear()
            chain = [g]
            _AD_CACHE[key] = chain
        chain = list(chain)
    while len(chain) <= k:
        chain.append(lie_bracket(f, chain[-1]))
    with _AD_LOCK:
        if len(_AD_CACHE.get(key, ())) < len(chain):
            _AD_CACHE[key] = chain
    return chain[k]


def ad_list(f: VectorField, g: VectorField, k: int) -> list[VectorField]:
    """``[ad_f^0 g, ..., ad_f^{k-1} g]``."""
    if k <= 0:
        return []
    ad_iter(f, g, k - 1)
    return [ad_iter(f, g, i) for i in range(k)]


# --------------------------------------------------------------------------
# distributions


def distribution_rank(d: Distribution, p: Point, tol: float = 1e-8) -> int:
    """Numeric rank of the generator matrix at ``p`` (singular values above ``tol * s_max``)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.array([[evaluate(c, p) for c in g.comps] for g in d.generators]).T
    return _rank(M, tol)


def _rank(M: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def matrix_rank(M, tol: float = 1e-8) -> int:
    return _rank(np.atleast_2d(np.asarray(M, dtype=float)), tol)


def ranks_on_samples(d: Distribution, X: np.ndarray, params=None, tol: float = 1e-8) -> np.ndarray:
    """Rank at each row of ``X``; -1 where evaluation failed."""
    vals = d.evaluate(X, params)
    out = np.full(len(X), -1, dtype=int)
    for r, M in enumerate(vals):
        if np.all(np.isfinite(M)):
            out[r] = _rank(M, tol)
    return out


def involutive(
    d: Distribution,
    sampler,
    tol: float = 1e-8,
    params: Mapping[str, float] | None = None,
    n_samples: int = 64,
) -> bool:
    """Sampled involutivity test.

    Each bracket ``[g_i, g_j]`` is projected onto the span of the generators by
    least squares at every sample point; the distribution is involutive iff every
    residual is at most ``tol * (1 + |bracket|)``.

    Raises
    ------
    SingularDistributionError
        Generators are linearly dependent at some sample point.
    """
    return involutivity_residual(d, sampler, params, n_samples, tol) <= tol


def involutivity_residual(d: Distribution, sampler, params=None, n_samples: int = 64, tol: float = 1e-8) -> float:
    """Worst relative least-squares residual of the generator brackets."""
    gens = list(d.generators)
    k = len(gens)
    brackets = [lie_bracket(gens[i], gens[j]) for i in range(k) for j in range(i + 1, k)]
    X = np.asarray(sampler.sample(n_samples), dtype=float)
    G = d.evaluate(X, params)
    if brackets:
        B = MatrixField.from_columns(brackets).evaluate(X, params)
        mask = finite_rows(G, B)
    else:
        B = None
        mask = finite_rows(G)
    try:
        check_skips(mask, "involutivity test")
    except TooManyDomainFailures:
        raise
    worst = 0.0
    for r in np.flatnonzero(mask):
        M = G[r]
        if _rank(M, tol) < k:
            raise SingularDistributionError(f"generators are dependent at sample point {X[r].tolist()}")
        if B is None:
            continue
        coef, *_ = np.linalg.lstsq(M, B[r], rcond=None)
        res = B[r] - M @ coef
        for c in range(B.shape[2]):
            rel = float(np.linalg.norm(res[:, c]) / (1.0 + np.linalg.norm(B[r][:, c])))
            worst = max(worst, rel)
    return worst


# --------------------------------------------------------------------------
# second-order operators


def diffusion_matrix(sigma: VectorField) -> MatrixField:
    """``F_ij = sigma_i sigma_j / 2``."""
    return MatrixField([[HALF * si * sj for sj in sigma.comps] for si in sigma.comps])


def second_order_apply(f: VectorField, F: MatrixField, h: Expr) -> Expr:
    """``sum_i f_i dh/dx_i + sum_ij F_ij d2h/dx_i dx_j``."""
    n = f.dim
    if F.shape != (n, n):
        raise DimensionError(f"F must be {n}x{n}, got {F.shape[0]}x{F.shape[1]}")
    h = as_expr(h)
    _check_scalar(f, h)
    terms = [lie_derivative(f, h)]
    for i in range(1, n + 1):
        hi = differentiate(h, i)
        for j in range(1, n + 1):
            Fij = F[i - 1, j - 1]
            if Fij == ZERO:
                continue
            terms.append(Mul((Fij, differentiate(hi, j))))
    return simplify(Add(terms))


def second_order_commutator_residual(F: MatrixField, G: MatrixField, h: Expr) -> Expr:
    """Third-order part of the commutator of two pure second-order operators.

    ``sum ((F_ij + F_ji) dG_kl/dx_j - (G_ij + G_ji) dF_kl/dx_j) d3h/dx_i dx_k dx_l``.
    """
    n = F.shape[0]
    if F.shape != (n, n) or G.shape != (n, n):
        raise DimensionError("F and G must be square of equal size")
    h = as_expr(h)
    vs = variables(h)
    if vs and max(vs) > n:
        raise DimensionError(f"scalar uses x{max(vs)} beyond dimension {n}")
    terms = []
    for i in range(n):
        for k in range(n):
            for l in range(n):
                d3 = differentiate(differentiate(differentiate(h, i + 1), k + 1), l + 1)
                if d3 == ZERO:
                    continue
                coef = []
                for j in range(n):
                    coef.append(Mul((F[i, j] + F[j, i], differentiate(G[k, l], j + 1))))
                    coef.append(-Mul((G[i, j] + G[j, i], differentiate(F[k, l], j + 1))))
                terms.append(Mul((Add(coef), d3)))
    return simplify(Add(terms)) if terms else ZERO


def operator_power(f: VectorField, F: MatrixField, h: Expr, k: int) -> Expr:
    """``O(f, F)^k h``."""
    out = simplify(as_expr(h))
    for _ in range(k):
        out = second_order_apply(f, F, out)
    return out


def evaluate_on(exprs, X, params=None, dim=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return compile_exprs(list(exprs), dim or X.shape[1])(X, params)
