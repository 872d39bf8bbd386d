"""Numeric evaluation of expressions: scalar with domain checks, and vectorised batches."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, DomainError, EvaluationError, UnboundParameterError
from .expr import Add, Const, Div, Expr, Func, Mul, Neg, Param, Pow, Var, as_expr, parameters, variables

DIV_EPS = 1e-300


@dataclass(frozen=True)
class Point:
    """A state ``coords`` together with parameter bindings."""

    coords: tuple
    params: Mapping[str, float] = field(default_factory=dict)

    def __init__(self, coords: Sequence[float], params: Mapping[str, float] | None = None):
        object.__setattr__(self, "coords", tuple(float(c) for c in coords))
        object.__setattr__(self, "params", dict(params or {}))

    @property
    def dim(self) -> int:
        return len(self.coords)


def _check_bound(e: Expr, dim: int, params: Mapping):
    missing = sorted(parameters(e) - set(params))
    if missing:
        raise UnboundParameterError(f"unbound parameter(s): {', '.join(missing)}")
    vs = variables(e)
    if vs and max(vs) > dim:
        raise DimensionError(f"expression uses x{max(vs)} but the point has dimension {dim}")


def _checked(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise DomainError(f"{what} produced a non-finite value")
    return v


def _safe_pow(b: float, p) -> float:
    if b == 0 and p < 0:
        raise DomainError("zero raised to a negative power")
    if b < 0 and not float(p).is_integer():
        raise DomainError("negative base with fractional exponent")
    if isinstance(p, Fraction) and p.denominator == 1:
        try:
            return _checked(b ** int(p), "power")
        except OverflowError as exc:
            raise DomainError("power overflow") from exc
    try:
        return _checked(b ** float(p), "power")
    except OverflowError as exc:
        raise DomainError("power overflow") from exc


def _func(name: str, a: float) -> float:
    try:
        if name == "sin":
            return math.sin(a)
        if name == "cos":
            return math.cos(a)
        if name == "tan":
            c = math.cos(a)
            if abs(c) < DIV_EPS:
                raise DomainError("tan at a pole")
            return math.tan(a)
        if name == "sec":
            c = math.cos(a)
            if abs(c) < DIV_EPS:
                raise DomainError("sec at a pole")
            return _checked(1.0 / c, "sec")
        if name == "ln":
            if a <= 0:
                raise DomainError(f"ln of nonpositive value {a!r}")
            return math.log(a)
        if name == "exp":
            return _checked(math.exp(a), "exp")
        if name == "sqrt":
            if a < 0:
                raise DomainError(f"sqrt of negative value {a!r}")
            return math.sqrt(a)
        if name == "atan":
            return math.atan(a)
        if name == "sinh":
            return _checked(math.sinh(a), "sinh")
        if name == "cosh":
            return _checked(math.cosh(a), "cosh")
        if name == "tanh":
            return math.tanh(a)
    except OverflowError as exc:
        raise DomainError(f"{name} overflow") from exc
    raise EvaluationError(f"unknown function {name}")


def evaluate(e: Expr, p: Point | Sequence[float], params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` at a point.

    Parameters
    ----------
    e : Expr
    p : Point or sequence of floats
        When a bare sequence is given, ``params`` supplies the bindings.

    Raises
    ------
    DomainError
        ln/sqrt of an invalid argument, a denominator below 1e-300 in magnitude,
        or any non-finite intermediate.
    UnboundParameterError
        A parameter has no binding.
    """
    e = as_expr(e)
    if not isinstance(p, Point):
        p = Point(p, params)
    elif params:
        p = Point(p.coords, {**p.params, **params})
    _check_bound(e, p.dim, p.params)
    xs, ps = p.coords, p.params
    memo: dict = {}

    def go(n):
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Const):
            v = float(n.value)
        elif isinstance(n, Var):
            v = xs[n.index - 1]
        elif isinstance(n, Param):
            v = float(ps[n.name])
        elif isinstance(n, Neg):
            v = -go(n.arg)
        elif isinstance(n, Add):
            v = math.fsum(go(a) for a in n.args) if len(n.args) > 2 else sum(go(a) for a in n.args)
        elif isinstance(n, Mul):
            v = 1.0
            for a in n.args:
                v *= go(a)
        elif isinstance(n, Div):
            num, den = go(n.num), go(n.den)
            if abs(den) < DIV_EPS:
                raise DomainError("division by zero")
            v = num / den
        elif isinstance(n, Pow):
            v = _safe_pow(go(n.base), n.exp)
        elif isinstance(n, Func):
            v = _func(n.name, go(n.arg))
        else:
            raise EvaluationError(f"unknown node {n!r}")
        v = _checked(v, type(n).__name__)
        memo[n] = v
        return v

    return go(e)


# --------------------------------------------------------------------------
# vectorised evaluation


_NP_FUNC = {
    "sin": "np.sin({})",
    "cos": "np.cos({})",
    "tan": "np.tan({})",
    "sec": "_div(1.0, np.cos({}))",
    "ln": "_log({})",
    "exp": "np.exp({})",
    "sqrt": "_sqrt({})",
    "atan": "np.arctan({})",
    "sinh": "np.sinh({})",
    "cosh": "np.cosh({})",
    "tanh": "np.tanh({})",
}


def _div(a, b):
    b = np.asarray(b, dtype=float)
    bad = np.abs(b) < DIV_EPS
    out = np.divide(a, np.where(bad, 1.0, b))
    return np.where(bad, np.nan, out)


def _log(a):
    a = np.asarray(a, dtype=float)
    return np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), np.nan)


def _sqrt(a):
    a = np.asarray(a, dtype=float)
    return np.where(a >= 0, np.sqrt(np.abs(a)), np.nan)


def _pow(b, p, integer):
    b = np.asarray(b, dtype=float)
    if integer:
        if p >= 0:
            return np.power(b, p)
        return _div(1.0, np.power(b, -p))
    ok = b > 0 if p < 0 else b >= 0
    return np.where(ok, np.power(np.where(ok, b, 1.0), p), np.nan)


_GLOBALS = {"np": np, "_div": _div, "_log": _log, "_sqrt": _sqrt, "_pow": _pow}


def compile_exprs(exprs: Sequence[Expr], dim: int):
    """Compile expressions into ``fn(X, params) -> (N, len(exprs))`` with shared subexpressions.

    ``X`` has shape ``(N, dim)``. Domain failures show up as NaN entries.
    """
    exprs = [as_expr(e) for e in exprs]
    for e in exprs:
        vs = variables(e)
        if vs and max(vs) > dim:
            raise DimensionError(f"expression uses x{max(vs)} beyond dimension {dim}")
    names: dict = {}
    lines = []
    needed_params = set()

    def name_of(n) -> str:
        hit = names.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Const):
            code = repr(float(n.value))
            names[n] = code
            return code
        if isinstance(n, Var):
            code = f"X[:, {n.index - 1}]"
            names[n] = code
            return code
        if isinstance(n, Param):
            needed_params.add(n.name)
            code = f"float(P[{n.name!r}])"
        elif isinstance(n, Neg):
            code = f"-({name_of(n.arg)})"
        elif isinstance(n, Add):
            code = " + ".join(f"({name_of(a)})" for a in n.args)
        elif isinstance(n, Mul):
            code = " * ".join(f"({name_of(a)})" for a in n.args)
        elif isinstance(n, Div):
            code = f"_div({name_of(n.num)}, {name_of(n.den)})"
        elif isinstance(n, Pow):
            p = n.exp
            integer = isinstance(p, Fraction) and p.denominator == 1
            pv = int(p) if integer else float(p)
            code = f"_pow({name_of(n.base)}, {pv!r}, {integer})"
        elif isinstance(n, Func):
            code = _NP_FUNC[n.name].format(name_of(n.arg))
        else:
            raise EvaluationError(f"unknown node {n!r}")
        var = f"t{len(lines)}"
        lines.append(f"    {var} = {code}")
        names[n] = var
        return var

    outs = [name_of(e) for e in exprs]
    body = "\n".join(lines)
    ret = ", ".join(f"np.broadcast_to(np.asarray({o}, dtype=float), (N,))" for o in outs)
    src = (
        "def _fn(X, P):\n"
        "    N = X.shape[0]\n"
        f"{body}\n"
        f"    return np.stack([{ret}], axis=1) if {len(outs)} else np.zeros((N, 0))\n"
    )
    namespace = dict(_GLOBALS)
    exec(compile(src, "<stoflin-compiled>", "exec"), namespace)
    raw = namespace["_fn"]
    required = frozenset(needed_params)

    def fn(X, params: Mapping[str, float] | None = None) -> np.ndarray:
        params = params or {}
        missing = sorted(required - set(params))
        if missing:
            raise UnboundParameterError(f"unbound parameter(s): {', '.join(missing)}")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != dim:
            raise DimensionError(f"expected points with {dim} coordinates, got {X.shape[1]}")
        with np.errstate(all="ignore"):
            out = raw(X, params)
        out = np.array(out, dtype=float)
        out[~np.isfinite(out)] = np.nan
        return out

    fn.source = src
    return fn


def evaluate_batch(e: Expr | Sequence[Expr], X, params: Mapping[str, float] | None = None, dim: int | None = None):
    """Evaluate one expression (-> shape (N,)) or a list (-> shape (N, k)) at rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = dim or X.shape[1]
    if isinstance(e, Expr):
        return compile_exprs([e], d)(X, params)[:, 0]
    return compile_exprs(list(e), d)(X, params)
