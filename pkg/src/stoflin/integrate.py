"""Table-driven antiderivatives with respect to one state variable.

Covers what the planar integrating-factor solver needs: polynomials, ``1/x``,
``sec`` (in half-angle logarithmic form), ``sec^2``, ``sec*tan``, the basic trig,
hyperbolic and exponential functions, and low-order trig monomials. Inner
arguments may be affine in the integration variable. Other variables are
treated as constants. Anything outside the table raises
:class:`~stoflin.errors.IntegrationError`.
"""
from __future__ import annotations

from fractions import Fraction

from .errors import IntegrationError
from .expr import (
    ONE,
    Add,
    Const,
    Expr,
    Func,
    Mul,
    Pow,
    Var,
    cos,
    differentiate,
    expand,
    ln,
    register_derivative,
    simplify,
    sin,
    tan,
    variables,
)


def sec_antiderivative(u: Expr) -> Expr:
    """``ln(cos(u/2) + sin(u/2)) - ln(cos(u/2) - sin(u/2))``, an antiderivative of ``sec(u)``."""
    h = simplify(u / 2)
    return simplify(Add((ln(cos(h) + sin(h)), -ln(cos(h) - sin(h)))))


def _slope(u: Expr, i: int):
    """``du/dx_i`` when it is free of ``x_i`` and nonzero, else None."""
    d = differentiate(u, i)
    if i in variables(d):
        return None
    if isinstance(d, Const) and d.value == 0:
        return None
    return d


def _factors(term: Expr):
    items = term.args if isinstance(term, Mul) else (term,)
    out = []
    for it in items:
        if isinstance(it, Pow):
            out.append((it.base, it.exp))
        else:
            out.append((it, Fraction(1)))
    return out


def _integrate_monomial(dep: list, i: int) -> Expr:
    """Antiderivative of a product of ``(base, exponent)`` factors that all depend on ``x_i``."""
    if not dep:
        return Var(i)
    if len(dep) == 1:
        base, p = dep[0]
        if isinstance(base, Func):
            return _integrate_func_power(base, p, i)
        k = _slope(base, i)
        if k is None:
            raise IntegrationError(f"no table entry for {base}^{p}")
        if p == -1:
            return simplify(ln(base) / k)
        return simplify(Pow(base, p + 1) / (k * (p + 1)))
    if len(dep) == 2:
        (b1, p1), (b2, p2) = dep
        if isinstance(b1, Func) and isinstance(b2, Func) and b1.arg == b2.arg:
            u = b1.arg
            k = _slope(u, i)
            if k is None:
                raise IntegrationError(f"inner argument {u} is not affine in x{i}")
            names = {b1.name: p1, b2.name: p2}
            if names.get("sec") == 1 and names.get("tan") == 1:
                return simplify(Func("sec", u) / k)
            if names.get("cos") == 1 and "sin" in names and names["sin"] != -1:
                n = names["sin"]
                return simplify(Pow(sin(u), n + 1) / (k * (n + 1)))
            if names.get("sin") == 1 and "cos" in names and names["cos"] != -1:
                n = names["cos"]
                return simplify(-Pow(cos(u), n + 1) / (k * (n + 1)))
            if names.get("sin") == 1 and names.get("cos") == -1:
                return simplify(-ln(cos(u)) / k)
    raise IntegrationError("no table entry for product " + " * ".join(f"{b}^{p}" for b, p in dep))


def _integrate_func_power(f: Func, p, i: int) -> Expr:
    u = f.arg
    k = _slope(u, i)
    if k is None:
        raise IntegrationError(f"inner argument {u} is not affine in x{i}")
    name = f.name
    if p == 1:
        table = {
            "sin": lambda: -cos(u),
            "cos": lambda: sin(u),
            "tan": lambda: -ln(cos(u)),
            "sec": lambda: sec_antiderivative(u),
            "exp": lambda: Func("exp", u),
            "sinh": lambda: Func("cosh", u),
            "cosh": lambda: Func("sinh", u),
            "tanh": lambda: ln(Func("cosh", u)),
        }
        if name in table:
            return simplify(table[name]() / k)
    if name == "sec" and p == 2:
        return simplify(tan(u) / k)
    if name == "sin" and p == 2:
        return simplify((u / 2 - sin(2 * u) / 4) / k)
    if name == "cos" and p == 2:
        return simplify((u / 2 + sin(2 * u) / 4) / k)
    if name == "exp":
        return simplify(Func("exp", simplify(p * u)) / (k * p))
    raise IntegrationError(f"no table entry for {f}^{p}")


def integrate(e: Expr, i: int) -> Expr:
    """An antiderivative of ``e`` with respect to ``x_i`` (integration constant 0).

    Raises
    ------
    IntegrationError
        The integrand is outside the table.
    """
    e = simplify(e)
    if i not in variables(e):
        return simplify(e * Var(i))
    terms = e.args if isinstance(e, Add) else (e,)
    if any(not _is_table_term(t, i) for t in terms):
        e2 = expand(e)
        terms = e2.args if isinstance(e2, Add) else (e2,)
    parts = []
    for t in terms:
        const, dep = [], []
        for base, p in _factors(t):
            if i in variables(base):
                dep.append((base, p))
            else:
                const.append(Pow(base, p) if p != 1 else base)
        c = simplify(Mul(const)) if const else ONE
        parts.append(Mul((c, _integrate_monomial(dep, i))))
    out = simplify(Add(parts))
    register_derivative(out, i, e)
    return out


def _is_table_term(t: Expr, i: int) -> bool:
    dep = [(b, p) for b, p in _factors(t) if i in variables(b)]
    try:
        _integrate_monomial(dep, i)
    except IntegrationError:
        return False
    return True
