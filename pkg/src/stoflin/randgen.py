"""Random expressions, fields, diffeomorphisms and systems for property testing.

Everything is driven by a ``numpy.random.Generator`` so runs are reproducible.
Generated fields are smooth on ``[-0.8, 0.8]^n`` and generated diffeomorphisms
fix the origin and carry explicit symbolic inverses.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .expr import Const, Expr, Func, Var, atan, exp, ln, simplify, sinh, sqrt, substitute, tan
from .fields import VectorField
from .sampling import DomainSampler
from .system import Convention, Diffeo, StochasticSystem
from .transform import compose_diffeos

BOX = 0.8
_SMALL = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2), Fraction(1, 3), Fraction(3, 4)]


def _const(rng) -> Const:
    c = _SMALL[rng.integers(len(_SMALL))]
    return Const(-c if rng.random() < 0.3 else c)


def random_expression(rng: np.random.Generator, dim: int, depth: int = 3, p_leaf: float = 0.3) -> Expr:
    """A smooth random expression in ``x1..x<dim>`` of tree depth at most ``depth``.

    Uses sums, products, small integer powers, ``sin``, ``cos`` and ``exp`` of
    damped arguments, so the result is finite everywhere.
    """
    if depth <= 0 or (depth < 3 and rng.random() < p_leaf):
        if rng.random() < 0.75:
            return Var(int(rng.integers(1, dim + 1)))
        return _const(rng)
    k = rng.integers(6)
    sub = lambda: random_expression(rng, dim, depth - 1, p_leaf)  # noqa: E731
    if k == 0:
        return sub() + sub()
    if k == 1:
        return sub() * sub()
    if k == 2:
        return Func("sin", sub())
    if k == 3:
        return Func("cos", sub())
    if k == 4:
        return exp(Const(Fraction(1, 2)) * sub())
    return sub() ** int(rng.integers(2, 4))


def random_field(rng, dim: int, depth: int = 3) -> VectorField:
    return VectorField([random_expression(rng, dim, depth) for _ in range(dim)])


def _elementwise(rng, n: int) -> Diffeo:
    fw, inv = [], []
    for i in range(1, n + 1):
        x = Var(i)
        k = rng.integers(5)
        if k == 0:
            a = _SMALL[rng.integers(len(_SMALL))] * (-1 if rng.random() < 0.3 else 1)
            fw.append(Const(a) * x)
            inv.append(x / Const(a))
        elif k == 1:
            fw.append(exp(x) - 1)
            inv.append(ln(x + 1))
        elif k == 2:
            fw.append(sinh(x))
            inv.append(ln(x + sqrt(x ** 2 + 1)))
        elif k == 3:
            fw.append(atan(x))
            inv.append(tan(x))
        else:
            fw.append(x)
            inv.append(x)
    return Diffeo(fw, inv)


def _shear(rng, n: int) -> Diffeo:
    """``z_i = x_i + p(x_1..x_{i-1})`` with ``p(0) = 0`` for one random ``i >= 2``."""
    if n < 2:
        return _elementwise(rng, n)
    i = int(rng.integers(2, n + 1))
    j = int(rng.integers(1, i))
    xj = Var(j)
    k = rng.integers(3)
    if k == 0:
        p = _const(rng) * xj ** 2
    elif k == 1:
        p = _const(rng) * Func("sin", xj)
    else:
        p = _const(rng) * xj * Var(int(rng.integers(1, i)))
    fw = [Var(m) for m in range(1, n + 1)]
    inv = list(fw)
    fw[i - 1] = Var(i) + p
    inv[i - 1] = Var(i) - p
    return Diffeo(fw, inv)


def _permutation(rng, n: int) -> Diffeo:
    perm = rng.permutation(n)
    fw = [Var(int(perm[m]) + 1) for m in range(n)]
    inv = [None] * n
    for m in range(n):
        inv[int(perm[m])] = Var(m + 1)
    return Diffeo(fw, inv)


def random_diffeo(rng, n: int, steps: int = 2) -> Diffeo:
    """Composition of elementwise maps, shears and permutations fixing the origin."""
    T = Diffeo.identity(n)
    for _ in range(steps):
        k = rng.integers(3)
        if k == 0:
            step = _elementwise(rng, n)
        elif k == 1:
            step = _shear(rng, n)
        else:
            step = _permutation(rng, n) if n > 1 else _elementwise(rng, n)
        T = compose_diffeos(T, step)
    return T


def random_monotone_1d(rng) -> Diffeo:
    """A strictly monotone 1D map with ``T(0) = 0`` and a symbolic inverse."""
    x = Var(1)
    k = rng.integers(5)
    a = _SMALL[rng.integers(len(_SMALL))]
    if k == 0:
        return Diffeo([Const(a) * x], [x / Const(a)])
    if k == 1:
        return Diffeo([exp(Const(a) * x) - 1], [ln(x + 1) / Const(a)])
    if k == 2:
        return Diffeo([sinh(x)], [ln(x + sqrt(x ** 2 + 1))])
    if k == 3:
        return Diffeo([atan(x)], [tan(x)])
    # monotone on |x| < 1/a; callers keep boxes within [-0.4, 0.4]
    return Diffeo([ln(1 + Const(a) * x)], [(exp(x) - 1) / Const(a)])


def random_system(
    rng,
    n: int,
    depth: int = 3,
    convention: Convention = Convention.ITO,
    box: float = BOX,
    seed: int | None = None,
) -> StochasticSystem:
    """Random system on ``[-box, box]^n`` with ``x0 = 0``."""
    f = random_field(rng, n, depth)
    g = random_field(rng, n, depth)
    sigma = VectorField.zero(n) if convention is Convention.DETERMINISTIC else random_field(rng, n, depth)
    sampler = DomainSampler([(-box, box)] * n, int(rng.integers(2**31)) if seed is None else seed)
    return StochasticSystem(f, g, sigma, convention, (0.0,) * n, {}, sampler)


def random_scalar_pair(rng, n: int, depth: int = 3):
    """A random dispersion field and a random scalar map on the same space."""
    return random_field(rng, n, depth), simplify(random_expression(rng, n, depth))


def _vanish_at_origin(e: Expr) -> Expr:
    return simplify(e - substitute(e, {1: Const(0), 2: Const(0)}))


def random_linearizable_2d(rng, convention: Convention = Convention.DETERMINISTIC) -> StochasticSystem:
    """Planar system with ``f(0) = 0`` that the planar output solver linearizes.

    Two families: control field ``[0, b(x)]`` with ``b >= 1`` and
    ``f1 = c x2 + q(x1)``; or control field ``[1, p(x1)]`` with
    ``f2 = p f1 + c x1 + k x2^2`` so the decoupling term stays away from zero on
    ``[-0.5, 0.5]^2``.
    """
    x1, x2 = Var(1), Var(2)
    c = Const([2, 3, -2, Fraction(5, 2)][rng.integers(4)])
    if rng.random() < 0.5:
        q = _vanish_at_origin(random_expression(rng, 1, 2))
        f1 = simplify(c * x2 + q)
        f2 = _vanish_at_origin(random_expression(rng, 2, 2))
        b = Const(2) + Func("sin", random_expression(rng, 2, 2))
        g = [Const(0), b]
    else:
        a = _const(rng)
        p = [a * x1, a * x1 ** 2, Func("sin", a * x1), a * Func("cos", x1)][rng.integers(4)]
        f1 = _vanish_at_origin(random_expression(rng, 2, 2))
        k = Const([Fraction(1, 2), Fraction(-1, 2), Fraction(1, 4), Fraction(0)][rng.integers(4)])
        f2 = simplify(p * f1 + c * x1 + k * x2 ** 2)
        g = [Const(1), p]
    sampler = DomainSampler([(-0.5, 0.5)] * 2, int(rng.integers(2**31)))
    return StochasticSystem(
        VectorField([f1, f2]), VectorField(g), VectorField.zero(2), convention, (0.0, 0.0), {}, sampler
    )
