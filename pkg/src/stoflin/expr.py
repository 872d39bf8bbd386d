"""Immutable symbolic expressions over state variables ``x1..xn`` and named parameters.

Nodes are hashable and compare structurally. Arithmetic operators build raw
(unsimplified) trees; :func:`simplify` rewrites a tree into canonical form:
flattened and sorted sums/products, exact rational constant folding, like-term
collection, power merging, ``sec = 1/cos`` bookkeeping, the Pythagorean and
double-angle rules and ``ln``/``exp`` cancellation.

Simplified nodes and derivatives are memoised on the node itself, so repeated
calls on shared subtrees are cheap.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping

FUNCTIONS = ("sin", "cos", "tan", "sec", "ln", "exp", "sqrt", "atan", "sinh", "cosh", "tanh")
_ODD = frozenset({"sin", "tan", "atan", "sinh", "tanh"})
_EVEN = frozenset({"cos", "sec", "cosh"})

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _num(value):
    """Normalise a Python number: ints and Fractions stay exact, floats stay floats."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        return value
    raise TypeError(f"not a number: {value!r}")


def _is_int(p):
    return isinstance(p, Fraction) and p.denominator == 1


def as_expr(value) -> "Expr":
    if isinstance(value, Expr):
        return value
    return Const(value)


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_hash", "_str", "_key", "_simp", "_vars", "_params", "_dcache", "_size", "_fn")
    precedence = _PREC_ATOM

    def _init(self, h):
        self._hash = h
        self._str = None
        self._key = None
        self._simp = None
        self._vars = None
        self._params = None
        self._dcache = None
        self._size = None
        self._fn = None

    def _fields(self):
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def __ne__(self, other):
        return not self == other

    # raw constructors; call simplify() for canonical form
    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Neg(as_expr(other))))

    def __rsub__(self, other):
        return Add((as_expr(other), Neg(self)))

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, exponent):
        return Pow(self, exponent)

    def __str__(self):
        if self._str is None:
            self._str = to_string(self)
        return self._str

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = _num(value)
        self._init(hash(("C", isinstance(self.value, float), self.value)))

    def _fields(self):
        return (isinstance(self.value, float), self.value)

    @property
    def is_exact(self):
        return isinstance(self.value, Fraction)


class Var(Expr):
    """State variable ``x<index>`` (1-based)."""

    __slots__ = ("index",)

    def __init__(self, index: int):
        if not isinstance(index, int) or index < 1:
            raise ValueError(f"variable index must be a positive int, got {index!r}")
        self.index = index
        self._init(hash(("V", index)))

    def _fields(self):
        return self.index


class Param(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(hash(("P", name)))

    def _fields(self):
        return self.name


class Neg(Expr):
    __slots__ = ("arg",)
    precedence = _PREC_NEG

    def __init__(self, arg):
        self.arg = as_expr(arg)
        self._init(hash(("N", self.arg._hash)))

    def _fields(self):
        return self.arg

    def children(self):
        return (self.arg,)


class Add(Expr):
    __slots__ = ("args",)
    precedence = _PREC_ADD

    def __init__(self, args: Iterable):
        self.args = tuple(as_expr(a) for a in args)
        if not self.args:
            raise ValueError("empty sum")
        self._init(hash(("+",) + tuple(a._hash for a in self.args)))

    def _fields(self):
        return self.args

    def children(self):
        return self.args


class Mul(Expr):
    __slots__ = ("args",)
    precedence = _PREC_MUL

    def __init__(self, args: Iterable):
        self.args = tuple(as_expr(a) for a in args)
        if not self.args:
            raise ValueError("empty product")
        self._init(hash(("*",) + tuple(a._hash for a in self.args)))

    def _fields(self):
        return self.args

    def children(self):
        return self.args


class Div(Expr):
    __slots__ = ("num", "den")
    precedence = _PREC_MUL

    def __init__(self, num, den):
        self.num = as_expr(num)
        self.den = as_expr(den)
        self._init(hash(("/", self.num._hash, self.den._hash)))

    def _fields(self):
        return (self.num, self.den)

    def children(self):
        return (self.num, self.den)


class Pow(Expr):
    """``base ^ exponent`` with a numeric (rational or float) exponent."""

    __slots__ = ("base", "exp")
    precedence = _PREC_POW

    def __init__(self, base, exponent):
        self.base = as_expr(base)
        self.exp = _num(exponent)
        self._init(hash(("^", self.base._hash, isinstance(self.exp, float), self.exp)))

    def _fields(self):
        return (self.base, isinstance(self.exp, float), self.exp)

    def children(self):
        return (self.base,)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = as_expr(arg)
        self._init(hash(("F", name, self.arg._hash)))

    def _fields(self):
        return (self.name, self.arg)

    def children(self):
        return (self.arg,)


ZERO = Const(0)
ONE = Const(1)


def _fn(name):
    def build(arg):
        return Func(name, as_expr(arg))

    build.__name__ = name
    return build


sin, cos, tan, sec, ln, exp, sqrt = (_fn(n) for n in ("sin", "cos", "tan", "sec", "ln", "exp", "sqrt"))
atan, sinh, cosh, tanh = (_fn(n) for n in ("atan", "sinh", "cosh", "tanh"))


def x(i: int) -> Var:
    return Var(i)


# --------------------------------------------------------------------------
# structural queries


def variables(e: Expr) -> frozenset:
    """Indices of the state variables occurring in ``e``."""
    if e._vars is None:
        if isinstance(e, Var):
            e._vars = frozenset((e.index,))
        else:
            acc = frozenset()
            for c in e.children():
                acc = acc | variables(c)
            e._vars = acc
    return e._vars


def parameters(e: Expr) -> frozenset:
    if e._params is None:
        if isinstance(e, Param):
            e._params = frozenset((e.name,))
        else:
            acc = frozenset()
            for c in e.children():
                acc = acc | parameters(c)
            e._params = acc
    return e._params


def size(e: Expr) -> int:
    """Number of nodes of the tree (shared subtrees counted every time)."""
    if e._size is None:
        e._size = 1 + sum(size(c) for c in e.children())
    return e._size


def is_zero(e: Expr) -> bool:
    s = simplify(e)
    return isinstance(s, Const) and s.value == 0


def is_constant(e: Expr) -> bool:
    """True when ``e`` contains no state variable (parameters allowed)."""
    return not variables(e)


def _sort_key(e: Expr):
    if e._key is None:
        rank = 0 if isinstance(e, Const) else 1
        e._key = (rank, to_string(e, exact=True))
    return e._key


# --------------------------------------------------------------------------
# number helpers (exact until a float shows up)


def _nadd(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return float(a) + float(b)
    return a + b


def _nmul(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return float(a) * float(b)
    return a * b


def _npow(a, p):
    """Exact or float power, or None when it cannot be folded."""
    if a == 0 and p < 0:
        return None
    if isinstance(a, Fraction) and _is_int(p):
        return a ** int(p)
    if isinstance(a, Fraction) and isinstance(p, Fraction):
        if a < 0:
            return None
        root = _exact_root(a, p.denominator)
        if root is None:
            return None
        return root ** p.numerator
    if float(a) < 0 and not float(p).is_integer():
        return None
    try:
        v = float(a) ** float(p)
    except (OverflowError, ZeroDivisionError):
        return None
    if isinstance(v, complex) or not math.isfinite(v):
        return None
    return v


def _exact_root(a: Fraction, q: int):
    def iroot(n):
        r = round(n ** (1.0 / q))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** q == n:
                return c
        return None

    num, den = iroot(a.numerator), iroot(a.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


# --------------------------------------------------------------------------
# simplification


def simplify(e: Expr, budget: float = 8.0) -> Expr:
    """Canonical form of ``e``.

    The result is never larger than ``budget`` times the input (otherwise the
    input is returned unchanged).
    """
    e = as_expr(e)
    if e._simp is not None:
        return e._simp
    r = _simp(e)
    for _ in range(3):
        r2 = _simp_top(r)
        if r2 == r:
            break
        r = r2
    r._simp = r
    if size(r) > budget * size(e):
        e._simp = e
        return e
    e._simp = r
    return r


def _simp_top(e):
    # one more canonicalisation round on an already-canonical-children node
    e._simp = None
    return _simp(e)


def _simp(e: Expr) -> Expr:
    if isinstance(e, (Const, Var, Param)):
        return e
    if isinstance(e, Neg):
        return _make_mul([Const(-1), simplify(e.arg)])
    if isinstance(e, Add):
        return _make_add([simplify(a) for a in e.args])
    if isinstance(e, Mul):
        return _make_mul([simplify(a) for a in e.args])
    if isinstance(e, Div):
        return _make_mul([simplify(e.num), _PowRaw(simplify(e.den), Fraction(-1))])
    if isinstance(e, Pow):
        return _make_mul([_PowRaw(simplify(e.base), e.exp)])
    if isinstance(e, Func):
        return _simp_func(e.name, simplify(e.arg))
    raise TypeError(f"unknown node {e!r}")


class _PowRaw:
    """Transient marker for ``base ^ exp`` fed into the product canonicaliser."""

    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        self.base = base
        self.exp = exp


def _split_coeff(e: Expr):
    """``c * rest`` decomposition of a canonical term."""
    if isinstance(e, Const):
        return e.value, ONE
    if isinstance(e, Mul) and isinstance(e.args[0], Const):
        rest = e.args[1:]
        return e.args[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), e


def _factors(e: Expr):
    """Canonical factors of a coefficient-free monomial as (base, exponent) pairs."""
    if e == ONE:
        return []
    items = e.args if isinstance(e, Mul) else (e,)
    out = []
    for it in items:
        if isinstance(it, Pow):
            out.append((it.base, it.exp))
        elif isinstance(it, Func) and it.name == "sec":
            out.append((Func("cos", it.arg), Fraction(-1)))
        else:
            out.append((it, Fraction(1)))
    return out


def _make_mul(items) -> Expr:
    coeff = Fraction(1)
    powers: dict = {}

    def acc(item, mult):
        nonlocal coeff
        if isinstance(item, _PowRaw):
            acc(item.base, _nmul(item.exp, mult))
            return
        if isinstance(item, Const):
            folded = _npow(item.value, mult)
            if folded is not None:
                coeff = _nmul(coeff, folded)
            else:
                powers[item] = _nadd(powers.get(item, 0), mult)
            return
        if isinstance(item, Mul) and _is_int(mult):
            for a in item.args:
                acc(a, mult)
            return
        if isinstance(item, Pow) and _is_int(mult):
            acc(item.base, _nmul(item.exp, mult))
            return
        if isinstance(item, Func) and item.name == "sec":
            key = Func("cos", item.arg)
            powers[key] = _nadd(powers.get(key, 0), -mult)
            return
        powers[item] = _nadd(powers.get(item, 0), mult)

    for it in items:
        acc(it, Fraction(1))

    if coeff == 0:
        return Const(coeff) if isinstance(coeff, float) and False else ZERO

    # canonical bases: simplify any base that was produced here (cos(u) keys etc.)
    factors = {}
    for base, p in powers.items():
        if p == 0:
            continue
        factors[base] = p

    # double angle: sin(u) * cos(u) -> sin(2u) / 2
    for base in list(factors):
        if isinstance(base, Func) and base.name == "sin" and factors.get(base) == 1:
            partner = Func("cos", base.arg)
            if factors.get(partner) == 1:
                del factors[base]
                del factors[partner]
                doubled = _simp_func("sin", _make_mul([Const(2), base.arg]))
                coeff = _nmul(coeff, Fraction(1, 2))
                c2, rest = _split_coeff(doubled)
                coeff = _nmul(coeff, c2)
                for b2, p2 in _factors(rest):
                    factors[b2] = _nadd(factors.get(b2, 0), p2)
                    if factors[b2] == 0:
                        del factors[b2]

    out = []
    for base, p in factors.items():
        if isinstance(base, Func) and base.name == "cos" and p < 0:
            s = Func("sec", base.arg)
            out.append(s if p == -1 else Pow(s, -p))
        elif p == 1:
            out.append(base)
        else:
            out.append(Pow(base, p))
    out.sort(key=_sort_key)
    for o in out:
        o._simp = o
    if not out:
        return Const(coeff)
    if coeff == 1 and not isinstance(coeff, float):
        return out[0] if len(out) == 1 else Mul(out)
    if len(out) == 1 and isinstance(out[0], Add):
        # numeric factors distribute over a lone sum
        return _make_add([_make_mul([Const(coeff), a]) for a in out[0].args])
    return Mul([Const(coeff)] + out)


def _make_add(items) -> Expr:
    terms: dict = {}

    def acc(item):
        if isinstance(item, Add):
            for a in item.args:
                acc(a)
            return
        c, m = _split_coeff(item)
        terms[m] = _nadd(terms.get(m, 0), c)

    for it in items:
        acc(it)
    _pythagoras(terms)
    out = []
    for m, c in terms.items():
        if c == 0:
            continue
        if m == ONE:
            out.append(Const(c))
        elif c == 1 and not isinstance(c, float):
            out.append(m)
        else:
            out.append(_make_mul([Const(c), m]))
    if not out:
        return ZERO
    out.sort(key=_term_key)
    for o in out:
        o._simp = o
    if len(out) == 1:
        return out[0]
    return Add(out)


def _term_key(e: Expr):
    c, m = _split_coeff(e)
    return _sort_key(m) + (str(c),)


def _monomial(factors) -> Expr:
    return _make_mul([_PowRaw(b, p) for b, p in factors]) if factors else ONE


def _pythagoras(terms: dict):
    """sin^2 + cos^2 -> 1 and 1 - cos^2 -> sin^2 (with a common monomial factor)."""
    changed = True
    while changed:
        changed = False
        for m, c in list(terms.items()):
            if m not in terms or c == 0:
                continue
            facs = _factors(m)
            for idx, (base, p) in enumerate(facs):
                if not (isinstance(base, Func) and base.name in ("sin", "cos") and p >= 2):
                    continue
                other_name = "cos" if base.name == "sin" else "sin"
                rest = facs[:idx] + ([(base, p - 2)] if p != 2 else []) + facs[idx + 1:]
                other = _monomial(rest)
                partner = _make_mul([other, _PowRaw(Func(other_name, base.arg), Fraction(2))])
                if partner != m and terms.get(partner) == c:
                    del terms[m]
                    del terms[partner]
                    terms[other] = _nadd(terms.get(other, 0), c)
                    changed = True
                    break
                c_other = terms.get(other)
                if c_other is not None and c_other != 0 and c_other == -c:
                    del terms[m]
                    del terms[other]
                    terms[partner] = _nadd(terms.get(partner, 0), c_other)
                    changed = True
                    break
            if changed:
                break
    for m in [m for m, c in terms.items() if c == 0]:
        del terms[m]


_EXACT_AT_ZERO = {"sin": 0, "tan": 0, "atan": 0, "sinh": 0, "tanh": 0, "cos": 1, "sec": 1, "cosh": 1, "exp": 1}
_FLOAT_IMPL = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "sec": lambda v: 1.0 / math.cos(v),
    "ln": math.log, "exp": math.exp, "atan": math.atan, "sinh": math.sinh, "cosh": math.cosh,
    "tanh": math.tanh,
}


def _simp_func(name: str, a: Expr) -> Expr:
    if name == "sqrt":
        return _make_mul([_PowRaw(a, Fraction(1, 2))])
    if name == "sec":
        c = _simp_func("cos", a)
        if isinstance(c, Func):
            return _make_mul([_PowRaw(c, Fraction(-1))])
        return simplify(Pow(c, -1))
    if isinstance(a, Const):
        v = a.value
        if v == 0 and name in _EXACT_AT_ZERO:
            return Const(_EXACT_AT_ZERO[name])
        if name == "ln" and v == 1:
            return ZERO
        if isinstance(v, float):
            try:
                r = _FLOAT_IMPL[name](v)
            except (ValueError, OverflowError, ZeroDivisionError):
                r = None
            if r is not None and math.isfinite(r):
                return Const(r)
    c, _ = _split_coeff(a)
    if c < 0 and name in _ODD | _EVEN:
        pos = _make_mul([Const(-1), a])
        inner = _simp_func(name, pos)
        return inner if name in _EVEN else _make_mul([Const(-1), inner])
    if name == "ln" and isinstance(a, Func) and a.name == "exp":
        return a.arg
    if name == "exp" and isinstance(a, Func) and a.name == "ln":
        return a.arg
    if name == "tan" and isinstance(a, Func) and a.name == "atan":
        return a.arg
    if isinstance(a, Func) and a.name == "atan" and isinstance(a.arg, Func) and a.arg.name == "sinh":
        # atan(sinh w) is the Gudermannian of w
        w = a.arg.arg
        if name == "cos":
            return _make_mul([_PowRaw(Func("cosh", w), Fraction(-1))])
        if name == "sin":
            return Func("tanh", w)
    return Func(name, a)


# --------------------------------------------------------------------------
# differentiation and substitution


_KNOWN_DERIVATIVES: dict = {}
_KNOWN_LIMIT = 4096


def register_derivative(e: Expr, i: int, d: Expr) -> None:
    """Record ``d`` as the exact partial of ``e`` in ``x<i>`` (used for antiderivatives)."""
    if len(_KNOWN_DERIVATIVES) >= _KNOWN_LIMIT:
        _KNOWN_DERIVATIVES.clear()
    _KNOWN_DERIVATIVES[(simplify(e), i)] = simplify(d)


def differentiate(e: Expr, i: int, known: bool = True) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``x<i>``, simplified.

    With ``known=False`` the top-level node is differentiated by the rules even
    when a derivative was registered for it.
    """
    if not isinstance(i, int) or i < 1:
        raise ValueError(f"variable index must be >= 1, got {i!r}")
    e = simplify(e)
    if i not in variables(e):
        return ZERO
    if not known:
        return simplify(_d(e, i))
    hit = _KNOWN_DERIVATIVES.get((e, i))
    if hit is not None:
        return hit
    if e._dcache is None:
        e._dcache = {}
    d = e._dcache.get(i)
    if d is None:
        d = simplify(_d(e, i))
        e._dcache[i] = d
    return d


def _d(e: Expr, i: int) -> Expr:
    if i not in variables(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return Neg(differentiate(e.arg, i))
    if isinstance(e, Add):
        return Add([differentiate(a, i) for a in e.args])
    if isinstance(e, Mul):
        terms = []
        for j, a in enumerate(e.args):
            if i in variables(a):
                terms.append(Mul(e.args[:j] + (differentiate(a, i),) + e.args[j + 1:]))
        return Add(terms)
    if isinstance(e, Div):
        dn, dd = differentiate(e.num, i), differentiate(e.den, i)
        return Div(Add((Mul((dn, e.den)), Neg(Mul((e.num, dd))))), Pow(e.den, 2))
    if isinstance(e, Pow):
        return Mul((Const(e.exp), Pow(e.base, _nadd(e.exp, -1)), differentiate(e.base, i)))
    if isinstance(e, Func):
        u = e.arg
        du = differentiate(u, i)
        outer = {
            "sin": lambda: cos(u),
            "cos": lambda: Neg(sin(u)),
            "tan": lambda: Pow(sec(u), 2),
            "sec": lambda: Mul((sec(u), tan(u))),
            "ln": lambda: Pow(u, -1),
            "exp": lambda: exp(u),
            "sqrt": lambda: Mul((Const(Fraction(1, 2)), Pow(u, Fraction(-1, 2)))),
            "atan": lambda: Pow(Add((ONE, Pow(u, 2))), -1),
            "sinh": lambda: cosh(u),
            "cosh": lambda: sinh(u),
            "tanh": lambda: Add((ONE, Neg(Pow(tanh(u), 2)))),
        }[e.name]()
        return Mul((outer, du))
    raise TypeError(f"unknown node {e!r}")


def gradient(e: Expr, n: int) -> tuple:
    return tuple(differentiate(e, i) for i in range(1, n + 1))


def substitute(e: Expr, mapping: Mapping) -> Expr:
    """Simultaneously replace variables (int keys) and/or parameters (str keys)."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(node):
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            r = mapping.get(node.index, node)
        elif isinstance(node, Param):
            r = mapping.get(node.name, node)
        elif isinstance(node, Const):
            r = node
        elif not (variables(node) & mapping.keys() or parameters(node) & mapping.keys()):
            r = node
        elif isinstance(node, Neg):
            r = Neg(go(node.arg))
        elif isinstance(node, Add):
            r = Add([go(a) for a in node.args])
        elif isinstance(node, Mul):
            r = Mul([go(a) for a in node.args])
        elif isinstance(node, Div):
            r = Div(go(node.num), go(node.den))
        elif isinstance(node, Pow):
            r = Pow(go(node.base), node.exp)
        elif isinstance(node, Func):
            r = Func(node.name, go(node.arg))
        else:
            raise TypeError(node)
        memo[node] = r
        return r

    return simplify(go(as_expr(e)))


def split_constant_factor(e: Expr):
    """Split a simplified product into ``(state-free part, state-dependent part)``."""
    e = simplify(e)
    items = e.args if isinstance(e, Mul) else (e,)
    const = [a for a in items if not variables(a)]
    var = [a for a in items if variables(a)]
    c = simplify(Mul(const)) if const else ONE
    v = simplify(Mul(var)) if var else ONE
    return c, v


def expand(e: Expr, max_terms: int = 4096) -> Expr:
    """Distribute products over sums and integer powers of sums."""
    e = simplify(e)

    def go(node):
        if isinstance(node, Add):
            return [t for a in node.args for t in go(a)]
        if isinstance(node, Mul):
            acc = [ONE]
            for a in node.args:
                parts = go(a)
                acc = [Mul((p, q)) for p in acc for q in parts]
                if len(acc) > max_terms:
                    return [node]
            return acc
        if isinstance(node, Pow) and _is_int(node.exp) and node.exp > 1 and isinstance(node.base, Add):
            parts = go(node.base)
            acc = [ONE]
            for _ in range(int(node.exp)):
                acc = [Mul((p, q)) for p in acc for q in parts]
                if len(acc) > max_terms:
                    return [node]
            return acc
        return [node]

    return simplify(Add(go(e)))


# --------------------------------------------------------------------------
# printing


def _fmt_number(v, exact: bool) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    r = repr(float(v))
    if r.endswith(".0") and "e" not in r:
        return r
    return r


def _fmt_exponent(p) -> str:
    if isinstance(p, Fraction) and p.denominator == 1 and p >= 0:
        return str(p.numerator)
    return f"({_fmt_number(p, True)})"


def to_string(e: Expr, exact: bool = False) -> str:
    """Render ``e`` in the expression grammar.

    ``exact=True`` mirrors the tree structure so that ``parse(to_string(e, True))``
    rebuilds ``e`` node for node (for trees produced by the parser). The default
    rendering writes negative powers as divisions.
    """
    if not exact and e._str is not None:
        return e._str
    return _render(e, exact)


def _paren(s, child_prec, need):
    return f"({s})" if child_prec < need else s


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        v = e.value
        if v < 0 or (isinstance(v, Fraction) and v.denominator != 1):
            return _PREC_MUL if v >= 0 else _PREC_NEG
        return _PREC_ATOM
    return e.precedence


def _render(e: Expr, exact: bool) -> str:
    r = lambda c: to_string(c, exact)  # noqa: E731
    if isinstance(e, Const):
        return _fmt_number(e.value, exact)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Func):
        if not exact and e.name == "sqrt":
            return f"sqrt({r(e.arg)})"
        return f"{e.name}({r(e.arg)})"
    if isinstance(e, Neg):
        a = e.arg
        if isinstance(a, Const) or _prec(a) < _PREC_POW:
            return f"-({r(a)})"
        return f"-{r(a)}"
    if isinstance(e, Pow):
        b = e.base
        if not exact and e.exp == Fraction(1, 2):
            return f"sqrt({r(b)})"
        bs = r(b)
        if _prec(b) < _PREC_ATOM or isinstance(b, Const) and b.value < 0:
            bs = f"({bs})"
        return f"{bs}^{_fmt_exponent(e.exp)}"
    if isinstance(e, Add):
        parts = []
        for k, a in enumerate(e.args):
            if k == 0:
                s = r(a)
                parts.append(_paren(s, _prec(a), _PREC_ADD + 1) if isinstance(a, Add) else s)
                continue
            if exact:
                if isinstance(a, Neg):
                    inner = a.arg
                    s = r(inner)
                    if _prec(inner) <= _PREC_ADD or isinstance(inner, Const) and inner.value < 0:
                        s = f"({s})"
                    parts.append(f" - {s}")
                else:
                    s = r(a)
                    if _prec(a) <= _PREC_ADD or _prec(a) == _PREC_NEG:
                        s = f"({s})"
                    parts.append(f" + {s}")
            else:
                c, _ = _split_coeff(a) if a._simp is a else (1, a)
                if isinstance(a, Neg):
                    parts.append(f" - {_paren(r(a.arg), _prec(a.arg), _PREC_ADD + 1)}")
                elif c < 0:
                    pos = simplify(Mul((Const(-1), a)))
                    parts.append(f" - {_paren(r(pos), _prec(pos), _PREC_ADD + 1)}")
                else:
                    parts.append(f" + {_paren(r(a), _prec(a), _PREC_ADD + 1)}")
        return "".join(parts)
    if isinstance(e, Div):
        ns = r(e.num)
        if _prec(e.num) < _PREC_MUL:
            ns = f"({ns})"
        ds = r(e.den)
        if _prec(e.den) <= _PREC_MUL:
            ds = f"({ds})"
        return f"{ns}/{ds}"
    if isinstance(e, Mul):
        if not exact:
            return _render_mul_pretty(e)
        parts = []
        for k, a in enumerate(e.args):
            s = r(a)
            if isinstance(a, (Add, Mul)) or (k > 0 and isinstance(a, (Div, Neg))):
                s = f"({s})"
            elif isinstance(a, Const) and (k > 0 and a.value < 0):
                s = f"({s})"
            elif isinstance(a, Const) and isinstance(a.value, Fraction) and a.value.denominator != 1:
                s = f"({s})"
            parts.append(s)
        return "*".join(parts)
    raise TypeError(e)


def _render_mul_pretty(e: Mul) -> str:
    coeff = Fraction(1)
    num, den = [], []
    for a in e.args:
        if isinstance(a, Const):
            coeff = _nmul(coeff, a.value)
        elif isinstance(a, Pow) and a.exp < 0:
            den.append(a.base if a.exp == -1 else Pow(a.base, -a.exp))
        else:
            num.append(a)
    sign = "-" if coeff < 0 else ""
    coeff = -coeff if coeff < 0 else coeff
    num_s = []
    if isinstance(coeff, Fraction):
        if coeff.numerator != 1 or not num:
            num_s.append(str(coeff.numerator))
        if coeff.denominator != 1:
            den = [Const(coeff.denominator)] + den
    elif coeff != 1 or not num:
        num_s.append(_fmt_number(coeff, False))
    for a in num:
        s = to_string(a)
        if _prec(a) <= _PREC_MUL:
            s = f"({s})"
        num_s.append(s)
    out = sign + "*".join(num_s)
    if den:
        ds = []
        for a in den:
            s = to_string(a)
            if _prec(a) <= _PREC_MUL:
                s = f"({s})"
            ds.append(s)
        out += "/" + (ds[0] if len(ds) == 1 else "(" + "*".join(ds) + ")")
    return out
