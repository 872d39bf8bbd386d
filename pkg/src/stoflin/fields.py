"""Vector fields, matrix fields and distributions built from expressions."""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError
from .evaluate import compile_exprs
from .expr import ZERO, Const, Expr, as_expr, is_zero, simplify, to_string, variables
from .parser import parse


def _check_vars(exprs, dim):
    for e in exprs:
        vs = variables(e)
        if vs and max(vs) > dim:
            raise DimensionError(f"component {e} uses x{max(vs)} beyond dimension {dim}")


class VectorField:
    """A column of ``dim`` simplified expressions."""

    __slots__ = ("comps", "_hash", "_fn")

    def __init__(self, comps: Iterable, dim: int | None = None):
        c = tuple(simplify(as_expr(e)) for e in comps)
        if not c:
            raise DimensionError("a vector field needs at least one component")
        if dim is not None and dim != len(c):
            raise DimensionError(f"expected {dim} components, got {len(c)}")
        _check_vars(c, len(c))
        self.comps = c
        self._hash = hash(c)
        self._fn = None

    @classmethod
    def parse(cls, texts: Sequence[str], dim: int | None = None) -> "VectorField":
        d = dim or len(texts)
        return cls([parse(t, d) for t in texts], d)

    @classmethod
    def zero(cls, dim: int) -> "VectorField":
        return cls([ZERO] * dim)

    @classmethod
    def basis(cls, dim: int, k: int) -> "VectorField":
        """Unit field along ``x_k`` (1-based)."""
        return cls([Const(1) if i == k else ZERO for i in range(1, dim + 1)])

    @property
    def dim(self) -> int:
        return len(self.comps)

    def __len__(self):
        return len(self.comps)

    def __iter__(self):
        return iter(self.comps)

    def __getitem__(self, i):
        return self.comps[i]

    def __eq__(self, other):
        return isinstance(other, VectorField) and self.comps == other.comps

    def __hash__(self):
        return self._hash

    def _same_dim(self, other: "VectorField"):
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._same_dim(other)
        return VectorField([a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._same_dim(other)
        return VectorField([a - b for a, b in zip(self.comps, other.comps)])

    def __neg__(self):
        return VectorField([-a for a in self.comps])

    def scale(self, s) -> "VectorField":
        s = as_expr(s)
        return VectorField([s * a for a in self.comps])

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.comps)

    def map(self, fn) -> "VectorField":
        return VectorField([fn(c) for c in self.comps])

    def evaluate(self, X, params: Mapping[str, float] | None = None) -> np.ndarray:
        """Values at the rows of ``X``; shape ``(N, dim)``, NaN on domain failure."""
        if self._fn is None:
            self._fn = compile_exprs(self.comps, self.dim)
        return self._fn(X, params)

    def strings(self) -> list[str]:
        return [to_string(c) for c in self.comps]

    def __repr__(self):
        return "VectorField([" + ", ".join(self.strings()) + "])"


class MatrixField:
    """A rectangular array of simplified expressions."""

    __slots__ = ("rows",)

    def __init__(self, rows: Iterable[Iterable]):
        r = tuple(tuple(simplify(as_expr(e)) for e in row) for row in rows)
        if not r or not r[0]:
            raise DimensionError("a matrix field needs at least one entry")
        if any(len(row) != len(r[0]) for row in r):
            raise DimensionError("matrix field rows must have equal length")
        self.rows = r

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0])

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, MatrixField) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def column(self, j: int) -> VectorField:
        return VectorField([row[j] for row in self.rows])

    @classmethod
    def from_columns(cls, cols: Sequence[VectorField]) -> "MatrixField":
        return cls(list(zip(*[c.comps for c in cols])))

    def transpose(self) -> "MatrixField":
        return MatrixField(list(zip(*self.rows)))

    def evaluate(self, X, params=None) -> np.ndarray:
        """Values at rows of ``X``; shape ``(N, rows, cols)``."""
        n, m = self.shape
        flat = [e for row in self.rows for e in row]
        X = np.atleast_2d(np.asarray(X, dtype=float))
        vals = compile_exprs(flat, X.shape[1])(X, params)
        return vals.reshape(-1, n, m)

    def __repr__(self):
        return "MatrixField([" + "; ".join(", ".join(to_string(e) for e in row) for row in self.rows) + "])"


def as_matrix(sigma) -> MatrixField:
    """Dispersion as an ``n x k`` matrix (a vector field becomes one column)."""
    if isinstance(sigma, MatrixField):
        return sigma
    if isinstance(sigma, VectorField):
        return MatrixField([[c] for c in sigma.comps])
    raise TypeError(f"expected a VectorField or MatrixField, got {type(sigma).__name__}")


def noise_columns(sigma) -> list[VectorField]:
    m = as_matrix(sigma)
    return [m.column(j) for j in range(m.shape[1])]


class Distribution:
    """Span of a nonempty list of vector fields of equal dimension."""

    __slots__ = ("generators",)

    def __init__(self, generators: Sequence[VectorField]):
        gens = tuple(generators)
        if not gens:
            raise DimensionError("a distribution needs at least one generator")
        if len({g.dim for g in gens}) != 1:
            raise DimensionError("generators must share one dimension")
        self.generators = gens

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def evaluate(self, X, params=None) -> np.ndarray:
        """Generator values, shape ``(N, dim, k)``."""
        return MatrixField.from_columns(self.generators).evaluate(X, params)
