"""Stochastic control systems, diffeomorphisms and regular state feedback."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ConventionError, DimensionError, PreconditionError
from .evaluate import compile_exprs
from .expr import ONE, ZERO, Expr, Var, as_expr, simplify, substitute, to_string, variables
from .fields import MatrixField, VectorField, as_matrix
from .parser import parse
from .sampling import DomainSampler, max_relative_deviation

EQ_TOL = 1e-10


class Convention(Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"
    DETERMINISTIC = "deterministic"

    @classmethod
    def from_name(cls, name) -> "Convention":
        if isinstance(name, Convention):
            return name
        key = str(name).strip().lower().replace("ô", "o")
        aliases = {
            "ito": cls.ITO,
            "i": cls.ITO,
            "stratonovich": cls.STRATONOVICH,
            "strat": cls.STRATONOVICH,
            "s": cls.STRATONOVICH,
            "deterministic": cls.DETERMINISTIC,
            "det": cls.DETERMINISTIC,
            "d": cls.DETERMINISTIC,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConventionError(f"unknown convention {name!r}") from None


@dataclass(frozen=True)
class Diffeo:
    """Coordinate change ``z = T(x)`` with an optional symbolic inverse ``x = T^{-1}(z)``.

    Both maps are written in the variables ``x1..xn``.
    """

    forward: tuple
    inverse: tuple | None = None

    def __init__(self, forward: Sequence, inverse: Sequence | None = None):
        fw = tuple(simplify(as_expr(e)) for e in forward)
        inv = None if inverse is None else tuple(simplify(as_expr(e)) for e in inverse)
        if inv is not None and len(inv) != len(fw):
            raise DimensionError("forward and inverse maps differ in length")
        for e in fw + (inv or ()):
            vs = variables(e)
            if vs and max(vs) > len(fw):
                raise DimensionError(f"map component {e} uses x{max(vs)} beyond dimension {len(fw)}")
        object.__setattr__(self, "forward", fw)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def identity(cls, n: int) -> "Diffeo":
        v = [Var(i) for i in range(1, n + 1)]
        return cls(v, v)

    @classmethod
    def parse(cls, forward: Sequence[str], inverse: Sequence[str] | None = None) -> "Diffeo":
        n = len(forward)
        return cls([parse(t, n) for t in forward], None if inverse is None else [parse(t, n) for t in inverse])

    @property
    def dim(self) -> int:
        return len(self.forward)

    @property
    def has_inverse(self) -> bool:
        return self.inverse is not None

    def inverted(self) -> "Diffeo":
        if self.inverse is None:
            raise PreconditionError("diffeomorphism has no symbolic inverse")
        return Diffeo(self.inverse, self.forward)

    def is_identity(self) -> bool:
        return all(e == Var(i) for i, e in enumerate(self.forward, 1))

    def compose_after(self, inner: Sequence[Expr]) -> tuple:
        """``self.forward`` evaluated at ``inner(x)``."""
        m = {i: e for i, e in enumerate(inner, 1)}
        return tuple(substitute(e, m) for e in self.forward)

    def apply(self, X, params=None) -> np.ndarray:
        return compile_exprs(self.forward, self.dim)(X, params)

    def apply_inverse(self, Z, params=None) -> np.ndarray:
        if self.inverse is None:
            raise PreconditionError("diffeomorphism has no symbolic inverse")
        return compile_exprs(self.inverse, self.dim)(Z, params)

    def inverse_residual(self, sampler, params=None, n_samples: int = 64) -> float:
        """Worst relative deviation of ``T^{-1}(T(x))`` from ``x`` on the sampler, and of ``T(T^{-1}(z))`` on its image."""
        if self.inverse is None:
            raise PreconditionError("diffeomorphism has no symbolic inverse")
        X = sampler.sample(n_samples)
        Z = self.apply(X, params)
        back = self.apply_inverse(Z, params)
        again = self.apply(back, params)
        ok = np.all(np.isfinite(back), axis=1) & np.all(np.isfinite(again), axis=1)
        if ok.sum() < 0.8 * len(X):
            raise PreconditionError("inverse map fails to evaluate on most sample points")
        d1 = np.abs(back[ok] - X[ok]) / (1 + np.abs(X[ok]))
        d2 = np.abs(again[ok] - Z[ok]) / (1 + np.abs(Z[ok]))
        return float(max(d1.max(initial=0.0), d2.max(initial=0.0)))

    def check_inverse(self, sampler, tol: float = 1e-8, params=None) -> bool:
        return self.inverse_residual(sampler, params) <= tol

    def to_dict(self) -> dict:
        return {
            "T": [to_string(e) for e in self.forward],
            "Tinv": None if self.inverse is None else [to_string(e) for e in self.inverse],
        }


@dataclass(frozen=True)
class Feedback:
    """Regular state feedback ``u = alpha + beta * v``."""

    alpha: Expr
    beta: Expr

    def __init__(self, alpha, beta):
        object.__setattr__(self, "alpha", simplify(as_expr(alpha)))
        object.__setattr__(self, "beta", simplify(as_expr(beta)))

    @classmethod
    def identity(cls) -> "Feedback":
        return cls(ZERO, ONE)

    @classmethod
    def parse(cls, alpha: str, beta: str, dim: int) -> "Feedback":
        return cls(parse(alpha, dim), parse(beta, dim))

    def inverse(self) -> "Feedback":
        """The feedback undoing this one: ``a = -alpha / beta``, ``b = 1 / beta``."""
        return Feedback(-self.alpha / self.beta, ONE / self.beta)

    def then(self, other: "Feedback") -> "Feedback":
        """Apply ``self`` first, then ``other`` on the new input."""
        return Feedback(self.alpha + self.beta * other.alpha, self.beta * other.beta)

    def in_coordinates(self, T: Diffeo) -> "Feedback":
        """The same feedback written in ``z = T(x)`` coordinates (``alpha o T^{-1}``)."""
        if T.inverse is None:
            raise PreconditionError("expressing feedback in new coordinates needs T^{-1}")
        m = {i: e for i, e in enumerate(T.inverse, 1)}
        return Feedback(substitute(self.alpha, m), substitute(self.beta, m))

    def beta_margin(self, sampler, params=None, n_samples: int = 64) -> float:
        """Smallest sampled ``|beta|``; zero when ``beta`` changes sign on the domain."""
        X = sampler.sample(n_samples)
        b = compile_exprs([self.beta], sampler.dim)(X, params)[:, 0]
        b = b[np.isfinite(b)]
        if not b.size or (b.min() < 0 < b.max()):
            return 0.0
        return float(np.min(np.abs(b)))

    def to_dict(self) -> dict:
        return {"alpha": to_string(self.alpha), "beta": to_string(self.beta)}


@dataclass(frozen=True)
class StochasticSystem:
    """Affine SDE ``dx = (f + g u) dt + sigma dw`` under a stated convention.

    When ``chart`` is set, the fields are the components of the system in the
    coordinates ``z = chart(x)`` but are written as functions of the base state
    ``x``; ``x0`` and ``sampler`` then refer to the base coordinates. This is how
    transformations without a symbolic inverse are represented.
    """

    f: VectorField
    g: VectorField
    sigma: VectorField | MatrixField
    convention: Convention = Convention.ITO
    x0: tuple = ()
    params: Mapping[str, float] = field(default_factory=dict)
    sampler: object = None
    chart: Diffeo | None = None

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention.from_name(self.convention))
        n = self.f.dim
        if self.g.dim != n:
            raise DimensionError(f"g has dimension {self.g.dim}, f has {n}")
        sm = as_matrix(self.sigma)
        if sm.shape[0] != n:
            raise DimensionError(f"sigma has {sm.shape[0]} rows, f has {n}")
        x0 = tuple(float(v) for v in self.x0) if self.x0 else (0.0,) * self.base_dim
        if len(x0) != self.base_dim:
            raise DimensionError(f"x0 has {len(x0)} entries, expected {self.base_dim}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "params", dict(self.params))
        if self.sampler is None:
            object.__setattr__(self, "sampler", DomainSampler([(-1.0, 1.0)] * self.base_dim, 0))
        if self.convention is Convention.DETERMINISTIC and not all(
            e == ZERO for row in sm.rows for e in row
        ):
            raise ConventionError("a deterministic system must have sigma = 0")

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def base_dim(self) -> int:
        return self.chart.dim if self.chart is not None else self.f.dim

    @property
    def noise_dim(self) -> int:
        return as_matrix(self.sigma).shape[1]

    @property
    def sigma_matrix(self) -> MatrixField:
        return as_matrix(self.sigma)

    @property
    def sigma_field(self) -> VectorField:
        """The single noise column (k = 1)."""
        if isinstance(self.sigma, VectorField):
            return self.sigma
        if self.noise_dim != 1:
            raise DimensionError("this operation needs a single noise channel")
        return self.sigma.column(0)

    def replace(self, **changes) -> "StochasticSystem":
        return dataclasses.replace(self, **changes)

    def z0(self) -> tuple:
        """The equilibrium in the system's own coordinates."""
        if self.chart is None:
            return self.x0
        return tuple(float(v) for v in self.chart.apply(np.array([self.x0]), self.params)[0])

    def drift_at_x0(self) -> np.ndarray:
        return self.f.evaluate(np.array([self.x0]), self.params)[0]

    def at_equilibrium(self, tol: float = EQ_TOL) -> bool:
        """``|f(x0)| <= tol`` componentwise, plus ``|f + corr|(x0) <= tol`` under Ito."""
        if np.any(np.abs(self.drift_at_x0()) > tol):
            return False
        if self.convention is Convention.ITO:
            from .transform import correcting_term

            fc = self.f + correcting_term(self.sigma, self.chart)
            return bool(np.all(np.abs(fc.evaluate(np.array([self.x0]), self.params)[0]) <= tol))
        return True

    def without_noise(self) -> "StochasticSystem":
        return self.replace(sigma=VectorField.zero(self.dim), convention=Convention.DETERMINISTIC)

    def with_convention(self, convention) -> "StochasticSystem":
        """Same fields reinterpreted under another convention (no drift correction)."""
        return self.replace(convention=Convention.from_name(convention))

    def equals_on_sampler(self, other: "StochasticSystem", n_samples: int = 64) -> float:
        """Worst relative deviation between the fields of two systems on this sampler."""
        a = list(self.f) + list(self.g) + [e for row in self.sigma_matrix.rows for e in row]
        b = list(other.f) + list(other.g) + [e for row in other.sigma_matrix.rows for e in row]
        return max_relative_deviation(a, b, self.sampler, self.params, n_samples)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "convention": self.convention.value,
            "f": self.f.strings(),
            "g": self.g.strings(),
            "sigma": [[to_string(e) for e in row] for row in self.sigma_matrix.rows],
            "x0": list(self.x0),
            "chart": None if self.chart is None else [to_string(e) for e in self.chart.forward],
        }
