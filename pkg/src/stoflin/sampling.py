"""Sampled stand-ins for "for every x in U": domain samplers and numeric equivalence."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, TooManyDomainFailures
from .evaluate import compile_exprs
from .expr import Expr, as_expr, variables

MAX_SKIP_FRACTION = 0.2


@dataclass(frozen=True)
class DomainSampler:
    """Uniform sampling of an axis-aligned box.

    Parameters
    ----------
    box : sequence of (lo, hi) pairs, one per coordinate
    rng_seed : int
        Seed of the generator; equal seeds give equal samples.
    """

    box: tuple
    rng_seed: int = 0

    def __init__(self, box: Sequence[Sequence[float]], rng_seed: int = 0):
        b = tuple((float(lo), float(hi)) for lo, hi in box)
        if not b:
            raise ValueError("box needs at least one interval")
        for lo, hi in b:
            if not lo <= hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "box", b)
        object.__setattr__(self, "rng_seed", int(rng_seed) & (2**64 - 1))

    @property
    def dim(self) -> int:
        return len(self.box)

    def sample(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.rng_seed)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return lo + (hi - lo) * rng.random((n, self.dim))

    def with_seed(self, seed: int) -> "DomainSampler":
        return DomainSampler(self.box, seed)

    def shrink(self, factor: float) -> "DomainSampler":
        """Box scaled about its centre by ``factor``."""
        out = []
        for lo, hi in self.box:
            c, r = (lo + hi) / 2, (hi - lo) / 2 * factor
            out.append((c - r, c + r))
        return DomainSampler(out, self.rng_seed)


class ImageSampler:
    """Samples ``T(p)`` for points ``p`` drawn from a base sampler.

    Used to sample a transformed chart without describing its image as a box.
    """

    def __init__(self, base: DomainSampler, forward: Sequence[Expr], params: Mapping[str, float] | None = None):
        self.base = base
        self.forward = tuple(as_expr(e) for e in forward)
        self.params = dict(params or {})
        self._fn = compile_exprs(self.forward, base.dim)

    @property
    def dim(self) -> int:
        return len(self.forward)

    @property
    def rng_seed(self) -> int:
        return self.base.rng_seed

    def sample(self, n: int) -> np.ndarray:
        z = self._fn(self.base.sample(n), self.params)
        return z[np.all(np.isfinite(z), axis=1)]

    def with_seed(self, seed: int) -> "ImageSampler":
        return ImageSampler(self.base.with_seed(seed), self.forward, self.params)


def sample_points(sampler, n: int) -> np.ndarray:
    return np.asarray(sampler.sample(n), dtype=float)


def finite_rows(*arrays) -> np.ndarray:
    """Mask of rows where every given array is finite."""
    mask = None
    for a in arrays:
        a = np.asarray(a, dtype=float)
        m = np.isfinite(a) if a.ndim == 1 else np.all(np.isfinite(a), axis=tuple(range(1, a.ndim)))
        mask = m if mask is None else mask & m
    return mask


def check_skips(mask: np.ndarray, what: str = "comparison"):
    skipped = int(mask.size - np.count_nonzero(mask))
    if mask.size == 0 or skipped > MAX_SKIP_FRACTION * mask.size:
        raise TooManyDomainFailures(f"{what}: {skipped} of {mask.size} sample points hit domain errors")


def relative_deviation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``|a - b| / (1 + max(|a|, |b|))`` elementwise."""
    return np.abs(a - b) / (1.0 + np.maximum(np.abs(a), np.abs(b)))


def max_relative_deviation(
    a: Sequence[Expr] | Expr,
    b: Sequence[Expr] | Expr,
    sampler,
    params: Mapping[str, float] | None = None,
    n_samples: int = 64,
) -> float:
    """Largest relative deviation between two (lists of) expressions over the sampler."""
    single = isinstance(a, Expr) or not isinstance(a, (list, tuple))
    la = [as_expr(a)] if single else [as_expr(e) for e in a]
    lb = [as_expr(b)] if single else [as_expr(e) for e in b]
    if len(la) != len(lb):
        raise DimensionError(f"cannot compare {len(la)} expressions with {len(lb)}")
    dim = sampler.dim
    used = set().union(*(variables(e) for e in la + lb)) if la else set()
    if used and max(used) > dim:
        raise DimensionError(f"expressions use x{max(used)} but the sampler has dimension {dim}")
    X = sample_points(sampler, n_samples)
    fn = compile_exprs(la + lb, dim)
    vals = fn(X, params or {})
    va, vb = vals[:, : len(la)], vals[:, len(la):]
    mask = finite_rows(va, vb)
    check_skips(mask, "equivalence test")
    if not la:
        return 0.0
    return float(np.max(relative_deviation(va[mask], vb[mask])))


def equivalent(
    a: Expr | Sequence[Expr],
    b: Expr | Sequence[Expr],
    sampler,
    tol: float = 1e-8,
    params: Mapping[str, float] | None = None,
    n_samples: int = 64,
) -> bool:
    """True iff ``|a - b| <= tol * (1 + max(|a|, |b|))`` at every usable sample point.

    Points where either side fails to evaluate are skipped; more than 20% of
    skipped points raises :class:`TooManyDomainFailures`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n_samples < 64:
        raise ValueError("equivalence needs at least 64 sample points")
    return max_relative_deviation(a, b, sampler, params, n_samples) <= tol
