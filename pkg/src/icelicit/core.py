"""Geometry on the probability simplex and the unit sphere.

Beliefs live in the simplex; the spherical scoring rule and the belief
elicitation algorithm work with their projections onto the unit sphere.
Everything here is a pure function of numpy arrays except the seeded
generators, which are plain ``numpy.random.Generator`` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module."""

    algebraic: float = 1e-12
    root: float = 1e-10
    solver: float = 1e-9
    margin: float = 1e-9
    resolution: float = 1e-6


TOL = Tolerances()


class DimensionError(ValueError):
    pass


class CoverTooLarge(ValueError):
    """Raised when a requested cover would exceed the configured size cap."""


@dataclass(frozen=True)
class Belief:
    """A point of the n-simplex (a subjective distribution over n states)."""

    probs: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise DimensionError(f"a belief needs at least 2 states, got shape {p.shape}")
        if np.any(p < 0) or not np.isfinite(p).all():
            raise ValueError(f"belief entries must be non-negative and finite: {p}")
        if abs(p.sum() - 1.0) > TOL.algebraic:
            raise ValueError(f"belief entries must sum to 1 (got {p.sum()!r})")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights: ArrayLike) -> "Belief":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    @classmethod
    def uniform(cls, n: int) -> "Belief":
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"Belief({np.array2string(self.probs, precision=6, separator=', ')})"


BeliefLike = Union[Belief, ArrayLike]


def _vec(x: BeliefLike) -> NDArray[np.float64]:
    return np.asarray(x, dtype=float)


def _pair(a: BeliefLike, b: BeliefLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def project_to_sphere(alpha: BeliefLike) -> NDArray[np.float64]:
    """Return ``alpha / ||alpha||``."""
    a = _vec(alpha)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise ValueError("cannot project the zero vector onto the sphere")
    return a / norm


def tv_distance(alpha: BeliefLike, beta: BeliefLike) -> float:
    a, b = _pair(alpha, beta)
    return 0.5 * float(np.abs(a - b).sum())


def renorm_l2(alpha: BeliefLike, beta: BeliefLike) -> float:
    """Euclidean distance between the sphere projections of two beliefs."""
    a, b = _pair(alpha, beta)
    return float(np.linalg.norm(project_to_sphere(a) - project_to_sphere(b)))


def angular_error(alpha: BeliefLike, beta: BeliefLike) -> float:
    """Probability that a uniform random hyperplane separates ``alpha`` and ``beta``.

    Equals ``arccos(rho(alpha) . rho(beta)) / pi``.
    """
    a, b = _pair(alpha, beta)
    cos = float(np.dot(project_to_sphere(a), project_to_sphere(b)))
    return math.acos(min(1.0, max(-1.0, cos))) / math.pi


def spherical_score(beta: BeliefLike, state: int) -> float:
    """Score of report ``beta`` when ``state`` (1-based) is realized."""
    b = _vec(beta)
    if not 1 <= state <= b.size:
        raise IndexError(f"state {state} out of range 1..{b.size}")
    return float(project_to_sphere(b)[state - 1])


def expected_spherical_score(alpha: BeliefLike, beta: BeliefLike) -> float:
    """Expected spherical score of report ``beta`` for an agent holding ``alpha``."""
    a, b = _pair(alpha, beta)
    return float(np.dot(a, project_to_sphere(b)))


def sample_unit_sphere(n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    if n < 2:
        raise DimensionError("sphere sampling needs n >= 2")
    while True:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
        if norm > 1e-300:
            return g / norm


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def derive_seed(seed: int, *index: int) -> int:
    """Hash ``(seed, *index)`` into a fresh 63-bit seed.

    Used for per-trial and per-strategy streams so that adding trials never
    perturbs earlier ones.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(i) for i in index]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def epsilon_cover_interval(lo: float, hi: float, eps: float) -> NDArray[np.float64]:
    """Sorted points such that every point of ``[lo, hi]`` is within ``eps`` of one."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if eps <= 0:
        raise ValueError("need eps > 0")
    width = hi - lo
    # grid spacing eps (radius eps / 2); one midpoint when the interval is that short
    if width <= eps:
        return np.array([0.5 * (lo + hi)])
    k = math.ceil(width / eps - TOL.algebraic)
    return lo + width * np.arange(k + 1) / k


def simplex_grid(n: int, m: int) -> NDArray[np.float64]:
    """All compositions ``k / m`` of the n-simplex, one per row.

    Rows come out in lexicographic order of the integer numerators.
    """
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    rows = []
    # stars and bars: choose n-1 bar positions among m + n - 1 slots
    for bars in combinations(range(m + n - 1), n - 1):
        prev = -1
        counts = []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(m + n - 2 - prev)
        rows.append(counts)
    grid = np.array(rows, dtype=float)[::-1] / m
    return grid


def simplex_grid_radius(n: int, m: int) -> float:
    """Worst-case TV distance from a simplex point to the ``1/m`` lattice.

    Largest-remainder rounding moves ``r`` coordinates up and ``n - r`` down;
    the displaced mass is at most ``r (n - r) / (n m)``.
    """
    return max(r * (n - r) for r in range(n + 1)) / (n * m)


def epsilon_cover_simplex(n: int, eps: float, cap: int = 1_000_000) -> NDArray[np.float64]:
    """Lattice cover of the n-simplex with TV covering radius at most ``eps``."""
    if n < 2:
        raise DimensionError("need n >= 2")
    if not 0 < eps < 1:
        raise ValueError("need 0 < eps < 1")
    m = max(1, math.ceil(simplex_grid_radius(n, 1) / eps - TOL.algebraic))
    size = math.comb(m + n - 1, n - 1)
    if size > cap:
        raise CoverTooLarge(f"cover of the {n}-simplex at eps={eps} has {size} points (cap {cap})")
    return simplex_grid(n, m)


def sample_simplex(n: int, rng: np.random.Generator, size: int | None = None) -> NDArray[np.float64]:
    """Uniform (flat Dirichlet) draws from the n-simplex."""
    return rng.dirichlet(np.ones(n), size=size)
