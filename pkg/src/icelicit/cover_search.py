"""Exhaustive tournament over a type cover with an effective assignment.

Each cover type ``theta`` is mapped to an outcome ``s(theta)`` such that an
agent prefers ``s(theta')`` to ``s(theta'')`` exactly when ``theta'`` is
closer to its own type. A single pass of pairwise queries keeps the
preferred assignment as champion and pays ``s(champion)``, so lying can only
lower the final payment.

Two instances ship: Euclidean ideal-point preferences (``s`` is the
identity) and linear preferences normalized to the unit sphere (``s`` is
the tangent point of the indifference hyperplane, i.e. the type itself).
Other strictly convex families can be plugged in by supplying ``s``, the
utility, and the metric induced by ``s``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .framework import Environment, Oracle, Transcript


def assignment_euclidean(theta) -> NDArray[np.float64]:
    return np.asarray(theta, dtype=float)


def assignment_linear(theta) -> NDArray[np.float64]:
    """Tangent point on the unit sphere of the type's indifference hyperplanes."""
    t = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(t)
    if norm == 0:
        raise ValueError("linear type must be nonzero")
    return t / norm


def euclidean_utility(theta, x) -> float:
    return -float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(theta, dtype=float)))


def linear_utility(theta, x) -> float:
    return float(np.dot(np.asarray(theta, dtype=float), np.asarray(x, dtype=float)))


def euclidean_distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def chordal_distance(a, b) -> float:
    """Distance between sphere projections: the metric induced by the linear ``s``."""
    return euclidean_distance(assignment_linear(a), assignment_linear(b))


@dataclass(frozen=True)
class AssignmentFunction:
    s: Callable
    kind: str
    utility: Callable
    metric: Callable

    def __call__(self, theta):
        return self.s(theta)

    @property
    def environment(self) -> Environment:
        return Environment(self.utility, self.metric)


EUCLIDEAN = AssignmentFunction(assignment_euclidean, "euclidean", euclidean_utility, euclidean_distance)
LINEAR = AssignmentFunction(assignment_linear, "linear", linear_utility, chordal_distance)


@dataclass(frozen=True)
class TypeCover:
    points: tuple
    radius: float
    metric: str

    def __len__(self):
        return len(self.points)

    def nearest(self, theta, dist: Callable) -> int:
        return int(np.argmin([dist(theta, p) for p in self.points]))

    def covering_radius(self, probes, dist: Callable) -> float:
        return max(min(dist(x, p) for p in self.points) for x in probes)


def square_cover(k: int, lo: float = 0.0, hi: float = 1.0) -> TypeCover:
    """Cell centres of a ``k x k`` grid over ``[lo, hi]^2``."""
    h = (hi - lo) / k
    c = lo + h * (np.arange(k) + 0.5)
    pts = tuple(np.array([x, y]) for x, y in itertools.product(c, c))
    return TypeCover(pts, h * math.sqrt(2) / 2, "euclidean")


def rect_cover(kx: int, ky: int, lo: float = 0.0, hi: float = 1.0) -> TypeCover:
    hx, hy = (hi - lo) / kx, (hi - lo) / ky
    cx = lo + hx * (np.arange(kx) + 0.5)
    cy = lo + hy * (np.arange(ky) + 0.5)
    pts = tuple(np.array([x, y]) for x, y in itertools.product(cx, cy))
    return TypeCover(pts, 0.5 * math.hypot(hx, hy), "euclidean")


def circle_cover(k: int, phase: float = 0.0) -> TypeCover:
    """``k`` equally spaced unit vectors; chordal covering radius ``2 sin(pi / 2k)``."""
    ang = phase + 2 * math.pi * np.arange(k) / k
    pts = tuple(np.array([math.cos(a), math.sin(a)]) for a in ang)
    return TypeCover(pts, 2 * math.sin(math.pi / (2 * k)), "chordal")


def exhaustive_search(oracle: Oracle, cover: TypeCover, s: AssignmentFunction | Callable) -> tuple[object, Transcript]:
    """Single pass over the cover keeping the preferred assignment as champion.

    Each round offers the pair (champion, challenger) with the incumbent on
    the left, so a weak preference (answer 1) keeps the incumbent.
    """
    if len(cover) == 0:
        raise ValueError("empty cover")
    pts = cover.points
    champ = 0
    for j in range(1, len(pts)):
        keep = oracle.ask(s(pts[champ]), s(pts[j]))
        if not keep:
            champ = j
    tr = oracle.transcript()
    tr.hypothesis = pts[champ]
    tr.payment = [(1.0, s(pts[champ]))]
    tr.info["champion"] = champ
    return pts[champ], tr


@dataclass
class CoverSearch:
    cover: TypeCover
    assignment: AssignmentFunction

    def run(self, oracle: Oracle, rng: np.random.Generator | None = None) -> Transcript:
        return exhaustive_search(oracle, self.cover, self.assignment)[1]


def effectiveness_violations(cover: TypeCover, a: AssignmentFunction, tol: float = 1e-12) -> int:
    """Count cover triples where utility order and distance order disagree."""
    pts = cover.points
    bad = 0
    for th in pts:
        u = [a.utility(th, a(p)) for p in pts]
        d = [a.metric(th, p) for p in pts]
        for i, j in itertools.combinations(range(len(pts)), 2):
            if abs(d[i] - d[j]) <= tol:
                continue
            if (u[i] > u[j]) != (d[i] < d[j]):
                bad += 1
    return bad
