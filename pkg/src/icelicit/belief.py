"""Incentive-compatible belief elicitation by random halfspace cuts.

The agent holds a belief ``alpha`` over ``n`` states and is paid a reward
vector ``z`` by drawing a state from a ground-truth distribution, so it
prefers ``x`` to ``y`` exactly when ``alpha . (x - y) >= 0``. Each round
draws a uniform direction ``v`` whose hyperplane cuts the current version
space, offers two points of the (projected) version space whose difference
is a positive multiple of ``v``, and keeps the halfspace consistent with
the answer. The final answer is paid with probability one.

The version space is kept exactly as a polyhedral cone (see :mod:`cone`);
linear programs are only used to find well-centred certificate points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog

from .cone import Cone
from .core import TOL, Belief, DimensionError, project_to_sphere, sample_unit_sphere, tv_distance
from .framework import Environment, Oracle, Transcript

MAX_REJECTIONS = 10_000


class DegenerateVersionSpace(RuntimeError):
    """The version space became too thin to cut reliably in float64."""


class SmallMargin(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    """State distribution used to realize payments (1-based states)."""

    probs: tuple

    def __post_init__(self):
        Belief(np.asarray(self.probs, dtype=float))

    @classmethod
    def uniform(cls, n: int) -> "GroundTruth":
        return cls(tuple(np.full(n, 1.0 / n)))

    @property
    def n(self) -> int:
        return len(self.probs)

    def draw(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n, p=np.asarray(self.probs))) + 1


@dataclass(frozen=True)
class VersionSpace:
    """Beliefs consistent with all answers so far: ``{beta in simplex : s_j v_j . beta >= 0}``."""

    n: int
    cone: Cone
    constraints: tuple = ()  # ((v, sign), ...)

    @classmethod
    def simplex(cls, n: int) -> "VersionSpace":
        if n < 2:
            raise DimensionError("need n >= 2")
        return cls(n, Cone.orthant(n))

    def update(self, v, sign: int) -> "VersionSpace":
        v = np.asarray(v, dtype=float)
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return VersionSpace(self.n, self.cone.cut(sign * v), self.constraints + ((v, sign),))

    @property
    def vertices(self) -> NDArray[np.float64]:
        """Vertices of the version space as a polytope in the simplex."""
        return self.cone.rays

    def contains(self, beta, tol: float = TOL.algebraic) -> bool:
        b = np.asarray(beta, dtype=float)
        return self.cone.contains(b, tol) and abs(b.sum() - 1.0) <= 1e-9

    def cap(self) -> tuple[NDArray[np.float64], float]:
        """Axis ``c`` and chordal radius of a spherical cap containing ``rho(H)``."""
        r = self.vertices / np.linalg.norm(self.vertices, axis=1, keepdims=True)
        c = project_to_sphere(r.mean(axis=0))
        return c, float(np.max(np.linalg.norm(r - c, axis=1)))

    def radius_about(self, alpha) -> float:
        """Max renormalized L2 distance from ``alpha`` to a point of the version space.

        The score ``rho(alpha) . x / |x|`` is quasi-concave on the cone, so the
        maximum is attained at a vertex.
        """
        a = project_to_sphere(alpha)
        r = self.vertices / np.linalg.norm(self.vertices, axis=1, keepdims=True)
        return float(np.max(np.linalg.norm(r - a, axis=1)))

    def center(self) -> tuple[Belief, float]:
        """Max-margin certificate point and its margin on the sphere."""
        x = _max_margin(self, None)
        return Belief.normalized(np.clip(x, 0.0, None)), _sphere_margin(self, x)


def _sphere_margin(H: VersionSpace, x) -> float:
    return float(np.min(H.cone.normals @ project_to_sphere(x)))


def _max_margin(H: VersionSpace, v) -> NDArray[np.float64]:
    """Maximize the smallest facet slack over ``H`` (optionally within ``v . x = 0``).

    Solved in coordinates recentred on the vertex mean and scaled by the
    polytope's extent so the LP stays well conditioned as ``H`` shrinks.
    """
    verts = H.vertices
    c = verts.mean(axis=0)
    scale = float(np.max(np.abs(verts - c)))
    if scale == 0.0:
        return c
    n = H.n
    A = H.cone.normals[H.cone.facet_indices()]
    # variables (y, t): x = c + scale * y, margin = scale * t
    A_ub = np.hstack([-A, np.ones((A.shape[0], 1))])
    b_ub = (A @ c) / scale
    A_eq = [np.append(np.ones(n), 0.0)]
    b_eq = [0.0]
    if v is not None:
        A_eq.append(np.append(v, 0.0))
        b_eq.append(-float(v @ c) / scale)
    obj = np.zeros(n + 1)
    obj[-1] = -1.0
    res = linprog(obj, A_ub=A_ub, b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq,
                  bounds=[(-2.0, 2.0)] * n + [(None, 1.0)], method="highs")
    if res.status != 0:
        raise DegenerateVersionSpace(f"max-margin LP failed: {res.message}")
    return c + scale * res.x[:n]


def hyperplane_intersects(H: VersionSpace, v, tol: float = TOL.margin, method: str = "vertices") -> bool:
    """Whether ``{v . x = 0}`` passes through the interior of ``H``.

    ``v . beta`` is linear, so its max and min over ``H`` are attained at
    vertices; ``method="lp"`` solves the two linear programs instead.
    """
    v = np.asarray(v, dtype=float)
    if method == "vertices":
        vals = H.vertices @ v
        hi, lo = float(vals.max()), float(vals.min())
    elif method == "lp":
        A_ub = -H.cone.normals
        b_ub = np.zeros(A_ub.shape[0])
        kw = dict(A_ub=A_ub, b_ub=b_ub, A_eq=np.ones((1, H.n)), b_eq=[1.0], bounds=[(0, None)] * H.n, method="highs")
        lo_res = linprog(v, **kw)
        hi_res = linprog(-v, **kw)
        if lo_res.status != 0 or hi_res.status != 0:
            raise DegenerateVersionSpace("feasibility LP failed")
        lo, hi = float(lo_res.fun), float(-hi_res.fun)
    else:
        raise ValueError(f"unknown method {method!r}")
    return hi > tol and lo < -tol


def interior_point_on_plane(H: VersionSpace, v) -> tuple[NDArray[np.float64], float]:
    """Well-centred point ``w`` of ``rho(H)`` with ``v . w = 0`` and its margin."""
    v = np.asarray(v, dtype=float)
    if H.n == 2:
        # the plane meets the 1-simplex in a single point
        x = np.array([-v[1], v[0]])
        if x.sum() < 0:
            x = -x
    else:
        x = _max_margin(H, v)
    w = project_to_sphere(x)
    w = w - (w @ v) * v
    w = w / np.linalg.norm(w)
    m = float(np.min(H.cone.normals @ w))
    if not m > TOL.margin:
        raise SmallMargin(f"margin {m:.3g} below tolerance")
    return w, m


def query_points(H: VersionSpace, v, w, m: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Symmetric pair on the great circle through ``w`` and ``v``.

    ``x - y = 2 sin(phi) v`` exactly, and both points stay inside the cap
    of chordal radius ``m / 2`` around ``w``.
    """
    v = np.asarray(v, dtype=float)
    s = 0.5 * (0.5 * m)
    c = math.sqrt(1.0 - s * s)
    return w * c + v * s, w * c - v * s


def _band_direction(H: VersionSpace, rng: np.random.Generator) -> NDArray[np.float64]:
    """Uniform direction conditioned on a band that every cutting plane lies in.

    A plane ``{v . x = 0}`` can only cut a cap of angle ``delta`` around
    ``c`` when ``|v . c| <= sin(delta)``, so sampling within that band and
    then rejecting non-cutting planes has the same law as rejection from
    the whole sphere.
    """
    n = H.n
    c, chord = H.cap()
    delta = 2.0 * math.asin(min(1.0, 0.5 * chord))
    s = math.sin(delta) if delta < math.pi / 2 else 1.0
    if s >= 0.5:
        return sample_unit_sphere(n, rng)
    # t = v . c has density proportional to (1 - t^2)^((n - 3) / 2)
    if n == 2:
        t = math.sin(rng.uniform(-math.asin(s), math.asin(s)))
    elif n == 3:
        t = rng.uniform(-s, s)
    else:
        while True:
            t = rng.uniform(-s, s)
            if rng.random() <= (1.0 - t * t) ** ((n - 3) / 2):
                break
    while True:
        g = rng.standard_normal(n)
        g -= (g @ c) * c
        norm = np.linalg.norm(g)
        if norm > 1e-12:
            break
    v = t * c + math.sqrt(1.0 - t * t) * (g / norm)
    return v / np.linalg.norm(v)


def draw_cut(H: VersionSpace, rng: np.random.Generator, max_rejections: int = MAX_REJECTIONS):
    """Sample ``v`` until its plane cuts ``H`` with a usable margin.

    Returns ``(v, w, m, rejections)``.
    """
    for k in range(max_rejections):
        v = _band_direction(H, rng)
        if not hyperplane_intersects(H, v):
            continue
        try:
            w, m = interior_point_on_plane(H, v)
        except SmallMargin:
            continue
        return v, w, m, k
    raise DegenerateVersionSpace(f"{max_rejections} consecutive rejections (n={H.n}, {len(H.constraints)} cuts)")


def belief_utility(alpha, z) -> float:
    return float(np.dot(np.asarray(alpha, dtype=float), np.asarray(z, dtype=float)))


def belief_compare(alpha, left, right) -> float:
    return float(np.dot(np.asarray(alpha, dtype=float), np.asarray(left, dtype=float) - np.asarray(right, dtype=float)))


BELIEF_ENV = Environment(belief_utility, tv_distance, belief_compare)


class BeliefRun(NamedTuple):
    hypothesis: Belief
    transcript: Transcript
    payment: float


def run_belief_algorithm(
    oracle: Oracle,
    T: int,
    rng: np.random.Generator,
    gt: GroundTruth | None = None,
    n: int | None = None,
    resolution: float = TOL.resolution,
    keep_spaces: bool = False,
) -> BeliefRun:
    """Run ``T`` rounds of cut-and-ask and realize the final payment.

    Stops early, recording ``stop_reason="resolution"``, once the version
    space's chordal radius falls below ``resolution``; beyond that point
    float64 answers no longer carry information. ``T = 0`` returns the
    uniform belief with no payment. ``keep_spaces`` stores every
    intermediate version space in ``info["spaces"]``.
    """
    if n is None:
        if gt is None:
            raise ValueError("need n or a ground truth")
        n = gt.n
    if gt is None:
        gt = GroundTruth.uniform(n)
    if gt.n != n:
        raise DimensionError("ground truth dimension mismatch")
    if T < 0:
        raise ValueError("T must be >= 0")
    H = VersionSpace.simplex(n)
    prev = H
    spaces = [H] if keep_spaces else None
    rejections = 0
    stop = "budget"
    for _ in range(T):
        if H.cap()[1] < resolution:
            stop = "resolution"
            break
        v, w, m, k = draw_cut(H, rng)
        rejections += k
        x, y = query_points(H, v, w, m)
        ans = oracle.ask(x, y)
        prev, H = H, H.update(v, 1 if ans else -1)
        if keep_spaces:
            spaces.append(H)
    tr = oracle.transcript()
    beta, margin = H.center()
    tr.hypothesis = beta
    tr.info.update(rounds=len(tr), rejections=rejections, stop_reason=stop, margin=margin,
                   version_space=H, prev_space=prev)
    if keep_spaces:
        tr.info["spaces"] = spaces
    if not len(tr):
        return BeliefRun(beta, tr, float("nan"))
    z = np.asarray(tr.final_choice, dtype=float)
    tr.payment = [(1.0, z)]
    state = gt.draw(rng)
    tr.info["state"] = state
    return BeliefRun(beta, tr, float(z[state - 1]))


@dataclass
class BeliefAlgorithm:
    """Mechanism wrapper ``(oracle, rng) -> Transcript`` for the evaluators."""

    n: int
    T: int
    gt: GroundTruth | None = None
    resolution: float = TOL.resolution
    info: dict = field(default_factory=dict)

    def __call__(self, oracle: Oracle, rng: np.random.Generator) -> Transcript:
        return run_belief_algorithm(oracle, self.T, rng, self.gt, self.n, self.resolution).transcript

    run = __call__


def theorem3_budget(n: int, eps: float, c: float = 4.0) -> int:
    """Rounds ``ceil(c n^1.5 ln(n) ln(n / eps))`` for TV accuracy ``eps``."""
    if n < 2:
        raise DimensionError("need n >= 2")
    if not 0 < eps < 1:
        raise ValueError("need 0 < eps < 1")
    return math.ceil(c * n**1.5 * math.log(n) * math.log(n / eps) - TOL.algebraic)


def ic_budget(n: int, tau: float, c: float = 4.0, eps_max: float = 0.5) -> int:
    """Rounds making the gain from any strategy at most ``tau`` (via ``eps = n sqrt(tau)``)."""
    if not 0 < tau < 1:
        raise ValueError("need 0 < tau < 1")
    return theorem3_budget(n, min(n * math.sqrt(tau), eps_max), c)


def combined_budget(n: int, eps: float, tau: float, c: float = 4.0) -> int:
    return max(theorem3_budget(n, eps, c), ic_budget(n, tau, c))
