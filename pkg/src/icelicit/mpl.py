"""Multiple price lists: certainty equivalents, payment schedules, searches.

An agent chooses between a sure amount and a fixed two-outcome lottery.
The analyst offers amounts from an equally spaced discretization and pays
only on the question where the search stops, with a stop-dependent
probability. Strategic agents over-report; :func:`back_out` undoes that.

Indices follow the discretization: ``points[0]`` is the lottery's low
outcome, ``points[n]`` its high outcome, and stop indices run over ``1..n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import optimize

from .core import TOL
from .framework import Oracle, Query, Transcript

Curve = Callable[[float], float]


class BracketError(ValueError):
    """The root bracket does not straddle a sign change (curve not monotone)."""


class _LotteryTag(str):
    pass


LOTTERY = _LotteryTag("L")


@dataclass(frozen=True)
class Lottery:
    low: float
    high: float
    p_high: float = 0.5

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("lottery needs low < high")
        if not 0 < self.p_high < 1:
            raise ValueError("p_high must lie in (0, 1)")

    def expected_utility(self, u: Curve) -> float:
        return (1 - self.p_high) * u(self.low) + self.p_high * u(self.high)

    def draw(self, rng: np.random.Generator) -> float:
        return self.high if rng.random() < self.p_high else self.low


@dataclass(frozen=True)
class Discretization:
    low: float
    high: float
    n: int
    points: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need n >= 1")
        if not self.low < self.high:
            raise ValueError("need low < high")
        pts = self.low + (self.high - self.low) * np.arange(self.n + 1) / self.n
        pts[-1] = self.high
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def for_lottery(cls, lottery: Lottery, n: int) -> "Discretization":
        return cls(lottery.low, lottery.high, n)

    @property
    def step(self) -> float:
        return (self.high - self.low) / self.n

    def __getitem__(self, t: int) -> float:
        return float(self.points[t])

    def cell_of(self, x: float) -> int:
        """Smallest index ``t >= 1`` with ``x <= x_t`` (so ``x`` lies in ``(x_{t-1}, x_t]``)."""
        t = int(np.searchsorted(self.points, x, side="left"))
        return min(max(t, 1), self.n)


@dataclass(frozen=True)
class PaymentSchedule:
    """Probability ``p_t`` of paying the sure amount when the search stops at ``t``."""

    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if not p:
            raise ValueError("empty schedule")
        if any(not 0 < v <= 1 for v in p):
            raise ValueError("schedule entries must lie in (0, 1]")
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return len(self.p)

    def prob(self, t: int) -> float:
        if not 1 <= t <= self.n:
            raise IndexError(f"stop index {t} out of range 1..{self.n}")
        return self.p[t - 1]

    def as_array(self) -> NDArray[np.float64]:
        return np.array(self.p)

    @classmethod
    def geometric(cls, n: int, ratio: float, p1: float = 1.0) -> "PaymentSchedule":
        return cls(tuple(p1 * ratio**k for k in range(n)))

    @classmethod
    def uniform_random_question(cls, n: int) -> "PaymentSchedule":
        """``p_t = 1/t``: pay one of the ``t`` asked questions uniformly."""
        return cls(tuple(1.0 / t for t in range(1, n + 1)))

    @classmethod
    def constant(cls, n: int, p: float) -> "PaymentSchedule":
        return cls((p,) * n)


def certainty_equivalent(u: Curve, lottery: Lottery, tol: float = TOL.root) -> float:
    """Sure amount the agent values exactly like ``lottery``, by bisection."""
    target = lottery.expected_utility(u)

    def gap(x):
        return u(x) - target

    lo_gap, hi_gap = gap(lottery.low), gap(lottery.high)
    if not (lo_gap <= 0 <= hi_gap):
        raise BracketError(
            f"u(low) - E[u(L)] = {lo_gap:.3g} and u(high) - E[u(L)] = {hi_gap:.3g} do not bracket a root"
        )
    if lo_gap == 0:
        return lottery.low
    if hi_gap == 0:
        return lottery.high
    return float(optimize.bisect(gap, lottery.low, lottery.high, xtol=tol, maxiter=400))


class CRRAFamily:
    """Power (CRRA) utilities on ``[low, high]``, indexed by certainty equivalent.

    Each member is ``x -> x**sigma`` rescaled so that ``u(low) = 0`` and
    ``u(high) = 1`` (log utility at ``sigma = 0``). Rescaling leaves the
    preferences untouched and makes the utility range ``M`` exactly 1.
    ``sigma`` ranges over the reals so every certainty equivalent in
    ``(low, high)`` has a member; ``sigma_range`` may restrict it.
    """

    kind = "crra"

    def __init__(self, lottery: Lottery, sigma_range: tuple[float, float] = (-math.inf, math.inf)):
        if lottery.low <= 0:
            raise ValueError("CRRA utilities need a strictly positive low outcome")
        self.lottery = lottery
        self.sigma_range = (float(sigma_range[0]), float(sigma_range[1]))
        self._a_high = math.log(lottery.high / lottery.low)
        self._cache: dict[float, float] = {}

    def __repr__(self):
        return f"CRRAFamily({self.lottery!r}, sigma_range={self.sigma_range})"

    def utility(self, sigma: float, x):
        """Normalized power utility, stable for large ``|sigma|``."""
        a = np.log(np.asarray(x, dtype=float) / self.lottery.low)
        b = self._a_high
        if sigma == 0:
            return a / b
        if sigma < 0:
            return np.expm1(sigma * a) / np.expm1(sigma * b)
        return np.exp(sigma * (a - b)) * (-np.expm1(-sigma * a)) / (-np.expm1(-sigma * b))

    def ce_of_sigma(self, sigma: float) -> float:
        """Closed-form certainty equivalent: the power mean of the outcomes."""
        L = self.lottery
        if sigma == 0:
            return math.exp((1 - L.p_high) * math.log(L.low) + L.p_high * math.log(L.high))
        logs = np.array([math.log(L.low), math.log(L.high)])
        w = np.array([1 - L.p_high, L.p_high])
        z = sigma * logs
        zmax = z.max()
        lse = zmax + math.log(float(np.dot(w, np.exp(z - zmax))))
        return math.exp(lse / sigma)

    def sigma_of_ce(self, ce: float) -> float:
        if ce in self._cache:
            return self._cache[ce]
        L = self.lottery
        if not L.low < ce < L.high:
            raise ValueError(f"certainty equivalent {ce} outside ({L.low}, {L.high})")
        lo, hi = -1.0, 1.0
        while self.ce_of_sigma(lo) > ce:
            lo *= 2
            if lo < -1e7:
                raise ValueError(f"certainty equivalent {ce} too close to the low outcome")
        while self.ce_of_sigma(hi) < ce:
            hi *= 2
            if hi > 1e7:
                raise ValueError(f"certainty equivalent {ce} too close to the high outcome")
        sigma = float(optimize.bisect(lambda s: self.ce_of_sigma(s) - ce, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=500))
        s_lo, s_hi = self.sigma_range
        if not s_lo <= sigma <= s_hi:
            raise ValueError(f"certainty equivalent {ce} needs sigma={sigma:.4g} outside {self.sigma_range}")
        self._cache[ce] = sigma
        return sigma

    def curve(self, ce: float) -> Curve:
        sigma = self.sigma_of_ce(ce)
        return lambda x: self.utility(sigma, x)

    def ce_range(self) -> tuple[float, float]:
        L = self.lottery
        s_lo, s_hi = self.sigma_range
        lo = L.low if math.isinf(s_lo) else self.ce_of_sigma(s_lo)
        hi = L.high if math.isinf(s_hi) else self.ce_of_sigma(s_hi)
        return lo, hi


class TabulatedFamily:
    """A finite family of utility curves, each listed with its certainty equivalent."""

    kind = "tabulated"

    def __init__(self, lottery: Lottery, curves: Sequence[Curve], tol: float = 1e-9):
        self.lottery = lottery
        pairs = sorted(((certainty_equivalent(u, lottery), u) for u in curves), key=lambda p: p[0])
        self.ces = np.array([c for c, _ in pairs])
        self._curves = [u for _, u in pairs]
        self.tol = tol

    def curve(self, ce: float) -> Curve:
        i = int(np.argmin(np.abs(self.ces - ce)))
        if abs(self.ces[i] - ce) > self.tol:
            raise KeyError(f"no tabulated curve with certainty equivalent {ce}")
        return self._curves[i]

    def ce_range(self) -> tuple[float, float]:
        return float(self.ces[0]), float(self.ces[-1])


@dataclass(frozen=True)
class FamilyConstants:
    """Grid estimates of the regularity constants of a utility family.

    ``K`` is the inverse-Lipschitz constant measured upward from each
    member's own certainty equivalent; ``K_global`` is the two-sided version
    over the whole interval, reported for reference.
    """

    K: float
    M: float
    C1: float
    C2: float
    K_global: float
    lambda_gap: float = math.nan
    monotone_in_ce: bool = False

    @property
    def lambda_degenerate(self) -> bool:
        return not self.lambda_gap >= 1e-9


def estimate_constants(
    family,
    disc: Discretization,
    schedule: PaymentSchedule | None = None,
    members: int = 64,
    grid: int = 10_000,
) -> FamilyConstants:
    """Estimate ``K, M, C1, C2`` (and ``lambda_gap`` given a schedule) numerically."""
    L = family.lottery
    xs = np.linspace(L.low, L.high, grid)
    ce_lo, ce_hi = family.ce_range()
    # members: interior grid points plus evenly spread certainty equivalents
    cands = list(disc.points[1:-1]) + list(np.linspace(ce_lo, ce_hi, members + 2)[1:-1])
    ces = np.array(sorted({float(c) for c in cands if ce_lo < c < ce_hi}))
    if ces.size == 0:
        raise ValueError("family has no members inside the discretization")
    U = np.array([np.asarray(family.curve(c)(xs), dtype=float) for c in ces])
    dx = np.diff(xs)

    K = math.inf
    for c, u in zip(ces, U):
        uc = float(family.curve(c)(c))
        above = xs > c + 1e-12
        if above.any():
            K = min(K, float(np.min((u[above] - uc) / (xs[above] - c))))
    K_global = float(np.min(np.diff(U, axis=1) / dx))
    M = float(np.max(U[:, -1] - U[:, 0]))
    C2 = float(np.max(np.abs(np.diff(U, axis=1)) / dx))
    if ces.size > 1:
        dce = np.diff(ces)[:, None]
        C1 = float(np.max(np.abs(np.diff(U, axis=0)) / dce))
        monotone = bool(np.all(np.diff(U, axis=0) >= -TOL.algebraic))
    else:
        C1, monotone = 0.0, True

    lam = math.nan
    if schedule is not None:
        p = schedule.as_array()
        lam = math.inf
        for c in np.linspace(ce_lo, ce_hi, min(grid, 2000) + 2)[1:-1]:
            u = family.curve(float(c))
            pay = p * np.asarray(u(disc.points[1:]), dtype=float) + (1 - p) * float(u(float(c)))
            gaps = np.diff(np.sort(pay))
            if gaps.size:
                lam = min(lam, float(gaps.min()))
    return FamilyConstants(K=K, M=M, C1=C1, C2=C2, K_global=K_global, lambda_gap=lam, monotone_in_ce=monotone)


@dataclass(frozen=True)
class ScheduleCheck:
    passed: bool
    decreasing: bool
    ratio_ok: bool
    bound: float
    min_decrease_slack: float
    min_ratio_slack: float

    def __bool__(self):
        return self.passed


def validate_schedule(schedule: PaymentSchedule, constants: FamilyConstants, disc: Discretization) -> ScheduleCheck:
    """Check ``p_{t+1} < p_t`` and ``p_{t+1} < (K l / 2M) p_t`` for every ``t``."""
    if not (constants.K > 0 and constants.M > 0 and math.isfinite(constants.K) and math.isfinite(constants.M)):
        raise ValueError("constants K and M must be finite and positive")
    p = schedule.as_array()
    bound = constants.K * disc.step / (2 * constants.M)
    if p.size < 2:
        return ScheduleCheck(True, True, True, bound, math.inf, math.inf)
    dec = p[:-1] - p[1:]
    ratio = bound * p[:-1] - p[1:]
    dec_ok = bool(np.all(dec > 0))
    ratio_ok = bool(np.all(ratio > 0))
    return ScheduleCheck(
        passed=dec_ok and ratio_ok,
        decreasing=dec_ok,
        ratio_ok=ratio_ok,
        bound=bound,
        min_decrease_slack=float(dec.min()),
        min_ratio_slack=float(ratio.min()),
    )


def default_schedule(constants: FamilyConstants, disc: Discretization, safety: float = 0.9) -> PaymentSchedule:
    """Geometric schedule ``p_t = safety * (K l / 2M) ** (t - 1)`` with ``p_1 = 1``."""
    ratio = safety * constants.K * disc.step / (2 * constants.M)
    return PaymentSchedule.geometric(disc.n, ratio, 1.0)


def mpl_payoff(x_true: float, t: int, disc: Discretization, schedule: PaymentSchedule, u: Curve) -> float:
    """Expected utility of stopping at ``t``: ``p_t u(x_t) + (1 - p_t) u(x_true)``."""
    if not 1 <= t <= disc.n:
        raise IndexError(f"stop index {t} out of range 1..{disc.n}")
    p = schedule.prob(t)
    return p * float(u(disc[t])) + (1 - p) * float(u(x_true))


def report_gains(x_true: float, disc: Discretization, schedule: PaymentSchedule, family) -> NDArray[np.float64]:
    """``Payoff(x, x_t) - u(x)`` for every stop index, computed without cancellation."""
    u = family.curve(x_true)
    p = schedule.as_array()
    return p * (np.asarray(u(disc.points[1:]), dtype=float) - float(u(x_true)))


def report_function(x_true: float, disc: Discretization, schedule: PaymentSchedule, family) -> int:
    """Best-response stop index; ties go to the smaller index."""
    if schedule.n != disc.n:
        raise ValueError("schedule length must match the discretization")
    return int(np.argmax(report_gains(x_true, disc, schedule, family))) + 1


def back_out(report: int, disc: Discretization) -> tuple[float, float]:
    """Open interval guaranteed to contain the true CE given the stop index.

    Interior reports ``t + 1`` map to ``(x_{t-1}, x_{t+1})``; a report at
    index 1 maps to ``(x_0, x_1)``.
    """
    if not 1 <= report <= disc.n:
        raise IndexError(f"report {report} out of range 1..{disc.n}")
    if report == 1:
        return disc[0], disc[1]
    return disc[report - 2], disc[report]


# -- agents ------------------------------------------------------------------


def threshold_strategy(ce: float, tol: float = TOL.algebraic):
    """Answer as an agent with certainty equivalent ``ce``: take ``x`` iff ``x >= ce``."""

    def respond(history, query: Query) -> float:
        return 1.0 if float(query.left) >= ce - tol else 0.0

    respond.label = f"ce={ce:.6g}"
    return respond


def index_threshold_strategy(report: int, disc: Discretization):
    """Answer as if the certainty equivalent were ``x_report``."""
    s = threshold_strategy(disc[report])
    s.label = f"report={report}"
    return s


def best_response_strategy(x_true: float, disc: Discretization, schedule: PaymentSchedule, family):
    return index_threshold_strategy(report_function(x_true, disc, schedule, family), disc)


# -- searches ----------------------------------------------------------------


@dataclass
class SearchResult:
    report: int
    interval: tuple[float, float]
    transcript: Transcript

    @property
    def questions(self) -> int:
        return len(self.transcript.queries)


def _ask(oracle: Oracle, disc: Discretization, t: int) -> int:
    return oracle.ask(disc[t], LOTTERY)


def sequential_search(oracle: Oracle, disc: Discretization) -> SearchResult:
    """Offer ``x_1, x_2, ...`` until the sure amount is taken (or ``x_n`` is reached)."""
    T = disc.n
    for t in range(1, disc.n + 1):
        if _ask(oracle, disc, t):
            T = t
            break
    tr = oracle.transcript()
    return SearchResult(T, (disc[T - 1], disc[T]), tr)


def binary_search(oracle: Oracle, disc: Discretization) -> SearchResult:
    """Bisection over stop indices for the first sure amount the agent takes.

    The last question asked is always ``(x_R, L)`` for the returned index
    ``R``; if bisection ended elsewhere that pair is asked once more, so the
    question count is at most ``ceil(log2 n) + 1``.
    """
    lo, hi = 1, disc.n
    while lo < hi:
        mid = (lo + hi) // 2
        if _ask(oracle, disc, mid):
            hi = mid
        else:
            lo = mid + 1
    last = oracle.history[-1][0].left if oracle.history else None
    if last is None or last != disc[lo]:
        _ask(oracle, disc, lo)
    return SearchResult(lo, (disc[lo - 1], disc[lo]), oracle.transcript())


def schedule_payment(report: int, disc: Discretization, schedule: PaymentSchedule) -> list[tuple[float, object]]:
    """Payment lottery of the last-question mechanism."""
    p = schedule.prob(report)
    out: list[tuple[float, object]] = [(p, disc[report])]
    if p < 1:
        out.append((1 - p, LOTTERY))
    return out


def uniform_payment(transcript: Transcript) -> list[tuple[float, object]]:
    """Pay the agent's choice on one asked question drawn uniformly."""
    k = len(transcript.queries)
    return [(1.0 / k, q.left if a else q.right) for q, a in zip(transcript.queries, transcript.answers)]


@dataclass
class MPLMechanism:
    """Search plus payment rule; ``run`` matches the framework's algorithm interface."""

    disc: Discretization
    schedule: PaymentSchedule | None = None
    search: str = "sequential"
    payment: str = "last"

    def __post_init__(self):
        if self.search not in ("sequential", "binary"):
            raise ValueError(f"unknown search {self.search!r}")
        if self.payment not in ("last", "uniform"):
            raise ValueError(f"unknown payment rule {self.payment!r}")
        if self.payment == "last" and self.schedule is None:
            raise ValueError("last-question payment needs a schedule")

    def run(self, oracle: Oracle, rng: np.random.Generator | None = None) -> Transcript:
        fn = sequential_search if self.search == "sequential" else binary_search
        res = fn(oracle, self.disc)
        tr = res.transcript
        tr.hypothesis = 0.5 * sum(back_out(res.report, self.disc))
        tr.info["report"] = res.report
        tr.info["interval"] = back_out(res.report, self.disc)
        if self.payment == "last":
            tr.payment = schedule_payment(res.report, self.disc, self.schedule)
        else:
            tr.payment = uniform_payment(tr)
        return tr


def mpl_utility(family, lottery: Lottery):
    """Utility ``u(ce, outcome)`` on sure amounts and the lottery tag."""

    def u(ce: float, outcome) -> float:
        curve = family.curve(ce)
        if isinstance(outcome, _LotteryTag):
            return lottery.expected_utility(curve)
        return float(curve(float(outcome)))

    return u


def realize_payment(payment: Sequence[tuple[float, object]], lottery: Lottery, rng: np.random.Generator) -> float:
    """Draw the money actually paid from a payment lottery."""
    probs = np.array([p for p, _ in payment])
    k = int(rng.choice(len(payment), p=probs / probs.sum()))
    outcome = payment[k][1]
    if isinstance(outcome, _LotteryTag):
        return lottery.draw(rng)
    return float(outcome)
