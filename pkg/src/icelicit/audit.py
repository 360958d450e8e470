"""Brute-force incentive audits and worked manipulation examples.

"For all strategies" is approximated by two graded classes: fixed
misreports (the agent answers truthfully for some other type drawn from a
cover) and exhaustive answer sequences at small depth. Strategies are
compared with common random numbers: trial ``k`` of every strategy uses the
same generator seed, so gain estimates are paired and deterministic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .belief import BELIEF_ENV, belief_utility
from .core import (
    Belief,
    derive_seed,
    epsilon_cover_interval,
    expected_spherical_score,
    renorm_l2,
    simplex_grid,
)
from .cover_search import AssignmentFunction, TypeCover, exhaustive_search
from .framework import Oracle, Transcript, payment_utility, scripted_strategy
from .mpl import (
    Discretization,
    PaymentSchedule,
    binary_search,
    report_gains,
    threshold_strategy,
)

MAX_SEQUENCE_DEPTH = 14


class EnumerationGuard(ValueError):
    pass


# -- strategy grids ----------------------------------------------------------


@dataclass(frozen=True)
class FixedMisreport:
    """Answer truthfully as each candidate type in turn."""

    types: tuple

    @classmethod
    def simplex(cls, n: int, spacing: float) -> "FixedMisreport":
        m = round(1.0 / spacing)
        if abs(m * spacing - 1.0) > 1e-9:
            raise ValueError("spacing must divide 1")
        return cls(tuple(map(tuple, simplex_grid(n, m))))

    def strategies(self, env=BELIEF_ENV) -> list:
        out = []
        for t in self.types:
            s = env.truthful(np.asarray(t, dtype=float))
            s.label = "misreport=(" + ",".join(f"{x:.4g}" for x in t) + ")"
            out.append(s)
        return out


@dataclass(frozen=True)
class AnswerSequences:
    """Every bit string of length ``depth``."""

    depth: int

    def __post_init__(self):
        if not 0 <= self.depth <= MAX_SEQUENCE_DEPTH:
            raise EnumerationGuard(f"depth {self.depth} exceeds the 2^{MAX_SEQUENCE_DEPTH} enumeration guard")

    def strategies(self, env=None) -> list:
        return [scripted_strategy(bits) for bits in itertools.product((0, 1), repeat=self.depth)]


StrategyGrid = FixedMisreport | AnswerSequences


# -- convex budgets ------------------------------------------------------------


@dataclass(frozen=True)
class BudgetsOutcome:
    truthful: float
    manipulation: float

    @property
    def gain(self) -> float:
        return self.manipulation - self.truthful


def _budget_prices(ratio: float) -> np.ndarray:
    """Prices with ``p1 / p2 = ratio`` normalized so that ``p . (1/2, 1/2) = 1``."""
    p2 = 2.0 / (1.0 + ratio)
    return np.array([ratio * p2, p2])


def _corner(alpha: np.ndarray, p: np.ndarray, income: float = 1.0) -> np.ndarray:
    """Optimal bundle of a risk-neutral agent; ties go to state 2."""
    if alpha[0] / p[0] > alpha[1] / p[1]:
        return np.array([income / p[0], 0.0])
    return np.array([0.0, income / p[1]])


def convex_budgets_demo(alpha, factor: float = 2.0) -> BudgetsOutcome:
    """Two adaptive budget questions, one paid uniformly at random.

    The first budget has prices ``(1, 1)``; the second moves ``p1 / p2`` by
    ``factor`` in the direction the first choice points to. Truthful play
    picks the optimal corner twice; manipulation flips the first choice.
    """
    a = np.asarray(Belief(np.asarray(alpha, dtype=float)), dtype=float)
    if a.size != 2:
        raise ValueError("the budgets example has two states")
    p1 = np.ones(2)

    def play(first: np.ndarray) -> float:
        ratio = factor if first[0] > 0 else 1.0 / factor
        second = _corner(a, _budget_prices(ratio))
        return 0.5 * (float(a @ first) + float(a @ second))

    honest = _corner(a, p1)
    flipped = np.array([1.0, 0.0]) if honest[1] > 0 else np.array([0.0, 1.0])
    return BudgetsOutcome(play(honest), play(flipped))


def budgets_ratio_grid(points: int = 99, step: float = 1 / 200) -> np.ndarray:
    return step * np.arange(1, points + 1)


def belief_from_ratio(r: float) -> Belief:
    return Belief(np.array([r / (1 + r), 1 / (1 + r)]))


# -- MPL counterexample ---------------------------------------------------------


@dataclass(frozen=True)
class MPLCounterexample:
    truthful: float
    deviation: float
    truthful_questions: tuple
    deviation_questions: tuple
    truthful_choices: tuple
    deviation_choices: tuple

    @property
    def gain(self) -> float:
        return self.deviation - self.truthful


def mpl_uniform_payment_counterexample(
    n: int = 7, step: float = 1 / 8, true_index: int = 3, report_index: int = 5, u_lottery: float = 0.5
) -> MPLCounterexample:
    """Binary search with uniform payment over asked questions.

    Sure amounts are ``x_i = i * step`` for ``i = 1..n``, valued
    risk-neutrally at ``i * step``; the lottery is worth ``u_lottery`` and,
    being the agent's certainty equivalent, so is ``x_{true_index}``.
    """
    disc = Discretization(0.0, n * step, n)

    def index(x) -> int:
        return int(round(float(x) / step))

    def value(outcome) -> float:
        if isinstance(outcome, str):
            return u_lottery
        i = index(outcome)
        return u_lottery if i == true_index else i * step

    def run(ce: float):
        res = binary_search(Oracle(threshold_strategy(ce)), disc)
        tr = res.transcript
        qs = tuple(index(q.left) for q in tr.queries)
        picks = tuple(q.left if a else q.right for q, a in zip(tr.queries, tr.answers))
        pay = sum(value(c) for c in picks) / len(picks)
        labels = tuple("L" if isinstance(c, str) else f"x{index(c)}" for c in picks)
        return pay, qs, labels

    t_pay, t_q, t_c = run(disc[true_index])
    d_pay, d_q, d_c = run(disc[report_index])
    return MPLCounterexample(t_pay, d_pay, t_q, d_q, t_c, d_c)


# -- MPL best response -------------------------------------------------------------


def best_response_mpl(x_true: float, disc: Discretization, schedule: PaymentSchedule, family) -> tuple[int, float]:
    """Optimal stop index under last-question payment and its gain over truthful stopping."""
    gains = report_gains(x_true, disc, schedule, family)
    best = int(np.argmax(gains))
    honest = disc.cell_of(x_true) - 1
    return best + 1, float(gains[best] - gains[honest])


# -- expected-utility best response ---------------------------------------------------


@dataclass
class BestResponse:
    max_gain: float
    argmax: str
    gains: dict[str, float]
    ses: dict[str, float]
    truthful_runs: list = field(default_factory=list)
    runs: dict[str, list] = field(default_factory=dict)

    def se_of(self, label: str) -> float:
        return self.ses[label]


def best_response_eu(
    alpha,
    mechanism: Callable[[Oracle, np.random.Generator], Transcript],
    grid: StrategyGrid,
    trials: int,
    seed: int,
    utility: Callable[[Any, Any], float] = belief_utility,
    keep_runs: bool = False,
) -> BestResponse:
    """Paired Monte Carlo estimate of each strategy's gain over truthful answers."""
    a = np.asarray(alpha, dtype=float)
    strategies = grid.strategies(BELIEF_ENV) if isinstance(grid, FixedMisreport) else grid.strategies()
    truthful = BELIEF_ENV.truthful(a)

    def play(strategy) -> tuple[np.ndarray, list]:
        vals, runs = [], []
        for k in range(trials):
            rng = np.random.default_rng(derive_seed(seed, k))
            tr = mechanism(Oracle(strategy, rng), rng)
            vals.append(payment_utility(a, tr, utility))
            if keep_runs:
                runs.append(tr)
        return np.array(vals), runs

    base, base_runs = play(truthful)
    gains, ses, runs = {}, {}, {}
    for i, s in enumerate(strategies):
        label = getattr(s, "label", f"strategy{i}")
        vals, rs = play(s)
        diff = vals - base
        gains[label] = float(diff.mean())
        ses[label] = float(diff.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        if keep_runs:
            runs[label] = rs
    arg = max(gains, key=gains.get) if gains else "truthful"
    return BestResponse(gains.get(arg, 0.0), arg, gains, ses, base_runs, runs)


# -- naive per-state search ------------------------------------------------------------


def naive_statewise_search(oracle: Oracle, n: int, eps: float) -> tuple[Belief, Transcript]:
    """Binary search for each ``alpha_i`` over a ``2 eps / n`` cover of ``[0, 1]``.

    Queries are ``(e_i, c 1)``; answering 1 says ``alpha_i >= c``. The final
    answer is paid with probability one.
    """
    cover = epsilon_cover_interval(0.0, 1.0, 2 * eps / n)
    K = len(cover) - 1
    est = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        lo, hi = 0, K
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if oracle.ask(e, np.full(n, cover[mid])):
                lo = mid
            else:
                hi = mid - 1
        est[i] = cover[lo] if lo == K else 0.5 * (cover[lo] + cover[lo + 1])
    tr = oracle.transcript()
    beta = Belief.normalized(est) if est.sum() > 0 else Belief.uniform(n)
    tr.hypothesis = beta
    tr.payment = [(1.0, np.asarray(tr.final_choice, dtype=float))]
    return beta, tr


def naive_query_bound(n: int, eps: float) -> int:
    return n * math.ceil(math.log2(n / eps)) + n


@dataclass
class NaiveStatewiseSearch:
    n: int
    eps: float

    def __call__(self, oracle: Oracle, rng: np.random.Generator | None = None) -> Transcript:
        return naive_statewise_search(oracle, self.n, self.eps)[1]

    run = __call__


# -- cover search audit ------------------------------------------------------------------


@dataclass(frozen=True)
class CoverAudit:
    truthful_utility: float
    best_deviation: float
    violations: int
    sequences: int
    truthful_error: float


def cover_ic_audit(cover: TypeCover, a: AssignmentFunction, theta) -> CoverAudit:
    """Play every answer sequence against the exhaustive tournament."""
    th = np.asarray(theta, dtype=float)
    champ, tr = exhaustive_search(Oracle(a.environment.truthful(th)), cover, a)
    u0 = payment_utility(th, tr, a.utility)
    depth = len(cover) - 1
    best, bad, count = -math.inf, 0, 0
    for bits in itertools.product((0, 1), repeat=depth):
        _, dev = exhaustive_search(Oracle(scripted_strategy(bits)), cover, a)
        u = payment_utility(th, dev, a.utility)
        best = max(best, u)
        bad += u > u0
        count += 1
    return CoverAudit(u0, best, bad, count, a.metric(th, champ))


# -- belief IC audit ----------------------------------------------------------------------


@dataclass
class BeliefICAudit:
    max_gain: float
    max_gain_se: float
    argmax: str
    lam: float
    bound: float
    far_checked: int
    far_violations: int
    report: BestResponse

    @property
    def passed(self) -> bool:
        return self.max_gain <= self.bound + 3 * self.max_gain_se and self.far_violations == 0


def belief_ic_audit(alpha, mechanism, spacing: float, trials: int, seed: int) -> BeliefICAudit:
    """Fixed-misreport audit of the belief algorithm with the robust-IC addendum.

    ``lam`` is the largest renormalized-L2 radius about ``alpha`` of the
    truthful version space before the last round; the paid point always
    lies in that set, so no strategy can gain more than ``lam^2 / 2`` in
    expectation. For misreports ``beta`` farther than ``2 lam`` from
    ``alpha``, every paired draw where ``beta``'s set is also within ``lam``
    must leave the deviator strictly worse off, and every point of the
    truthful set must outscore every point of the deviating set.
    """
    a = np.asarray(alpha, dtype=float)
    grid = FixedMisreport.simplex(a.size, spacing)
    br = best_response_eu(a, mechanism, grid, trials, seed, keep_runs=True)
    lam = max(tr.info["prev_space"].radius_about(a) for tr in br.truthful_runs)
    norm = float(np.linalg.norm(a))
    checked = bad = 0
    for beta, (label, runs) in zip(grid.types, br.runs.items()):
        d = renorm_l2(a, beta)
        if d <= 2 * lam:
            continue
        for tr0, tr1 in zip(br.truthful_runs, runs):
            H0, H1 = tr0.info["prev_space"], tr1.info["prev_space"]
            r1 = H1.radius_about(beta)
            if r1 > lam:
                continue
            checked += 1
            u0 = payment_utility(a, tr0, belief_utility)
            u1 = payment_utility(a, tr1, belief_utility)
            worst_truth = min(expected_spherical_score(a, x) for x in H0.vertices)
            # every point of H1 is at least d - r1 from rho(alpha)
            best_dev = norm * (1.0 - 0.5 * (d - r1) ** 2)
            cert = expected_spherical_score(a, tr1.info["version_space"].center()[0])
            if not (u1 < u0 and worst_truth > best_dev and worst_truth > cert):
                bad += 1
    arg = br.argmax
    return BeliefICAudit(br.max_gain, br.ses.get(arg, 0.0), arg, lam, 0.5 * lam**2, checked, bad, br)


def scoring_lemma_gap(alpha, beta) -> float:
    """``score(alpha, alpha) - score(alpha, beta) - renorm_l2^2 / 2``; never positive."""
    drop = expected_spherical_score(alpha, alpha) - expected_spherical_score(alpha, beta)
    return drop - 0.5 * renorm_l2(alpha, beta) ** 2


def effectiveness_mismatches(alpha, betas: Sequence, tol: float = 1e-12) -> tuple[int, int]:
    """Pairs of reports whose score order disagrees with their distance order.

    Returns ``(mismatches, compared)``; near-ties in distance are skipped.
    """
    s = [expected_spherical_score(alpha, b) for b in betas]
    d = [renorm_l2(alpha, b) for b in betas]
    bad = cmp = 0
    for i, j in itertools.combinations(range(len(betas)), 2):
        if abs(d[i] - d[j]) <= tol:
            continue
        cmp += 1
        bad += (s[i] > s[j]) != (d[i] < d[j])
    return bad, cmp
