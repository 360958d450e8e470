"""Strategies, oracles, transcripts and empirical learning/IC evaluators.

A *strategy* is any callable ``(history, query) -> float`` returning the
probability of answering 1 ("left weakly preferred"). An :class:`Oracle`
wraps a strategy with memory and a generator for randomized answers.
Mechanisms are callables ``(oracle, rng) -> Transcript``; the transcript's
``payment`` is a list of ``(probability, outcome)`` pairs so that
last-question payment, scheduled payment and uniform payment all share
one evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .core import derive_seed


@dataclass(frozen=True)
class Query:
    left: Any
    right: Any


History = list  # list[tuple[Query, int]]


class Strategy(Protocol):
    def __call__(self, history: History, query: Query) -> float: ...


@dataclass
class Transcript:
    queries: list[Query] = field(default_factory=list)
    answers: list[int] = field(default_factory=list)
    hypothesis: Any = None
    payment: list[tuple[float, Any]] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.queries) != len(self.answers):
            raise ValueError("queries and answers must have equal length")

    @property
    def final_query(self) -> Query | None:
        return self.queries[-1] if self.queries else None

    @property
    def final_choice(self):
        if not self.queries:
            return None
        q, a = self.queries[-1], self.answers[-1]
        return q.left if a else q.right

    def __len__(self) -> int:
        return len(self.queries)


class Oracle:
    """An agent answering pairwise queries according to a strategy."""

    def __init__(self, strategy: Strategy, rng: np.random.Generator | None = None):
        self.strategy = strategy
        self.rng = rng
        self.history: History = []

    def ask(self, left, right) -> int:
        q = Query(left, right)
        p = float(self.strategy(self.history, q))
        if p >= 1.0:
            bit = 1
        elif p <= 0.0:
            bit = 0
        else:
            if self.rng is None:
                raise ValueError("randomized strategy needs an oracle generator")
            bit = int(self.rng.random() < p)
        self.history.append((q, bit))
        return bit

    def transcript(self) -> Transcript:
        return Transcript([q for q, _ in self.history], [a for _, a in self.history])


def truthful_oracle(theta, utility: Callable[[Any, Any], float], compare: Callable | None = None) -> Strategy:
    """Strategy answering ``1{u(theta, left) >= u(theta, right)}``.

    ``compare(theta, left, right)`` may supply the utility difference
    directly when that is numerically better than subtracting two values.
    """

    def respond(history, query: Query) -> float:
        if compare is not None:
            d = compare(theta, query.left, query.right)
        else:
            d = utility(theta, query.left) - utility(theta, query.right)
        return 1.0 if d >= 0 else 0.0

    respond.label = "truthful"
    return respond


def scripted_strategy(bits: Sequence[int], default: int = 1) -> Strategy:
    """Answer ``bits[t]`` on the ``t``-th query regardless of content."""
    bits = tuple(int(b) for b in bits)

    def respond(history, query) -> float:
        t = len(history)
        return float(bits[t] if t < len(bits) else default)

    respond.label = "seq=" + "".join(map(str, bits))
    return respond


def payment_utility(theta, transcript: Transcript, utility: Callable[[Any, Any], float]) -> float:
    """Expected utility to ``theta`` of the transcript's payment lottery."""
    if not transcript.payment:
        raise ValueError("transcript carries no payment")
    return float(sum(p * utility(theta, o) for p, o in transcript.payment))


@dataclass(frozen=True)
class Environment:
    """Utility and metric of a preference environment."""

    utility: Callable[[Any, Any], float]
    metric: Callable[[Any, Any], float]
    compare: Callable | None = None

    def truthful(self, theta) -> Strategy:
        return truthful_oracle(theta, self.utility, self.compare)


Mechanism = Callable[[Oracle, np.random.Generator], Transcript]


@dataclass
class EvalReport:
    success_rate: float
    gain_estimate: float
    trials: int
    seed: int
    errors: list[float] = field(default_factory=list)
    query_counts: list[int] = field(default_factory=list)
    gains: dict[str, float] = field(default_factory=dict)
    gain_se: dict[str, float] = field(default_factory=dict)
    frontier: dict[str, list[tuple[float, float]]] = field(default_factory=dict)

    @property
    def mean_queries(self) -> float:
        return float(np.mean(self.query_counts)) if self.query_counts else float("nan")


def evaluate_learning(
    algorithm: Mechanism,
    env: Environment,
    theta,
    eps: float,
    trials: int,
    seed: int,
) -> EvalReport:
    """Fraction of independent truthful runs with ``d(theta, hypothesis) <= eps``."""
    errors, counts = [], []
    for k in range(trials):
        rng = np.random.default_rng(derive_seed(seed, k))
        tr = algorithm(Oracle(env.truthful(theta), rng), rng)
        errors.append(float(env.metric(theta, tr.hypothesis)))
        counts.append(len(tr))
    ok = sum(e <= eps for e in errors)
    return EvalReport(
        success_rate=ok / trials if trials else float("nan"),
        gain_estimate=0.0,
        trials=trials,
        seed=seed,
        errors=errors,
        query_counts=counts,
    )


def _label(strategy, i: int) -> str:
    return getattr(strategy, "label", f"strategy{i}")


def evaluate_ic(
    algorithm: Mechanism,
    env: Environment,
    theta,
    strategies: Sequence[Strategy],
    trials: int,
    seed: int,
    taus: Sequence[float] = (0.0, 1e-3, 1e-2, 1e-1),
) -> EvalReport:
    """Estimate gains of each strategy over truthful play.

    Truthful and deviating executions use independent seeds. For each
    strategy the report holds the mean gain, its standard error, and the
    frontier ``[(tau, fraction of paired draws with u_truth < u_dev - tau)]``.
    """
    truthful = env.truthful(theta)
    base = []
    for k in range(trials):
        rng = np.random.default_rng(derive_seed(seed, k, 0))
        tr = algorithm(Oracle(truthful, rng), rng)
        base.append(payment_utility(theta, tr, env.utility))
    base = np.array(base)
    gains, ses, frontier = {}, {}, {}
    for i, strat in enumerate(strategies, start=1):
        dev = []
        for k in range(trials):
            rng = np.random.default_rng(derive_seed(seed, k, i))
            tr = algorithm(Oracle(strat, rng), rng)
            dev.append(payment_utility(theta, tr, env.utility))
        diff = np.array(dev) - base
        name = _label(strat, i)
        if name in gains:
            name = f"{name}#{i}"
        gains[name] = float(diff.mean())
        ses[name] = float(diff.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
        frontier[name] = [(float(t), float(np.mean(diff > t))) for t in taus]
    return EvalReport(
        success_rate=float("nan"),
        gain_estimate=max(gains.values()) if gains else 0.0,
        trials=trials,
        seed=seed,
        gains=gains,
        gain_se=ses,
        frontier=frontier,
    )
