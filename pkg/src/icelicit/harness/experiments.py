"""Seeded experiment orchestration.

Every trial ``k`` draws its generator from ``derive_seed(seed, k)``, so
adding trials never changes earlier rows. Rows are assembled in trial
order.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..audit import (
    FixedMisreport,
    NaiveStatewiseSearch,
    belief_ic_audit,
    best_response_eu,
    best_response_mpl,
    budgets_ratio_grid,
    belief_from_ratio,
    convex_budgets_demo,
    cover_ic_audit,
    effectiveness_mismatches,
    mpl_uniform_payment_counterexample,
    naive_query_bound,
    naive_statewise_search,
    scoring_lemma_gap,
)
from ..belief import BELIEF_ENV, BeliefAlgorithm, GroundTruth, belief_utility, run_belief_algorithm, theorem3_budget
from ..core import derive_seed, renorm_l2, sample_simplex, tv_distance
from ..cover_search import EUCLIDEAN, LINEAR, circle_cover, exhaustive_search, rect_cover, square_cover
from ..framework import Oracle, payment_utility
from ..mpl import (
    CRRAFamily,
    Discretization,
    Lottery,
    MPLMechanism,
    PaymentSchedule,
    back_out,
    best_response_strategy,
    default_schedule,
    estimate_constants,
    mpl_utility,
    realize_payment,
    report_function,
    threshold_strategy,
    validate_schedule,
)
from .config import ConfigError, ExperimentConfig
from .report import ReportRow


@dataclass
class Result:
    rows: list[ReportRow]
    details: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)  # name -> data for figures.py


def _timer(cfg: ExperimentConfig):
    t0 = time.perf_counter()
    return lambda: round(1000 * (time.perf_counter() - t0), 3) if cfg.record_timing else None


# -- MPL -----------------------------------------------------------------------


@dataclass
class MPLSetup:
    lottery: Lottery
    family: CRRAFamily
    disc: Discretization
    schedule: PaymentSchedule
    payment: str
    constants: object


def mpl_setup(cfg: ExperimentConfig) -> MPLSetup:
    L = Lottery(*cfg.lottery)
    fam = CRRAFamily(L)
    disc = Discretization.for_lottery(L, cfg.grid)
    consts = estimate_constants(fam, disc, members=32, grid=4000)
    payment = "last"
    if cfg.schedule == "default":
        sched = default_schedule(consts, disc)
    elif cfg.schedule == "uniform":
        sched, payment = PaymentSchedule.uniform_random_question(cfg.grid), "uniform"
    else:
        try:
            ratio = float(cfg.schedule.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"field 'schedule': bad ratio in {cfg.schedule!r}") from exc
        if not 0 < ratio <= 1:
            raise ConfigError("field 'schedule': geometric ratio must lie in (0, 1]")
        sched = PaymentSchedule.geometric(cfg.grid, ratio)
    return MPLSetup(L, fam, disc, sched, payment, consts)


def run_mpl(cfg: ExperimentConfig) -> Result:
    S = mpl_setup(cfg)
    search = "sequential" if cfg.mechanism == "mpl-seq" else "binary"
    mech = MPLMechanism(S.disc, S.schedule, search, S.payment)
    u = mpl_utility(S.family, S.lottery)
    lo, hi = S.disc[0], S.disc[S.disc.n]
    rows, reports = [], []
    for k in range(cfg.trials):
        tick = _timer(cfg)
        rng = np.random.default_rng(derive_seed(cfg.seed, k))
        ce = float(cfg.type[0]) if cfg.type else float(rng.uniform(lo + 1e-9 * (hi - lo), hi))
        if cfg.agent == "truthful":
            strat = threshold_strategy(ce)
        elif cfg.agent == "strategic":
            strat = best_response_strategy(ce, S.disc, S.schedule, S.family)
        else:
            strat = threshold_strategy(float(cfg.misreport[0]))
        tr = mech.run(Oracle(strat), rng)
        paid = realize_payment(tr.payment, S.lottery, rng)
        gain = None
        if cfg.agent != "truthful":
            honest = mech.run(Oracle(threshold_strategy(ce)), rng)
            gain = payment_utility(ce, tr, u) - payment_utility(ce, honest, u)
        reports.append(tr.info["report"])
        rows.append(ReportRow(k, cfg.seed, cfg.mechanism, S.disc.n, cfg.eps, len(tr),
                              abs(ce - tr.hypothesis), paid, gain, tick()))
    check = validate_schedule(S.schedule, S.constants, S.disc) if S.payment == "last" else None
    details = {
        "search": search,
        "payment": S.payment,
        "schedule_valid": bool(check) if check is not None else None,
        "K": S.constants.K,
        "half_width": S.disc.step,
        "reports": reports,
    }
    grid = S.disc.points[1:-1]
    figs = {"mpl_report": {
        "ce": grid.tolist(),
        "report": [report_function(float(x), S.disc, S.schedule, S.family) for x in grid] if S.payment == "last" else None,
        "truthful": [S.disc.cell_of(float(x)) for x in grid],
    }}
    return Result(rows, details, figs)


# -- cover search ------------------------------------------------------------------


def parse_cover(spec: str):
    kind, _, arg = spec.partition(":")
    try:
        if kind == "square":
            return square_cover(int(arg)), EUCLIDEAN
        if kind == "rect":
            kx, ky = (int(v) for v in arg.split("x"))
            return rect_cover(kx, ky), EUCLIDEAN
        if kind == "circle":
            return circle_cover(int(arg)), LINEAR
    except ValueError as exc:
        raise ConfigError(f"field 'cover': cannot parse {spec!r}") from exc
    raise ConfigError(f"field 'cover': unknown cover kind {kind!r}")


def _random_cover_type(a, rng) -> np.ndarray:
    if a.kind == "linear":
        t = rng.uniform(0, 2 * math.pi)
        return np.array([math.cos(t), math.sin(t)])
    return rng.uniform(0, 1, size=2)


def run_cover(cfg: ExperimentConfig) -> Result:
    cover, a = parse_cover(cfg.cover)
    if cfg.agent == "strategic":
        raise ConfigError("field 'agent': 'strategic' is only defined for MPL mechanisms")
    rows = []
    for k in range(cfg.trials):
        tick = _timer(cfg)
        rng = np.random.default_rng(derive_seed(cfg.seed, k))
        th = np.asarray(cfg.type, dtype=float) if cfg.type else _random_cover_type(a, rng)
        strat = a.environment.truthful(th if cfg.agent == "truthful" else np.asarray(cfg.misreport, dtype=float))
        champ, tr = exhaustive_search(Oracle(strat), cover, a)
        gain = None
        if cfg.agent != "truthful":
            _, honest = exhaustive_search(Oracle(a.environment.truthful(th)), cover, a)
            gain = payment_utility(th, tr, a.utility) - payment_utility(th, honest, a.utility)
        rows.append(ReportRow(k, cfg.seed, "cover", len(cover), cfg.eps, len(tr), a.metric(th, champ),
                              payment_utility(th, tr, a.utility), gain, tick()))
    return Result(rows, {"cover": cfg.cover, "size": len(cover), "radius": cover.radius, "assignment": a.kind})


# -- beliefs -----------------------------------------------------------------------


def belief_rounds(cfg: ExperimentConfig) -> int:
    return cfg.T if cfg.T is not None else theorem3_budget(cfg.n, cfg.eps, cfg.budget_c)


def run_beliefs(cfg: ExperimentConfig) -> Result:
    if cfg.agent == "strategic":
        raise ConfigError("field 'agent': 'strategic' is only defined for MPL mechanisms")
    gt = GroundTruth(tuple(cfg.ground_truth)) if cfg.ground_truth else GroundTruth.uniform(cfg.n)
    T = belief_rounds(cfg)
    naive = cfg.mechanism == "naive"
    rows, stops, rejections = [], {}, 0
    for k in range(cfg.trials):
        tick = _timer(cfg)
        s = derive_seed(cfg.seed, k)
        alpha = np.asarray(cfg.type, dtype=float) if cfg.type else sample_simplex(cfg.n, np.random.default_rng([s, 1]))
        agent = alpha if cfg.agent == "truthful" else np.asarray(cfg.misreport, dtype=float)

        def play(belief):
            rng = np.random.default_rng(s)
            orc = Oracle(BELIEF_ENV.truthful(belief), rng)
            if naive:
                beta, tr = naive_statewise_search(orc, cfg.n, cfg.eps)
                z = tr.payment[0][1]
                return beta, tr, float(z[gt.draw(rng) - 1])
            return run_belief_algorithm(orc, T, rng, gt, cfg.n)

        beta, tr, paid = play(agent)
        gain = None
        if cfg.agent != "truthful":
            _, honest, _ = play(alpha)
            gain = payment_utility(alpha, tr, belief_utility) - payment_utility(alpha, honest, belief_utility)
        if not naive:
            stops[tr.info["stop_reason"]] = stops.get(tr.info["stop_reason"], 0) + 1
            rejections += tr.info["rejections"]
        rows.append(ReportRow(k, cfg.seed, cfg.mechanism, cfg.n, cfg.eps, len(tr), tv_distance(alpha, beta),
                              paid, gain, tick()))
    details = {"rounds": T if not naive else None, "budget_c": cfg.budget_c}
    if naive:
        details["query_bound"] = naive_query_bound(cfg.n, cfg.eps)
    else:
        details["stop_reasons"] = dict(sorted(stops.items()))
        details["rejections"] = rejections
    return Result(rows, details, {"errors": {"errors": [r.error_tv for r in rows], "eps": cfg.eps}})


def run_experiment(cfg: ExperimentConfig) -> Result:
    cfg.validate()
    if cfg.mechanism.startswith("mpl"):
        return run_mpl(cfg)
    if cfg.mechanism == "cover":
        return run_cover(cfg)
    return run_beliefs(cfg)


def run_sweep(cfg: ExperimentConfig, n_values, eps_values) -> Result:
    """Repeat the configured experiment over a grid of ``n`` and ``eps``."""
    rows, table = [], []
    for n in n_values:
        for eps in eps_values:
            keep = cfg.type is not None and len(cfg.type) == n
            sub = dataclasses.replace(cfg, n=int(n), eps=float(eps), type=cfg.type if keep else None).validate()
            res = run_experiment(sub)
            base = len(rows)
            rows.extend(dataclasses.replace(r, run_id=base + r.run_id) for r in res.rows)
            errs = np.array([r.error_tv for r in res.rows])
            table.append({"n": int(n), "eps": float(eps), "success_rate": float(np.mean(errs <= eps)),
                          "mean_queries": float(np.mean([r.queries for r in res.rows]))})
    return Result(rows, {"sweep": table}, {"sweep": table})


# -- audits ----------------------------------------------------------------------------


def audit_mpl_counterexample(cfg: ExperimentConfig) -> Result:
    ce = mpl_uniform_payment_counterexample()
    rows = [
        ReportRow(0, cfg.seed, "mpl-bin", 7, cfg.eps, len(ce.truthful_questions), None, ce.truthful, 0.0),
        ReportRow(1, cfg.seed, "mpl-bin", 7, cfg.eps, len(ce.deviation_questions), None, ce.deviation, ce.gain),
    ]
    details = {
        "truthful": ce.truthful,
        "deviation": ce.deviation,
        "truthful_questions": [f"x{i}" for i in ce.truthful_questions],
        "deviation_questions": [f"x{i}" for i in ce.deviation_questions],
        "truthful_choices": list(ce.truthful_choices),
        "deviation_choices": list(ce.deviation_choices),
    }
    return Result(rows, details)


def audit_report_shift(cfg: ExperimentConfig) -> Result:
    """Best response at every interior grid point under last-question payment."""
    S = mpl_setup(cfg.replace(schedule="default" if cfg.schedule == "uniform" else cfg.schedule))
    rows, ok = [], 0
    for t in range(1, S.disc.n):
        r, gain = best_response_mpl(S.disc[t], S.disc, S.schedule, S.family)
        ok += r == t + 1
        rows.append(ReportRow(t, cfg.seed, "mpl-seq", S.disc.n, cfg.eps, r, None, None, gain))
    check = validate_schedule(S.schedule, S.constants, S.disc)
    return Result(rows, {"schedule_valid": bool(check), "matches": ok, "points": S.disc.n - 1})


def audit_backout(cfg: ExperimentConfig) -> Result:
    S = mpl_setup(cfg.replace(schedule="default" if cfg.schedule == "uniform" else cfg.schedule))
    rng = np.random.default_rng(derive_seed(cfg.seed, 0))
    lo, hi = S.disc[0], S.disc[S.disc.n]
    rows, inside = [], 0
    for k in range(cfg.trials):
        ce = float(rng.uniform(lo, hi))
        while not lo < ce < hi:
            ce = float(rng.uniform(lo, hi))
        r = report_function(ce, S.disc, S.schedule, S.family)
        a, b = back_out(r, S.disc)
        inside += a < ce < b
        rows.append(ReportRow(k, cfg.seed, "mpl-seq", S.disc.n, cfg.eps, r, abs(ce - 0.5 * (a + b)), None, None))
    return Result(rows, {"contained": inside, "trials": cfg.trials, "half_width": S.disc.step})


def audit_cover_ic(cfg: ExperimentConfig) -> Result:
    cover, a = parse_cover(cfg.cover)
    rows, violations = [], 0
    for k in range(cfg.trials):
        rng = np.random.default_rng(derive_seed(cfg.seed, k))
        th = np.asarray(cfg.type, dtype=float) if cfg.type else _random_cover_type(a, rng)
        res = cover_ic_audit(cover, a, th)
        violations += res.violations
        rows.append(ReportRow(k, cfg.seed, "cover", len(cover), cfg.eps, len(cover) - 1, res.truthful_error,
                              res.truthful_utility, res.best_deviation - res.truthful_utility))
    return Result(rows, {"violations": violations, "sequences_per_type": 2 ** (len(cover) - 1)})


def audit_belief_ic(cfg: ExperimentConfig, spacing: float = 0.05) -> Result:
    alpha = np.asarray(cfg.type if cfg.type else [0.3, 0.7], dtype=float)
    T = cfg.T if cfg.T is not None else 10
    au = belief_ic_audit(alpha, BeliefAlgorithm(alpha.size, T), spacing, cfg.trials, cfg.seed)
    rows = []
    for i, (label, gain) in enumerate(au.report.gains.items()):
        beta = FixedMisreport.simplex(alpha.size, spacing).types[i]
        rows.append(ReportRow(i, cfg.seed, "belief", alpha.size, cfg.eps, T, renorm_l2(alpha, beta), None, gain))
    details = {
        "max_gain": au.max_gain, "max_gain_se": au.max_gain_se, "argmax": au.argmax, "lambda_hat": au.lam,
        "bound": au.bound, "far_checked": au.far_checked, "far_violations": au.far_violations, "passed": au.passed,
        "T": T,
    }
    figs = {"gains": {"labels": list(au.report.gains), "gains": list(au.report.gains.values()),
                      "se": [au.report.ses[k] for k in au.report.gains], "bound": au.bound}}
    return Result(rows, details, figs)


def audit_scoring(cfg: ExperimentConfig, pairs: int = 10_000) -> Result:
    rng = np.random.default_rng(derive_seed(cfg.seed, 0))
    A = sample_simplex(cfg.n, rng, size=pairs)
    B = sample_simplex(cfg.n, rng, size=pairs)
    worst = max(scoring_lemma_gap(a, b) for a, b in zip(A, B))
    bad, cmp = 0, 0
    for k in range(0, pairs, 100):
        m, c = effectiveness_mismatches(A[k], B[k:k + 100])
        bad += m
        cmp += c
    rows = [ReportRow(0, cfg.seed, "scoring", cfg.n, cfg.eps, pairs, None, None, worst)]
    return Result(rows, {"pairs": pairs, "max_gap": worst, "effectiveness_mismatches": bad, "compared": cmp})


def audit_naive(cfg: ExperimentConfig) -> Result:
    n, eps = cfg.n, cfg.eps
    alpha = np.asarray(cfg.type, dtype=float) if cfg.type else np.full(n, 1.0 / n)
    beta, tr = naive_statewise_search(Oracle(BELIEF_ENV.truthful(alpha)), n, eps)
    spacing = 0.05 if n <= 3 else 0.1
    br = best_response_eu(alpha, NaiveStatewiseSearch(n, eps), FixedMisreport.simplex(n, spacing), cfg.trials, cfg.seed)
    rows = [ReportRow(0, cfg.seed, "naive", n, eps, len(tr), tv_distance(alpha, beta), None, br.max_gain)]
    details = {"queries": len(tr), "query_bound": naive_query_bound(n, eps), "error_tv": tv_distance(alpha, beta),
               "max_gain": br.max_gain, "max_gain_se": br.ses[br.argmax], "argmax": br.argmax}
    return Result(rows, details)


def budgets_demo(cfg: ExperimentConfig, alpha) -> Result:
    out = convex_budgets_demo(alpha)
    ratios = budgets_ratio_grid()
    rows, gains = [], []
    for k, r in enumerate(ratios):
        g = convex_budgets_demo(belief_from_ratio(float(r))).gain
        gains.append(g)
        rows.append(ReportRow(k, cfg.seed, "budgets", 2, cfg.eps, 2, None, None, g))
    details = {"alpha": list(map(float, alpha)), "truthful": out.truthful, "manipulation": out.manipulation,
               "gain": out.gain, "ratios": ratios.tolist()}
    return Result(rows, details, {"budgets": {"ratios": ratios.tolist(), "gains": gains}})


AUDITS = {
    "mpl-counterexample": audit_mpl_counterexample,
    "report-shift": audit_report_shift,
    "backout": audit_backout,
    "cover-ic": audit_cover_ic,
    "belief-ic": audit_belief_ic,
    "scoring": audit_scoring,
    "naive": audit_naive,
}
