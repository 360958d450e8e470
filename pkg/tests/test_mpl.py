import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from icelicit.framework import Oracle
from icelicit.mpl import (
    LOTTERY,
    BracketError,
    CRRAFamily,
    Discretization,
    Lottery,
    MPLMechanism,
    PaymentSchedule,
    TabulatedFamily,
    back_out,
    binary_search,
    certainty_equivalent,
    default_schedule,
    estimate_constants,
    index_threshold_strategy,
    mpl_payoff,
    mpl_utility,
    realize_payment,
    report_function,
    report_gains,
    sequential_search,
    threshold_strategy,
    validate_schedule,
)

FAIR01 = Lottery(0.0, 1.0)
DESK = Lottery(0.05, 0.95)


@pytest.fixture(scope="module")
def desk():
    fam = CRRAFamily(DESK)
    disc = Discretization.for_lottery(DESK, 20)
    consts = estimate_constants(fam, disc)
    return fam, disc, consts, default_schedule(consts, disc)


class TestCertaintyEquivalent:
    @pytest.mark.parametrize("sigma,ce", [(0.5, 0.25), (1.0, 0.5), (1 / 3, 0.125)])
    def test_power_utility(self, sigma, ce):
        x = certainty_equivalent(lambda x: x**sigma, FAIR01)
        assert abs(x - ce) <= 1e-9

    def test_residual(self):
        u = lambda x: math.log1p(3 * x)
        x = certainty_equivalent(u, FAIR01)
        assert abs(u(x) - FAIR01.expected_utility(u)) <= 1e-9

    def test_non_monotone(self):
        with pytest.raises(BracketError):
            certainty_equivalent(lambda x: -x, FAIR01)

    @pytest.mark.parametrize("sigma", [-8.0, -1.0, -0.3, 0.0, 0.3, 0.7, 1.0, 2.5, 14.0])
    def test_closed_form_matches_bisection(self, sigma):
        fam = CRRAFamily(DESK)
        ce = fam.ce_of_sigma(sigma)
        ref = certainty_equivalent(lambda x: fam.utility(sigma, x), DESK, tol=1e-13)
        assert_allclose(ce, ref, atol=1e-10)
        assert_allclose(fam.sigma_of_ce(ce), sigma, atol=1e-8)

    def test_crra_normalized_and_increasing(self):
        fam = CRRAFamily(DESK)
        for ce in (0.06, 0.3, 0.5, 0.9):
            u = fam.curve(ce)
            assert_allclose([u(0.05), u(0.95)], [0, 1], atol=1e-12)
            xs = np.linspace(0.05, 0.95, 200)
            assert np.all(np.diff(u(xs)) > 0)

    def test_crra_needs_positive_low(self):
        with pytest.raises(ValueError):
            CRRAFamily(FAIR01)

    def test_sigma_range_restriction(self):
        fam = CRRAFamily(DESK, sigma_range=(0.0, 1.0))
        lo, hi = fam.ce_range()
        assert lo < 0.49 and hi == pytest.approx(0.5)
        with pytest.raises(ValueError):
            fam.sigma_of_ce(0.9)


class TestPayoff:
    def test_examples(self):
        disc = Discretization(0.0, 1.0, 2)
        ident = lambda x: x
        half = PaymentSchedule((1.0, 0.5))
        assert_allclose(mpl_payoff(0.25, 1, disc, half, ident), 0.5)
        assert_allclose(mpl_payoff(0.25, 2, disc, PaymentSchedule((1.0, 1.0)), ident), 1.0)
        assert_allclose(mpl_payoff(0.25, 2, disc, PaymentSchedule((1.0, 1e-300)), ident), 0.25)
        d4 = Discretization(0.0, 1.0, 4)
        assert_allclose(mpl_payoff(0.25, 2, d4, PaymentSchedule((1.0, 0.5, 0.25, 0.1)), ident), 0.375)

    def test_index_range(self):
        disc = Discretization(0.0, 1.0, 2)
        with pytest.raises(IndexError):
            mpl_payoff(0.5, 3, disc, PaymentSchedule((1.0, 0.5)), lambda x: x)

    def test_gains_match_payoff(self, desk):
        fam, disc, _, sched = desk
        for x in (0.11, 0.5, 0.83):
            u = fam.curve(x)
            direct = [mpl_payoff(x, t, disc, sched, u) - u(x) for t in range(1, disc.n + 1)]
            assert_allclose(report_gains(x, disc, sched, fam), direct, atol=1e-15)


class TestSchedules:
    def test_geometric_and_uniform(self):
        assert PaymentSchedule.geometric(3, 0.5).p == (1.0, 0.5, 0.25)
        assert_allclose(PaymentSchedule.uniform_random_question(4).as_array(), [1, 1 / 2, 1 / 3, 1 / 4])

    def test_rejects_bad_probabilities(self):
        with pytest.raises(ValueError):
            PaymentSchedule((1.0, 0.0))
        with pytest.raises(ValueError):
            PaymentSchedule(())

    def test_validation(self, desk):
        fam, disc, consts, sched = desk
        chk = validate_schedule(sched, consts, disc)
        assert chk.passed and chk.min_ratio_slack > 0
        # anything below the bound passes
        assert validate_schedule(PaymentSchedule.geometric(disc.n, 0.5 * chk.bound), consts, disc)
        uni = validate_schedule(PaymentSchedule.uniform_random_question(disc.n), consts, disc)
        assert uni.decreasing and not uni.ratio_ok and not uni.passed
        const = validate_schedule(PaymentSchedule.constant(disc.n, 0.5), consts, disc)
        assert not const.decreasing and not const.passed

    def test_uniform_fails_exactly_when_ratio_exceeds_bound(self, desk):
        _, disc, consts, _ = desk
        bound = consts.K * disc.step / (2 * consts.M)
        for n in (2, 5, 20):
            d = Discretization(DESK.low, DESK.high, n)
            b = consts.K * d.step / (2 * consts.M)
            expect = any(t / (t + 1) >= b for t in range(1, n))
            got = not validate_schedule(PaymentSchedule.uniform_random_question(n), consts, d).ratio_ok
            assert got == expect
        assert bound < 0.5

    def test_constants(self, desk):
        fam, disc, consts, sched = desk
        assert consts.M == pytest.approx(1.0, abs=1e-12)
        assert consts.K > 0.5 and consts.K_global < consts.K
        assert consts.C1 > 0 and consts.C2 > 0
        # upward chord slopes are at least min(p, 1 - p) / (high - low) for any
        # increasing curve normalized to [0, 1]; the grid estimate sits just above
        k_inf = 0.5 / (DESK.high - DESK.low)
        assert k_inf <= consts.K < 1.02 * k_inf
        rng = np.random.default_rng(0)
        for ce in rng.uniform(0.051, 0.949, 30):
            u = fam.curve(ce)
            xs = np.linspace(ce + 1e-3, 0.95, 50)
            assert np.all(u(xs) - u(ce) >= k_inf * (xs - ce) * (1 - 1e-9))
        # the safety factor keeps the default schedule valid at the true infimum
        assert sched.p[1] < k_inf * disc.step / (2 * consts.M)

    def test_invalid_constants(self, desk):
        _, disc, consts, sched = desk
        from dataclasses import replace

        with pytest.raises(ValueError):
            validate_schedule(sched, replace(consts, K=0.0), disc)


class TestReportFunction:
    def test_report_shifts_one_step(self, desk):
        fam, disc, _, sched = desk
        assert [report_function(disc[t], disc, sched, fam) for t in range(1, disc.n)] == list(range(2, disc.n + 1))

    def test_single_point(self):
        disc = Discretization(0.05, 0.95, 1)
        assert report_function(0.3, disc, PaymentSchedule((1.0,)), CRRAFamily(DESK)) == 1

    def test_brute_force_argmax(self, desk):
        fam, disc, _, _ = desk
        sched = PaymentSchedule.geometric(disc.n, 0.3)
        for x in np.linspace(0.07, 0.93, 23):
            u = fam.curve(float(x))
            pay = [mpl_payoff(float(x), t, disc, sched, u) for t in range(1, disc.n + 1)]
            assert report_function(float(x), disc, sched, fam) == int(np.argmax(pay)) + 1

    def test_tiny_ratio_reports_first_cell_above(self, desk):
        fam, disc, _, _ = desk
        sched = PaymentSchedule.geometric(disc.n, 1e-3)
        for x in np.linspace(0.07, 0.93, 23):
            if np.min(np.abs(disc.points - x)) < 1e-9:
                continue
            assert report_function(float(x), disc, sched, fam) == disc.cell_of(float(x))

    def test_over_reporting(self, desk):
        fam, disc, _, sched = desk
        for s in (sched, PaymentSchedule.geometric(disc.n, 0.3), PaymentSchedule.uniform_random_question(disc.n)):
            for x in np.linspace(0.051, 0.949, 61):
                assert report_function(float(x), disc, s, fam) >= disc.cell_of(float(x))

    def test_backout_containment(self, desk):
        fam, disc, _, sched = desk
        rng = np.random.default_rng(17)
        for x in rng.uniform(0.05, 0.95, 200):
            lo, hi = back_out(report_function(float(x), disc, sched, fam), disc)
            assert lo < x < hi
            assert abs(0.5 * (lo + hi) - x) <= disc.step

    def test_injective_on_interior(self, desk):
        fam, disc, _, sched = desk
        r = [report_function(disc[t], disc, sched, fam) for t in range(1, disc.n)]
        assert len(set(r)) == len(r)


class TestBackOut:
    def test_examples(self):
        d = Discretization(0.0, 1.0, 10)
        assert_allclose(back_out(4, d), (d[2], d[4]))
        assert_allclose(back_out(1, d), (d[0], d[1]))
        lo, hi = back_out(7, d)
        assert_allclose(hi - lo, 2 * d.step)

    def test_range(self):
        with pytest.raises(IndexError):
            back_out(11, Discretization(0.0, 1.0, 10))


class TestSearch:
    def test_sequential_examples(self):
        d = Discretization(0.0, 1.0, 10)
        res = sequential_search(Oracle(threshold_strategy(0.25)), d)
        assert res.report == 3
        assert_allclose(res.interval, (0.2, 0.3))
        assert sequential_search(Oracle(threshold_strategy(0.05)), d).report == 1
        never = sequential_search(Oracle(lambda h, q: 0.0), d)
        assert never.report == 10 and never.questions == 10

    def test_strategic_sequential(self, desk):
        fam, disc, _, sched = desk
        from icelicit.mpl import best_response_strategy

        for t in range(1, disc.n):
            res = sequential_search(Oracle(best_response_strategy(disc[t], disc, sched, fam)), disc)
            assert res.report == t + 1

    def test_binary_reference_sequences(self):
        d = Discretization(0.0, 7 / 8, 7)
        tr = binary_search(Oracle(threshold_strategy(d[3])), d).transcript
        assert [round(q.left * 8) for q in tr.queries] == [4, 2, 3]
        assert tr.answers == [1, 0, 1]
        assert all(q.right is LOTTERY for q in tr.queries)
        tr = binary_search(Oracle(index_threshold_strategy(5, d)), d).transcript
        assert [round(q.left * 8) for q in tr.queries] == [4, 6, 5]
        assert tr.answers == [0, 1, 1]

    def test_binary_single(self):
        d = Discretization(0.0, 1.0, 1)
        res = binary_search(Oracle(threshold_strategy(0.4)), d)
        assert res.questions == 1 and res.report == 1

    @settings(max_examples=150, deadline=None)
    @given(st.integers(1, 64), st.floats(0.0, 1.0))
    def test_binary_matches_sequential(self, n, ce):
        d = Discretization(0.0, 1.0, n)
        b = binary_search(Oracle(threshold_strategy(ce)), d)
        s = sequential_search(Oracle(threshold_strategy(ce)), d)
        assert b.report == s.report
        assert b.questions <= math.ceil(math.log2(n)) + 1
        assert b.transcript.final_query.left == d[b.report]


class TestMechanism:
    def test_payment_lottery(self, desk):
        fam, disc, _, sched = desk
        mech = MPLMechanism(disc, sched)
        tr = mech.run(Oracle(threshold_strategy(0.5)))
        assert_allclose(sum(p for p, _ in tr.payment), 1.0)
        assert tr.info["report"] == disc.cell_of(0.5)
        assert tr.payment[0] == (sched.prob(tr.info["report"]), disc[tr.info["report"]])

    def test_uniform_payment(self):
        d = Discretization(0.0, 1.0, 8)
        tr = MPLMechanism(d, search="binary", payment="uniform").run(Oracle(threshold_strategy(0.3)))
        assert len(tr.payment) == len(tr)
        assert_allclose(sum(p for p, _ in tr.payment), 1.0)

    def test_bad_config(self):
        d = Discretization(0.0, 1.0, 8)
        with pytest.raises(ValueError):
            MPLMechanism(d, search="ternary", payment="uniform")
        with pytest.raises(ValueError):
            MPLMechanism(d)

    def test_realized_payment_mean(self):
        rng = np.random.default_rng(4)
        pay = [(0.25, 0.6), (0.75, LOTTERY)]
        draws = [realize_payment(pay, DESK, rng) for _ in range(20_000)]
        expect = 0.25 * 0.6 + 0.75 * 0.5
        assert abs(np.mean(draws) - expect) < 4 * np.std(draws) / math.sqrt(len(draws))

    def test_mpl_utility(self):
        fam = CRRAFamily(DESK)
        u = mpl_utility(fam, DESK)
        # the lottery is worth exactly the certainty equivalent
        assert_allclose(u(0.3, LOTTERY), u(0.3, 0.3), atol=1e-9)


class TestTabulated:
    def test_lookup(self):
        curves = [lambda x: x, lambda x: np.sqrt(x)]
        fam = TabulatedFamily(FAIR01, curves)
        assert_allclose(fam.ces, [0.25, 0.5], atol=1e-9)
        assert fam.curve(0.25)(0.36) == pytest.approx(0.6)
        with pytest.raises(KeyError):
            fam.curve(0.4)
