import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from icelicit.audit import (
    AnswerSequences,
    EnumerationGuard,
    FixedMisreport,
    NaiveStatewiseSearch,
    belief_from_ratio,
    belief_ic_audit,
    best_response_eu,
    budgets_ratio_grid,
    convex_budgets_demo,
    cover_ic_audit,
    effectiveness_mismatches,
    mpl_uniform_payment_counterexample,
    naive_query_bound,
    naive_statewise_search,
    scoring_lemma_gap,
)
from icelicit.belief import BELIEF_ENV, BeliefAlgorithm
from icelicit.core import sample_simplex, tv_distance
from icelicit.cover_search import EUCLIDEAN, LINEAR, circle_cover, square_cover
from icelicit.framework import Oracle


class TestConvexBudgets:
    def test_reference_values(self):
        out = convex_budgets_demo(np.array([0.3, 0.7]))
        assert_allclose(out.truthful, 0.6125, atol=1e-12)
        assert_allclose(out.manipulation, 0.675, atol=1e-12)

    def test_gain_band(self):
        grid = budgets_ratio_grid()
        assert grid.size == 99
        gains = np.array([convex_budgets_demo(belief_from_ratio(r)).gain for r in grid])
        inside = (grid > 0.25 + 1e-12) & (grid < 0.5 - 1e-12)
        assert np.all(gains[inside] > 0)
        assert np.all(np.abs(gains[~inside]) <= 1e-12) or np.all(gains[~inside] <= 1e-12)
        k = np.flatnonzero(np.isclose(grid, 0.25))[0]
        assert abs(gains[k]) <= 1e-12

    def test_ratio_round_trip(self):
        b = np.asarray(belief_from_ratio(0.4))
        assert_allclose(b[0] / b[1], 0.4)

    def test_needs_two_states(self):
        with pytest.raises(ValueError):
            convex_budgets_demo(np.array([0.2, 0.3, 0.5]))


class TestMPLCounterexample:
    def test_values_and_sequences(self):
        ce = mpl_uniform_payment_counterexample()
        assert_allclose(ce.truthful, 0.5, atol=1e-15)
        assert_allclose(ce.deviation, 0.625, atol=1e-15)
        assert ce.truthful_questions == (4, 2, 3)
        assert ce.deviation_questions == (4, 6, 5)
        assert ce.truthful_choices == ("x4", "L", "x3")
        assert ce.deviation_choices == ("L", "x6", "x5")
        assert ce.gain > 0


class TestStrategyGrids:
    def test_fixed_misreport_grid(self):
        g = FixedMisreport.simplex(2, 0.05)
        assert len(g.types) == 21
        assert len(FixedMisreport.simplex(3, 0.1).types) == 66
        labels = [s.label for s in g.strategies()]
        assert labels[0].startswith("misreport=(")
        with pytest.raises(ValueError):
            FixedMisreport.simplex(2, 0.3)

    def test_sequence_guard(self):
        assert len(AnswerSequences(3).strategies()) == 8
        with pytest.raises(EnumerationGuard):
            AnswerSequences(15)


class TestBestResponse:
    def test_truthful_misreport_has_zero_gain(self):
        alpha = np.array([0.3, 0.7])
        br = best_response_eu(alpha, BeliefAlgorithm(2, 4), FixedMisreport((tuple(alpha),)), trials=10, seed=0)
        assert list(br.gains.values()) == [0.0]
        assert list(br.ses.values()) == [0.0]

    def test_paired_and_deterministic(self):
        alpha = np.array([0.3, 0.7])
        grid = FixedMisreport(((0.5, 0.5), (0.9, 0.1)))
        a = best_response_eu(alpha, BeliefAlgorithm(2, 5), grid, trials=20, seed=4)
        b = best_response_eu(alpha, BeliefAlgorithm(2, 5), grid, trials=20, seed=4)
        assert a.gains == b.gains and a.ses == b.ses
        assert a.gains["misreport=(0.9,0.1)"] < 0


class TestNaive:
    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 5), eps=st.sampled_from([0.02, 0.05, 0.1]), seed=st.integers(0, 10_000))
    def test_accuracy_and_query_bound(self, n, eps, seed):
        alpha = sample_simplex(n, np.random.default_rng(seed))
        beta, tr = naive_statewise_search(Oracle(BELIEF_ENV.truthful(alpha)), n, eps)
        assert tv_distance(alpha, beta) <= eps
        assert len(tr) <= naive_query_bound(n, eps)

    def test_manipulable(self):
        n, eps = 3, 0.05
        alpha = np.full(n, 1 / n)
        br = best_response_eu(alpha, NaiveStatewiseSearch(n, eps), FixedMisreport.simplex(n, 0.05), trials=5, seed=0)
        assert br.max_gain > 3 * br.ses[br.argmax]
        assert br.max_gain > 0


class TestCoverAudit:
    def test_euclidean(self):
        cover = square_cover(3)
        for th in np.random.default_rng(0).uniform(0, 1, size=(3, 2)):
            au = cover_ic_audit(cover, EUCLIDEAN, th)
            assert au.violations == 0
            assert au.sequences == 2**8
            assert au.best_deviation <= au.truthful_utility
            assert au.truthful_error <= cover.radius

    def test_linear(self):
        cover = circle_cover(10)
        t = 1.234
        au = cover_ic_audit(cover, LINEAR, np.array([math.cos(t), math.sin(t)]))
        assert au.violations == 0
        assert au.truthful_error <= cover.radius + 1e-12


class TestBeliefICAudit:
    def test_small_instance_passes(self):
        au = belief_ic_audit(np.array([0.3, 0.7]), BeliefAlgorithm(2, 10), 0.1, trials=50, seed=1)
        assert au.lam > 0
        assert_allclose(au.bound, 0.5 * au.lam**2)
        assert au.far_checked > 0
        assert au.far_violations == 0
        assert au.passed


class TestScoring:
    def test_lemma_gap_never_positive(self):
        rng = np.random.default_rng(0)
        A = sample_simplex(4, rng, size=2000)
        B = sample_simplex(4, rng, size=2000)
        assert max(scoring_lemma_gap(a, b) for a, b in zip(A, B)) <= 1e-12

    def test_effectiveness(self):
        rng = np.random.default_rng(1)
        alpha = sample_simplex(3, rng)
        bad, cmp = effectiveness_mismatches(alpha, sample_simplex(3, rng, size=200))
        assert bad == 0
        assert cmp > 19_000
