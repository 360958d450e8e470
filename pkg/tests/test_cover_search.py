import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from icelicit.cover_search import (
    EUCLIDEAN,
    LINEAR,
    TypeCover,
    assignment_euclidean,
    assignment_linear,
    circle_cover,
    effectiveness_violations,
    exhaustive_search,
    rect_cover,
    square_cover,
)
from icelicit.framework import Oracle, payment_utility, scripted_strategy


class TestAssignments:
    def test_examples(self):
        assert_allclose(assignment_linear([1, 0]), [1, 0])
        assert_allclose(assignment_linear([0.6, 0.8]), [0.6, 0.8])
        assert_allclose(assignment_euclidean([1, 2]), [1, 2])

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            assignment_linear([0, 0])

    @pytest.mark.parametrize("cover,a", [(square_cover(4), EUCLIDEAN), (circle_cover(12), LINEAR),
                                         (rect_cover(3, 4), EUCLIDEAN)])
    def test_effective_and_injective(self, cover, a):
        assert effectiveness_violations(cover, a) == 0
        outs = [a(p) for p in cover.points]
        for x, y in itertools.combinations(outs, 2):
            assert np.linalg.norm(x - y) > 1e-12


class TestCovers:
    @pytest.mark.parametrize("k", [1, 3, 10])
    def test_square_radius(self, k):
        cover = square_cover(k)
        probes = np.random.default_rng(k).uniform(0, 1, size=(10_000, 2))
        assert cover.covering_radius(probes, EUCLIDEAN.metric) <= cover.radius + 1e-12

    @pytest.mark.parametrize("k", [3, 8, 12])
    def test_circle_radius(self, k):
        cover = circle_cover(k)
        t = np.random.default_rng(k).uniform(0, 2 * math.pi, 10_000)
        probes = np.column_stack([np.cos(t), np.sin(t)])
        assert cover.covering_radius(probes, LINEAR.metric) <= cover.radius + 1e-12


class TestExhaustiveSearch:
    def test_euclidean_within_eps(self):
        cover = rect_cover(8, 8)
        assert cover.radius <= 0.1
        rng = np.random.default_rng(0)
        for th in rng.uniform(0, 1, size=(50, 2)):
            champ, tr = exhaustive_search(Oracle(EUCLIDEAN.environment.truthful(th)), cover, EUCLIDEAN)
            assert np.linalg.norm(champ - th) <= 0.1
            assert len(tr) == len(cover) - 1

    def test_linear_argmax_dot(self):
        cover = circle_cover(9, phase=0.1)
        rng = np.random.default_rng(1)
        for t in rng.uniform(0, 2 * math.pi, 40):
            th = np.array([math.cos(t), math.sin(t)])
            champ, _ = exhaustive_search(Oracle(LINEAR.environment.truthful(th)), cover, LINEAR)
            best = max(cover.points, key=lambda p: float(th @ p))
            assert_allclose(champ, best)

    def test_single_point(self):
        cover = TypeCover((np.array([0.5, 0.5]),), 1.0, "euclidean")
        champ, tr = exhaustive_search(Oracle(scripted_strategy([])), cover, EUCLIDEAN)
        assert len(tr) == 0
        assert_allclose(champ, [0.5, 0.5])
        assert_allclose(tr.payment[0][1], [0.5, 0.5])

    def test_empty(self):
        with pytest.raises(ValueError):
            exhaustive_search(Oracle(scripted_strategy([])), TypeCover((), 0.0, "euclidean"), EUCLIDEAN)

    def test_tie_keeps_incumbent(self):
        pts = (np.array([0.0, 0.0]), np.array([1.0, 0.0]))
        cover = TypeCover(pts, 0.5, "euclidean")
        champ, tr = exhaustive_search(Oracle(EUCLIDEAN.environment.truthful(np.array([0.5, 0.0]))), cover, EUCLIDEAN)
        assert tr.info["champion"] == 0

    def test_order_invariance(self):
        cover = square_cover(3)
        th = np.array([0.4, 0.9])
        rng = np.random.default_rng(2)
        u0 = None
        for _ in range(10):
            perm = TypeCover(tuple(cover.points[i] for i in rng.permutation(len(cover))), cover.radius, "euclidean")
            _, tr = exhaustive_search(Oracle(EUCLIDEAN.environment.truthful(th)), perm, EUCLIDEAN)
            u = payment_utility(th, tr, EUCLIDEAN.utility)
            u0 = u if u0 is None else u0
            assert u == u0

    def test_strong_ic_small(self):
        cover = circle_cover(6)
        th = np.array([math.cos(0.3), math.sin(0.3)])
        _, tr = exhaustive_search(Oracle(LINEAR.environment.truthful(th)), cover, LINEAR)
        u0 = payment_utility(th, tr, LINEAR.utility)
        for bits in itertools.product((0, 1), repeat=5):
            _, dev = exhaustive_search(Oracle(scripted_strategy(bits)), cover, LINEAR)
            assert payment_utility(th, dev, LINEAR.utility) <= u0
