from __future__ import annotations

import numpy as np
import pytest

from persuasion.beliefs import Oracle, PiecewiseLinearMax, PriceFunction, Prior, Signal
from persuasion.concavify import (AdaptiveRefiner, CandidateSet, check_supergradient, concave_closure, concavify_grid,
                                  mesh_size, reduce_support, separation_oracle, simplex_mesh, solve_dual_cutting_plane)
from persuasion.errors import IterationLimit, SizeLimitExceeded

from conftest import EXAMPLE3_COORDS, random_objective, random_prior


def threshold_objective(cut=0.5):
    """Binary state; the sender gets 1 when the receiver acts, which it does once P(state 2) >= cut."""
    return Oracle(lambda M: (M[:, 1] >= cut - 1e-12).astype(float), vectorized=True)


def two_point_closure(V, t0, grid):
    """Brute-force concave closure of a function of t = P(state 2) at t0."""
    best = V(t0)
    for a in grid[grid <= t0]:
        for b in grid[grid >= t0]:
            if b - a < 1e-12:
                continue
            lam = (t0 - a) / (b - a)
            best = max(best, (1 - lam) * V(a) + lam * V(b))
    return best


class TestSimplexMesh:
    def test_binary_resolution_two(self):
        B = simplex_mesh(2, 2).beliefs
        assert sorted(map(tuple, B)) == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]

    def test_vertices_only(self):
        assert np.array_equal(np.sort(simplex_mesh(3, 1).beliefs, axis=0), np.sort(np.eye(3), axis=0))

    def test_counts(self):
        assert len(simplex_mesh(2, 4)) == 5
        assert len(simplex_mesh(4, 3)) == mesh_size(4, 3) == 20

    def test_size_cap(self):
        with pytest.raises(SizeLimitExceeded):
            simplex_mesh(30, 10)

    def test_candidate_set_requires_vertices(self):
        with pytest.raises(ValueError):
            CandidateSet(np.array([[0.5, 0.5], [1.0, 0.0]]))
        assert len(CandidateSet.user_grid([[0.5, 0.5]])) == 3


class TestConcavifyGrid:
    def test_convex_objective_gives_full_disclosure(self):
        obj = PiecewiseLinearMax(np.eye(2))
        res = concavify_grid([0.3, 0.7], obj, simplex_mesh(2, 10))
        assert res.value == pytest.approx(1.0)
        assert sorted(map(tuple, res.signal.posteriors)) == [(0.0, 1.0), (1.0, 0.0)]

    def test_affine_objective_value_is_disclosure_invariant(self):
        obj = PiecewiseLinearMax([[2.0, -1.0, 0.5]], [0.25])
        prior = [0.2, 0.5, 0.3]
        res = concavify_grid(prior, obj, simplex_mesh(3, 4))
        assert res.value == pytest.approx(obj(prior))
        assert res.gap == pytest.approx(0.0, abs=1e-9)

    def test_six_state_product_instance(self, example3):
        prior, obj = example3
        pooled = np.zeros((3, 6))
        for i, (a, b) in enumerate([(0, 1), (2, 3), (4, 5)]):
            pooled[i, [a, b]] = 0.5
        res = concavify_grid(prior, obj, CandidateSet.user_grid(pooled))
        assert res.value == pytest.approx(101 / 300, abs=1e-12)
        means = np.sort(res.signal.posteriors @ EXAMPLE3_COORDS, axis=0)
        assert means == pytest.approx(np.array([[0.2, 0.2], [0.5, 0.5], [0.9, 0.8]]))

    @pytest.mark.parametrize("k", [2, 4])
    def test_six_state_instance_on_meshes(self, example3, k):
        prior, obj = example3
        res = concavify_grid(prior, obj, simplex_mesh(6, k))
        assert res.value == pytest.approx(101 / 300, abs=1e-9)
        assert res.signal.n_atoms == 3
        assert abs(res.gap) <= 1e-9

    def test_threshold_objective(self):
        res = concavify_grid([0.7, 0.3], threshold_objective(), simplex_mesh(2, 20))
        assert res.value == pytest.approx(0.6)
        assert res.price.prices == pytest.approx([0.0, 2.0])

    def test_signal_has_at_most_n_atoms(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 5))
            res = concavify_grid(random_prior(rng, n), random_objective(rng, n), simplex_mesh(n, 4))
            assert res.signal.n_atoms <= n

    def test_warns_without_full_support(self):
        with pytest.warns(UserWarning):
            concavify_grid([1.0, 0.0], threshold_objective(), simplex_mesh(2, 2))

    def test_parallel_evaluation_is_identical(self, example3):
        prior, obj = example3
        slow = Oracle(lambda mu: float(obj(mu)))
        a = concavify_grid(prior, slow, simplex_mesh(6, 2), jobs=3)
        b = concavify_grid(prior, slow, simplex_mesh(6, 2))
        assert a.value == b.value and np.array_equal(a.price.prices, b.price.prices)


class TestClosureProperties:
    def test_vertex_pinning(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 5))
            obj = random_objective(rng, n)
            cands = simplex_mesh(n, 4)
            for i in range(n):
                assert concave_closure(np.eye(n)[i], obj, cands) == pytest.approx(obj(np.eye(n)[i]), abs=1e-9)

    def test_concavity_along_segments(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 5))
            obj = random_objective(rng, n)
            cands = simplex_mesh(n, 4)
            m1, m2 = rng.dirichlet(np.ones(n), size=2)
            lam = rng.random()
            mid = concave_closure(lam * m1 + (1 - lam) * m2, obj, cands)
            ends = lam * concave_closure(m1, obj, cands) + (1 - lam) * concave_closure(m2, obj, cands)
            assert mid >= ends - 1e-6

    def test_refining_never_lowers_the_value(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 4))
            prior, obj = random_prior(rng, n), random_objective(rng, n)
            v2 = concavify_grid(prior, obj, simplex_mesh(n, 2)).value
            v4 = concavify_grid(prior, obj, simplex_mesh(n, 4)).value
            assert v4 >= v2 - 1e-9

    def test_binary_closure_matches_two_point_search(self):
        V = lambda t: max(0.2 - t, 2 * t - 0.8, 0.1 + 0.4 * (t > 0.35))
        obj = Oracle(lambda mu: V(mu[1]))
        grid = np.linspace(0, 1, 41)
        cands = CandidateSet.user_grid(np.column_stack([1 - grid, grid]))
        for t0 in (0.1, 0.3, 0.5, 0.8):
            assert concave_closure([1 - t0, t0], obj, cands) == pytest.approx(two_point_closure(V, t0, grid), abs=1e-12)


class TestSeparationOracle:
    def test_optimal_price_leaves_no_violation(self, example3):
        prior, obj = example3
        res = concavify_grid(prior, obj, simplex_mesh(6, 4))
        _, viol = separation_oracle(res.price, obj, simplex_mesh(6, 4))
        assert viol <= 1e-7

    def test_strictly_feasible_constant_price(self):
        obj = PiecewiseLinearMax(np.eye(3))
        _, viol = separation_oracle(PriceFunction(np.full(3, 2.0)), obj, simplex_mesh(3, 3))
        assert viol < 0

    def test_zero_price_against_constant_one(self):
        obj = PiecewiseLinearMax(np.ones((1, 3)))
        mu, viol = separation_oracle(PriceFunction(np.zeros(3)), obj, simplex_mesh(3, 2))
        assert viol == pytest.approx(1.0)
        # ties resolve to the lexicographically smallest belief
        assert tuple(mu.probs) == (0.0, 0.0, 1.0)


class TestCuttingPlane:
    def test_affine_objective_converges_at_once(self):
        obj = PiecewiseLinearMax([[1.0, 3.0, -2.0]], [0.5])
        res = solve_dual_cutting_plane([0.2, 0.3, 0.5], obj)
        assert res.iterations == 1
        assert res.price.prices == pytest.approx([1.5, 3.5, -1.5])

    def test_threshold_price_is_the_supporting_line(self):
        t0 = 0.3
        res = solve_dual_cutting_plane([1 - t0, t0], threshold_objective(), AdaptiveRefiner(2, k0=4, k_max=64))
        grid = np.linspace(0, 1, 201)
        V = lambda t: float(t >= 0.5)
        assert res.dual_value == pytest.approx(two_point_closure(V, t0, grid), abs=1e-7)
        assert res.price.prices == pytest.approx([0.0, 2.0], abs=1e-7)

    def test_six_state_instance_agrees_with_grid(self, example3):
        prior, obj = example3
        grid = concavify_grid(prior, obj, simplex_mesh(6, 4))
        cut = solve_dual_cutting_plane(prior, obj, simplex_mesh(6, 4))
        assert cut.dual_value == pytest.approx(grid.value, abs=1e-6)
        adaptive = solve_dual_cutting_plane(prior, obj, AdaptiveRefiner(6, k0=2, k_max=8))
        assert adaptive.dual_value == pytest.approx(101 / 300, abs=1e-6)
        assert adaptive.gap <= 1e-6

    def test_iteration_limit_keeps_best_bundle(self, example3):
        prior, obj = example3
        with pytest.raises(IterationLimit) as info:
            solve_dual_cutting_plane(prior, obj, simplex_mesh(6, 4), max_iters=2)
        assert info.value.best is not None and info.value.best.iterations == 2

    def test_rejects_nonpositive_tol(self):
        with pytest.raises(ValueError):
            solve_dual_cutting_plane([0.5, 0.5], threshold_objective(), tol=0.0)


class TestReduceSupport:
    def test_small_signal_unchanged(self):
        s = Signal([0.5, 0.5], [[1, 0], [0, 1]])
        r = reduce_support(s, [0.5, 0.5])
        assert np.array_equal(r.posteriors, s.posteriors)

    def test_duplicates_merged(self):
        s = Signal([0.25, 0.25, 0.5], [[1, 0], [1, 0], [0, 1]])
        r = reduce_support(s, [0.5, 0.5])
        assert r.n_atoms == 2 and sorted(r.weights) == [0.5, 0.5]

    def test_five_atoms_on_binary_state(self, rng):
        ts = np.array([0.0, 0.2, 0.5, 0.7, 1.0])
        w = rng.dirichlet(np.ones(5))
        M = np.column_stack([1 - ts, ts])
        s = Signal(w, M)
        prior = s.barycenter()
        r = reduce_support(s, prior)
        assert r.n_atoms <= 2
        assert np.abs(r.barycenter() - prior).max() <= 1e-9
        affine = PiecewiseLinearMax([[0.3, -1.2]], [0.4])
        assert r.value(affine) == pytest.approx(s.value(affine))

    def test_value_never_drops_with_values(self, rng):
        obj = PiecewiseLinearMax(rng.normal(size=(3, 3)))
        M = rng.dirichlet(np.ones(3), size=6)
        s = Signal(rng.dirichlet(np.ones(6)), M)
        r = reduce_support(s, s.barycenter(), values=obj.evaluate_many(M))
        assert r.n_atoms <= 3
        assert r.value(obj) >= s.value(obj) - 1e-9


class TestSupergradient:
    def test_cutting_plane_price_is_a_supergradient(self, rng, example3):
        prior, obj = example3
        cands = simplex_mesh(6, 2)
        res = solve_dual_cutting_plane(prior, obj, cands)
        report = check_supergradient(res.price, prior, obj, rng.dirichlet(np.ones(6), size=20), cands)
        assert report.passed, report.violations

    def test_affine_objective_is_tight(self, rng):
        obj = PiecewiseLinearMax([[1.0, -1.0, 2.0]])
        prior = Prior.of([0.3, 0.3, 0.4])
        report = check_supergradient(PriceFunction([1.0, -1.0, 2.0]), prior, obj,
                                     rng.dirichlet(np.ones(3), size=10), simplex_mesh(3, 2))
        assert report.passed and abs(report.worst) <= 1e-9

    def test_lowered_price_fails(self, rng, example3):
        prior, obj = example3
        cands = simplex_mesh(6, 2)
        res = concavify_grid(prior, obj, cands)
        lowered = PriceFunction(res.price.prices - 0.1 * np.eye(6)[0])
        probes = np.vstack([np.eye(6), rng.dirichlet(np.ones(6), size=20)])
        assert not check_supergradient(lowered, prior, obj, probes, cands).passed

    def test_empty_probes_rejected(self, example3):
        prior, obj = example3
        with pytest.raises(ValueError):
            check_supergradient(np.zeros(6), prior, obj, np.zeros((0, 6)), simplex_mesh(6, 1))
