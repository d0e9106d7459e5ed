"""End-to-end acceptance criteria, one test each.

Each test records PASS/FAIL and its wall time; the summary is printed at the
end of the pytest run.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from persuasion.beliefs import MomentComposed, PiecewiseLinearMax, PriceFunction, Signal
from persuasion.certificates import check_complementary_slackness, check_dual_feasible, full_disclosure_certificate
from persuasion.cli import main
from persuasion.concavify import CandidateSet, concavify_grid, simplex_mesh, solve_dual_cutting_plane
from persuasion.constrained import SideConstraint, check_constrained_optimality, solve_constrained_primal
from persuasion.fixtures import load_fixture
from persuasion.metrics import GroundMetric, kr_distance, steepness_ratios
from persuasion.moment import (MomentDistribution, MomentPrice, check_convex_order, convex_order_1d, lift_price,
                               push_down_price, solve_moment_primal)
from persuasion.revelation import certify_linear_revelation, check_line_support

from conftest import fiber_candidates, random_moment_instance, random_objective, random_prior


def cli_json(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_criterion_1_six_state_reproduction(capsys, criterion):
    with criterion(1, "six-state instance: value 101/300, pooled means, certificate, off-line means", 2.0):
        code, cert = cli_json(capsys, "solve", "fixtures/example3.json")
        assert code == 0
        assert cert["value"] == pytest.approx(101 / 300, abs=1e-6)
        assert len(cert["atoms"]) == 3
        means = np.array(sorted(map(tuple, cert["moments"])))
        assert np.abs(means - [[0.2, 0.2], [0.5, 0.5], [0.9, 0.8]]).max() <= 1e-6
        assert cert["gap"] <= 1e-6
        assert cert["verdict"] == "Optimal"
        assert max(abs(a["slack"]) for a in cert["atoms"]) <= 1e-6
        G = MomentDistribution(np.full(3, 1 / 3), means)
        assert not check_line_support(G, 1.0).is_line


def test_criterion_2_linear_revelation_sufficiency(criterion):
    with criterion(2, "symmetric four-point prior: linear revelation certified optimal", 1.0):
        inst = load_fixture("symmetric4").instance
        cert = certify_linear_revelation(inst.prior, inst.states.coords, 1.0)
        assert cert.verdict.value == "Optimal"
        assert cert.primal_value == pytest.approx(0.3125, abs=1e-12)
        assert cert.extra["moment_gap"] <= 1e-9
        from persuasion.revelation import closed_form_price

        H, det = closed_form_price(1, cert.extra["line_fit"]["b"]).exact_hessian()
        assert det == 0 and H[0][0] > 0 and H[1][1] > 0


def test_criterion_3_full_disclosure(capsys, criterion, rng):
    import time

    with criterion(3, "segment instances: full disclosure certified, solver value = E[V(delta)]", 2.0):
        for name in ("example1-line11", "example2-parabola11"):
            start = time.perf_counter()
            inst = load_fixture(name).instance
            probes = np.vstack([simplex_mesh(inst.n, 2).beliefs, rng.dirichlet(np.ones(inst.n), size=200)])
            rep = full_disclosure_certificate(inst.prior, inst.objective, probes)
            assert rep.is_optimal and rep.worst_violation <= 1e-9
            fd_value = float(inst.prior.probs @ inst.objective.evaluate_many(np.eye(inst.n)))
            code, cert = cli_json(capsys, "solve", name)
            assert code == 0 and abs(cert["value"] - fd_value) <= 1e-9
            assert time.perf_counter() - start < 1.0, name


def test_criterion_4_strong_duality(criterion, rng):
    with criterion(4, "200 random instances: grid primal vs cutting-plane dual gap <= 1e-6", 60.0):
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(2, 6))
            k = int(rng.integers(2, 7 if n <= 4 else 5))
            prior = random_prior(rng, n)
            obj = random_objective(rng, n, pieces=int(rng.integers(1, 7)))
            cands = simplex_mesh(n, k)
            primal = concavify_grid(prior, obj, cands)
            dual = solve_dual_cutting_plane(prior, obj, cands)
            assert check_dual_feasible(dual.price, obj, cands) <= 1e-7
            gap = float(dual.price.prices @ prior) - primal.value
            worst = max(worst, abs(gap))
        assert worst <= 1e-6


def _mix(a: Signal, b: Signal, lam: float) -> Signal:
    atoms = [(lam * w, mu) for w, mu in a.atoms] + [((1 - lam) * w, mu) for w, mu in b.atoms]
    return Signal.from_atoms([(w, mu) for w, mu in atoms if w > 0])


def test_criterion_5_slackness_equivalence(criterion, rng):
    with criterion(5, "100 random instances: pair passes iff both sides attain the grid optimum", 60.0):
        agree = 0
        both_outcomes = set()
        for _ in range(100):
            n = int(rng.integers(2, 5))
            prior, obj = random_prior(rng, n), random_objective(rng, n)
            cands = simplex_mesh(n, 4).union(prior)
            res = concavify_grid(prior, obj, cands)
            opt = res.value
            signals = [res.signal, Signal.full_disclosure(prior), Signal.no_disclosure(prior)]
            lam = rng.random()
            signals.append(_mix(res.signal, signals[int(rng.integers(1, 3))], lam))
            prices = [res.price, res.price.shifted(rng.random() * 0.1 + 1e-3)]
            fd_price = PriceFunction(obj.evaluate_many(np.eye(n)))
            if check_dual_feasible(fd_price, obj, cands) <= 1e-9:
                prices.append(fd_price)
            for sig in signals:
                for P in prices:
                    probes = cands.union(sig.posteriors)
                    feasible = check_dual_feasible(P, obj, probes) <= 1e-7
                    passes = feasible and check_complementary_slackness(sig, P, obj, tol=1e-7).passed
                    optimal = abs(sig.value(obj) - opt) <= 1e-6 and abs(float(P.prices @ prior) - opt) <= 1e-6
                    assert passes == optimal
                    both_outcomes.add(passes)
                    agree += 1
        assert both_outcomes == {True, False}


def test_criterion_6_convex_order(criterion, rng):
    with criterion(6, "200 random 1D pairs: martingale LP agrees with integrated CDFs", 30.0):
        outcomes = []
        for _ in range(200):
            L = int(rng.integers(2, 6))
            F0 = MomentDistribution(rng.dirichlet(np.ones(L)), rng.integers(0, 11, size=L) / 10)
            k = int(rng.integers(1, 5))
            w = rng.dirichlet(np.ones(k))
            pts = rng.integers(-2, 13, size=k) / 10
            if rng.random() < 0.7:
                pts = pts - w @ pts + F0.mean()[0]
            G = MomentDistribution(w, pts)
            lp = check_convex_order(G, F0).holds
            assert lp == convex_order_1d(G, F0, tol=1e-9)
            outcomes.append(lp)
        assert any(outcomes) and not all(outcomes)


def test_criterion_7_lift_push_down(criterion, rng):
    with criterion(7, "50 moment instances: lift/push-down sandwich and value agreement", 60.0):
        for _ in range(50):
            prior, m, v, xs = random_moment_instance(rng)
            F0 = MomentDistribution.from_prior(prior, m)
            sol = solve_moment_primal(F0, v, xs)
            grid = concavify_grid(prior, MomentComposed(m, v), fiber_candidates(m, xs))
            assert abs(sol.value - grid.value) <= 1e-6
            # push_down(lift(p)) = p at the state moments for a convex p
            A = rng.normal(size=(3, m.shape[1]))
            p = MomentPrice(np.zeros_like(A), rng.normal(size=3), A)
            back = push_down_price(lift_price(p, m), m)
            assert np.abs(back.values - p(m)).max() <= 1e-7
            # lift(push_down(P)) <= P for a feasible P
            P = grid.price
            down = push_down_price(P, m, xs, v=v)
            assert np.all(lift_price(down, m).prices <= P.prices + 1e-8)


def test_criterion_8_kr_metric(criterion):
    with criterion(8, "KR distance: unit interval, discretized example, sqrt(n) steepness", 30.0):
        line = lambda x: GroundMetric(np.abs(np.subtract.outer(x, x)))
        assert abs(kr_distance([1.0, 0.0], [0.0, 1.0], line(np.array([0.0, 1.0]))) - 1.0) <= 1e-9
        grid = np.linspace(0, 1, 41)
        rho = line(grid)
        step = grid[1] - grid[0]
        obj = PiecewiseLinearMax(np.sqrt(grid)[None, :])
        cands = CandidateSet.user_grid(np.eye(grid.size))
        ns = (2, 4, 8, 10, 20, 40)  # 1/n on the grid
        ratios = []
        for n in ns:
            unif = np.full(grid.size, 0.5 / grid.size)
            mu, mu0 = unif.copy(), unif.copy()
            mu[np.argmin(np.abs(grid - 1 / n))] += 0.5
            mu0[0] += 0.5
            if n <= 8:
                assert abs(kr_distance(mu, mu0, rho) - 1 / (2 * n)) <= 2 * step
            ratios.append(steepness_ratios(mu0, obj, mu, rho, cands)[0])
        assert np.all(np.diff(ratios) > 0)
        doubling = np.array([ratios[1] / ratios[0], ratios[2] / ratios[1], ratios[4] / ratios[3],
                             ratios[5] / ratios[4]])
        assert np.all(np.abs(doubling / np.sqrt(2) - 1) <= 0.1)


def test_criterion_9_constrained(criterion):
    with criterion(9, "binary constrained instance: binding and relaxed constraint", 1.0):
        inst = load_fixture("constrained-binary").instance
        cands = simplex_mesh(2, inst.options["mesh_k"])
        cons = list(inst.constraints)
        res = solve_constrained_primal(inst.prior, inst.objective, cons, cands)
        cert = check_constrained_optimality(res.signal, res.price, res.multipliers, cons, inst.prior,
                                            inst.objective, cands)
        assert cert.gap <= 1e-6 and cert.verdict.value == "Optimal"
        assert np.all(res.multipliers >= 0)
        assert np.all(np.abs(res.multipliers * cert.constraint_slack) <= 1e-6)
        relaxed = [SideConstraint(k.g, 10.0, k.name) for k in cons]
        free = solve_constrained_primal(inst.prior, inst.objective, relaxed, cands)
        assert np.abs(free.multipliers).max() <= 1e-8
        assert free.value == pytest.approx(concavify_grid(inst.prior, inst.objective, cands).value, abs=1e-9)
