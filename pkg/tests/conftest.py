from __future__ import annotations

import itertools

import numpy as np
import pytest

from persuasion.beliefs import MomentComposed, PiecewiseLinearMax, product, sender_receiver_objective

EXAMPLE3_COORDS = np.array([(0.1, 0.3), (0.3, 0.1), (0.4, 0.6), (0.6, 0.4), (0.8, 0.9), (1.0, 0.7)])
SYMMETRIC4_COORDS = np.array([(0.0, 0.5), (0.5, 0.0), (0.5, 1.0), (1.0, 0.5)])


@pytest.fixture
def example3():
    return np.full(6, 1 / 6), MomentComposed(EXAMPLE3_COORDS, product)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_prior(rng, n):
    p = rng.dirichlet(np.ones(n))
    p = np.maximum(p, 0.02)
    return p / p.sum()


def random_objective(rng, n, pieces=None):
    """Piecewise-linear objective: a convex max of affine pieces or a sender/receiver game."""
    if rng.random() < 0.5:
        k = pieces or int(rng.integers(1, 7))
        return PiecewiseLinearMax(rng.normal(size=(k, n)), rng.normal(size=k))
    k = pieces or int(rng.integers(2, 7))
    return sender_receiver_objective(rng.normal(size=(n, k)), rng.normal(size=(n, k)))


def brute_force_lp(c, A_eq, b_eq, A_ub, b_ub):
    """Optimal value of ``min c.x, A_eq x = b_eq, A_ub x <= b_ub, x >= 0`` by vertex enumeration.

    Only for bounded problems with a handful of variables.  Returns ``None``
    when no vertex is feasible.
    """
    n = c.size
    rows = [(A_eq[i], b_eq[i], True) for i in range(A_eq.shape[0])]
    rows += [(A_ub[i], b_ub[i], False) for i in range(A_ub.shape[0])]
    rows += [(np.eye(n)[j] * -1.0, 0.0, False) for j in range(n)]
    eq = [r for r in rows if r[2]]
    ineq = [r for r in rows if not r[2]]
    rank = np.linalg.matrix_rank(A_eq) if A_eq.size else 0
    best = None
    for active in itertools.combinations(range(len(ineq)), max(n - rank, 0)):
        sel = eq + [ineq[i] for i in active]
        A = np.array([r[0] for r in sel])
        b = np.array([r[1] for r in sel])
        if A.shape[0] < n or np.linalg.matrix_rank(A) < n:
            continue
        x = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.abs(A @ x - b).max() > 1e-9:
            continue
        if np.any(x < -1e-9) or (A_ub.size and np.any(A_ub @ x > b_ub + 1e-9)):
            continue
        if A_eq.size and np.abs(A_eq @ x - b_eq).max() > 1e-9:
            continue
        val = float(c @ x)
        best = val if best is None else min(best, val)
    return best


def random_moment_instance(rng, n=None, dim=None, k=3):
    """Random moment problem: prior, moment map, a nonconvex ``v`` and mesh moments as candidates."""
    from persuasion.concavify import simplex_mesh

    n = n or int(rng.integers(3, 6))
    dim = dim or int(rng.integers(1, 3))
    m = rng.random((n, dim))
    W = rng.normal(size=(3, dim)) * 4
    a = rng.normal(size=3)

    def v(x):
        x = np.asarray(x, dtype=float)
        return np.sin(x @ W.T) @ a

    xs = np.unique(np.round(simplex_mesh(n, k).beliefs @ m, 12), axis=0)
    return random_prior(rng, n), m, v, xs


def fiber_candidates(m, xs):
    """Beliefs at the extreme points of every moment fiber; the state-space grid matching ``xs``."""
    from persuasion.concavify import CandidateSet
    from persuasion.moment import fiber_vertices

    return CandidateSet.user_grid(np.vstack([fiber_vertices(m, x) for x in xs]), n=len(m))


ACCEPTANCE: dict[int, tuple[str, bool, float]] = {}


class _Criterion:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget

    def __enter__(self):
        import time

        self._clock = time.perf_counter
        self._start = self._clock()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = self._clock() - self._start
        ok = exc_type is None and elapsed < self.budget
        ACCEPTANCE[self.number] = (self.title, ok, elapsed)
        if exc_type is None and not ok:
            raise AssertionError(f"criterion {self.number} took {elapsed:.2f} s, budget {self.budget} s")
        return False


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion with its wall time."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, elapsed = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number}. {'PASS' if ok else 'FAIL'}  {elapsed:7.2f} s  {title}")
