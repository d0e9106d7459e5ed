"""Concave closure of an objective at the prior, with optimal signal and price.

Two routes to the same number:

* :func:`concavify_grid` solves the primal LP over a finite candidate set of
  posteriors and reads the price off the barycenter-row multipliers;
* :func:`solve_dual_cutting_plane` minimises the price hyperplane at the
  prior over an growing set of cuts ``<P, mu> >= V(mu)``, adding the most
  violated belief found by :func:`separation_oracle` each round.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .beliefs import Belief, PiecewiseLinearMax, PriceFunction, Prior, Signal
from .config import DEFAULT, Tolerances
from .errors import IterationLimit, SizeLimitExceeded
from .lp import LinearProgram, solve_lp

log = logging.getLogger(__name__)

MESH_LIMIT = 250_000


@dataclass(frozen=True)
class CandidateSet:
    """Finite set of posteriors the primal LP may use.

    Always contains every Dirac belief, so full disclosure is feasible.
    """

    beliefs: np.ndarray
    provenance: str = "user"
    resolution: int | None = None

    def __post_init__(self):
        B = np.array(np.atleast_2d(self.beliefs), dtype=float)
        if B.shape[0] == 0:
            raise ValueError("candidate set is empty")
        if np.any(B < 0) or np.any(np.abs(B.sum(axis=1) - 1.0) > DEFAULT.simplex):
            raise ValueError("candidates must be probability vectors")
        missing = _missing_vertices(B)
        if missing:
            raise ValueError(f"candidate set lacks the Dirac beliefs of states {missing}")
        B.setflags(write=False)
        object.__setattr__(self, "beliefs", B)

    @classmethod
    def user_grid(cls, beliefs, n: int | None = None) -> "CandidateSet":
        """Candidate set from arbitrary beliefs; missing vertices are appended."""
        B = np.atleast_2d(np.asarray(beliefs, dtype=float))
        n = B.shape[1] if n is None else n
        B = B.reshape(-1, n)
        return cls(_dedupe(np.vstack([B, np.eye(n)])), "user")

    @property
    def n(self) -> int:
        return self.beliefs.shape[1]

    def __len__(self) -> int:
        return self.beliefs.shape[0]

    def union(self, beliefs) -> "CandidateSet":
        B = np.vstack([self.beliefs, np.atleast_2d(beliefs)])
        return CandidateSet(_dedupe(B), "adaptive")


def _missing_vertices(B):
    return [i for i in range(B.shape[1]) if not np.any(B[:, i] == 1.0)]


def _dedupe(B):
    _, idx = np.unique(np.round(B, 12), axis=0, return_index=True)
    return B[np.sort(idx)]


def mesh_size(n: int, k: int) -> int:
    return math.comb(n + k - 1, k)


def simplex_mesh(n: int, k: int, limit: int = MESH_LIMIT) -> CandidateSet:
    """All beliefs whose coordinates are multiples of ``1/k``."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    size = mesh_size(n, k)
    if size > limit:
        raise SizeLimitExceeded(f"mesh of {size} beliefs (n={n}, k={k}) exceeds limit {limit}")
    rows = np.empty((size, n))
    # stars and bars: bar positions among k + n - 1 slots
    for r, bars in enumerate(itertools.combinations(range(k + n - 1), n - 1)):
        counts = np.diff((-1, *bars, k + n - 1)) - 1
        rows[r] = counts / k
    return CandidateSet(rows, "mesh", k)


@dataclass(frozen=True)
class ConcavifyResult:
    value: float
    signal: Signal
    price: PriceFunction
    gap: float
    iterations: int
    dual_value: float = math.nan
    max_violation: float = math.nan
    candidates: CandidateSet | None = field(default=None, repr=False)


def _check_prior(prior: Prior):
    if not prior.full_support:
        warnings.warn("prior lacks full support; restrict the state space to its support", stacklevel=3)


def price_from_duals(dual_eq: np.ndarray, n: int) -> np.ndarray:
    """Price vector from the duals of ``[barycenter rows; normalisation row]``.

    The LP minimises ``-V.w``; the normalisation multiplier is an intercept
    that becomes part of every state's price.
    """
    return 0.0 - (dual_eq[:n] + dual_eq[n])


def concavify_grid(prior, obj, cands: CandidateSet, tol: Tolerances = DEFAULT, jobs: int = 1) -> ConcavifyResult:
    """Solve ``max sum_i w_i V(mu_i)`` over Bayes-plausible weights on ``cands``."""
    prior = Prior.of(prior)
    _check_prior(prior)
    n = prior.n
    if cands.n != n:
        raise ValueError("candidate beliefs and prior have different dimensions")
    M = cands.beliefs
    values = obj.evaluate_many(M, jobs=jobs)
    A_eq = np.vstack([M.T, np.ones(M.shape[0])])
    b_eq = np.concatenate([prior.probs, [1.0]])
    sol = solve_lp(LinearProgram(-values, A_eq, b_eq), tol)
    # full disclosure is always feasible, so the only failure is numeric
    P = PriceFunction(price_from_duals(sol.dual_eq, n))
    keep = sol.x > tol.support
    signal = reduce_support(Signal(sol.x[keep] / sol.x[keep].sum(), M[keep]), prior, values=values[keep], tol=tol)
    primal = signal.value(obj)
    dual = float(P.prices @ prior.probs)
    slack = values - P.on(M)
    return ConcavifyResult(
        value=-sol.objective_value,
        signal=signal,
        price=P,
        gap=dual - primal,
        iterations=sol.iterations,
        dual_value=dual,
        max_violation=float(slack.max()),
        candidates=cands,
    )


def concave_closure(mu, obj, cands: CandidateSet, tol: Tolerances = DEFAULT) -> float:
    """Value of the concave closure at ``mu`` relative to ``cands``."""
    return _closure(mu, cands.beliefs, obj.evaluate_many(cands.beliefs), tol)


def _closure(mu, M, values, tol=DEFAULT):
    A_eq = np.vstack([M.T, np.ones(len(M))])
    sol = solve_lp(LinearProgram(-values, A_eq, np.append(np.asarray(mu, dtype=float), 1.0)), tol)
    return -sol.objective_value


def _signal_from_weights(w, M, tol):
    keep = w > tol.support
    wk = w[keep]
    return Signal(wk / wk.sum(), M[keep])


def separation_oracle(price, obj, search=None, jobs: int = 1) -> tuple[Belief, float]:
    """Belief maximising ``V(mu) - <P, mu>`` over ``search``.

    Ties go to the largest violation, then the lexicographically smallest
    belief.  For :class:`PiecewiseLinearMax` objectives the gap is convex in
    ``mu``, so adding the vertices makes the search exact over the simplex.
    """
    P = price.prices if isinstance(price, PriceFunction) else np.asarray(price, dtype=float)
    n = P.size
    if search is None:
        M = np.zeros((0, n))
    elif isinstance(search, CandidateSet):
        M = search.beliefs
    else:
        M = np.atleast_2d(np.asarray(search, dtype=float))
    if isinstance(obj, PiecewiseLinearMax) or M.shape[0] == 0:
        M = np.vstack([M, np.eye(n)])
    viol = obj.evaluate_many(M, jobs=jobs) - M @ P
    best = viol.max()
    ties = np.flatnonzero(viol >= best - 1e-12)
    i = min(ties, key=lambda r: tuple(M[r]))
    return Belief(M[i]), float(viol[i])


class AdaptiveRefiner:
    """Search sets for the cutting-plane loop.

    Starts with the full simplex mesh at resolution ``k0`` and each
    refinement doubles the resolution; once the full mesh would exceed
    ``full_limit`` beliefs only the neighbourhood of the current support is
    meshed at the finer step.  ``extra`` beliefs are searched every round.
    """

    def __init__(self, n: int, k0: int = 4, k_max: int = 64, full_limit: int = 20_000, extra=None):
        self.n = n
        self.extra = np.zeros((0, n)) if extra is None else np.atleast_2d(np.asarray(extra, dtype=float))
        self.k = k0
        self.k_max = k_max
        self.full_limit = full_limit
        self._base_k = k0
        self._base = simplex_mesh(n, k0).beliefs

    def search_set(self, support: np.ndarray) -> np.ndarray:
        return np.vstack([self._search_set(support), self.extra])

    def _search_set(self, support: np.ndarray) -> np.ndarray:
        n, k = self.n, self.k
        if mesh_size(n, k) <= self.full_limit:
            if k != self._base_k:
                self._base, self._base_k = simplex_mesh(n, k).beliefs, k
            return self._base
        steps = [t / k for t in (1, 2)]
        local = [self._base]
        E = np.eye(n)
        for s in np.atleast_2d(support):
            for i, j in itertools.permutations(range(n), 2):
                for h in steps:
                    pt = s + h * (E[i] - E[j])
                    if pt[j] >= -1e-12:
                        local.append(np.maximum(pt, 0.0)[None, :])
        return np.vstack(local)

    def refine(self) -> bool:
        if 2 * self.k > self.k_max:
            return False
        self.k *= 2
        return True


class _FixedSearch:
    def __init__(self, beliefs):
        self.beliefs = beliefs

    def search_set(self, support):
        return self.beliefs

    def refine(self):
        return False


def solve_dual_cutting_plane(prior, obj, refiner=None, tol: float = DEFAULT.cut, max_iters: int = 1000,
                             tols: Tolerances = DEFAULT, jobs: int = 1) -> ConcavifyResult:
    """Minimise ``<P, mu0>`` subject to ``<P, mu> >= V(mu)`` by cutting planes.

    ``refiner`` is a :class:`CandidateSet`, a belief matrix, an
    :class:`AdaptiveRefiner`, or ``None`` (vertices only, exact for
    piecewise-linear maxima).  The returned signal is recovered from the
    multipliers of the final restricted LP.
    """
    prior = Prior.of(prior)
    _check_prior(prior)
    n = prior.n
    if tol <= 0:
        raise ValueError("tol must be positive")
    if refiner is None:
        search = _FixedSearch(np.eye(n))
    elif isinstance(refiner, CandidateSet):
        search = _FixedSearch(refiner.beliefs)
    elif isinstance(refiner, np.ndarray):
        search = _FixedSearch(np.atleast_2d(refiner))
    else:
        search = refiner

    cuts = np.eye(n)
    cut_vals = obj.evaluate_many(cuts, jobs=jobs)
    seen = {tuple(np.round(c, 12)) for c in cuts}
    best = None
    for it in range(1, max_iters + 1):
        sol = solve_lp(LinearProgram(prior.probs, A_ub=-cuts, b_ub=-cut_vals, lb=-np.inf), tols)
        P = PriceFunction(sol.x)
        w = sol.dual_ub
        keep = w > tols.support
        support = cuts[keep]
        best = _cut_result(prior, obj, P, w, cuts, it, math.nan)
        mu, viol = separation_oracle(P, obj, search.search_set(support), jobs=jobs)
        log.debug("cutting plane %d: value %.10g violation %.3g", it, sol.objective_value, viol)
        if viol <= tol:
            if search.refine():
                continue
            return _cut_result(prior, obj, P, w, cuts, it, viol)
        key = tuple(np.round(mu.probs, 12))
        if key in seen:
            # violation persists at an existing cut: LP tolerance floor reached
            return _cut_result(prior, obj, P, w, cuts, it, viol)
        seen.add(key)
        cuts = np.vstack([cuts, mu.probs])
        cut_vals = np.append(cut_vals, obj.evaluate_many(mu.probs[None, :])[0])
    raise IterationLimit(f"cutting plane did not converge in {max_iters} iterations", best=best)


def _cut_result(prior, obj, P, w, cuts, iterations, violation):
    keep = w > DEFAULT.support
    wk = w[keep]
    signal = Signal(wk / wk.sum(), cuts[keep])
    primal = signal.value(obj)
    dual = float(P.prices @ prior.probs)
    return ConcavifyResult(primal, signal, P, dual - primal, iterations, dual, violation)


def reduce_support(signal: Signal, prior, values=None, tol: Tolerances = DEFAULT) -> Signal:
    """Merge duplicate posteriors and cut the signal down to at most ``n`` atoms.

    The barycenter is preserved exactly (up to LP tolerance).  Without
    ``values`` any basic solution is returned, which keeps the value of
    every affine objective; with per-atom ``values`` the value is maximised
    over the existing posteriors, so it never decreases.
    """
    prior = Prior.of(prior)
    n = prior.n
    keys = {}
    W, M, vals = [], [], []
    for i, (w, mu) in enumerate(zip(signal.weights, signal.posteriors)):
        key = tuple(np.round(mu, 12))
        if key in keys:
            W[keys[key]] += w
        else:
            keys[key] = len(W)
            W.append(float(w))
            M.append(mu)
            vals.append(0.0 if values is None else float(values[i]))
    W, M = np.array(W), np.array(M)
    if len(W) <= n:
        return Signal(W / W.sum(), M)
    sol = solve_lp(LinearProgram(-np.array(vals), np.vstack([M.T, np.ones(len(W))]),
                                 np.append(prior.probs, 1.0)), tol)
    return _signal_from_weights(sol.x, M, tol)


@dataclass(frozen=True)
class SupergradientReport:
    passed: bool
    worst: float
    violations: list
    value_at_prior: float


def check_supergradient(price, prior, obj, probe_beliefs, cands: CandidateSet, tol: float = 1e-6) -> SupergradientReport:
    """Check ``Vhat(mu) - Vhat(mu0) <= <P, mu - mu0> + tol`` at every probe.

    ``Vhat`` is the concave closure relative to ``cands``.
    """
    prior = Prior.of(prior)
    P = price.prices if isinstance(price, PriceFunction) else np.asarray(price, dtype=float)
    probes = np.atleast_2d(np.asarray(probe_beliefs, dtype=float))
    if probes.shape[0] == 0:
        raise ValueError("probe set is empty")
    values = obj.evaluate_many(cands.beliefs)
    v0 = _closure(prior.probs, cands.beliefs, values)
    violations = []
    worst = -math.inf
    for i, mu in enumerate(probes):
        excess = _closure(mu, cands.beliefs, values) - v0 - P @ (mu - prior.probs)
        worst = max(worst, excess)
        if excess > tol:
            violations.append((i, float(excess)))
    return SupergradientReport(not violations, float(worst), violations, v0)
