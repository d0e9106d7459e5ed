"""Persuasion problems whose objective depends only on posterior moments.

When ``V(mu) = v(E_mu[m])`` a signal matters only through the distribution
``G`` of posterior moments it induces, and ``G`` is achievable exactly when
it is a mean-preserving contraction of the prior moment distribution
``F0`` (a martingale coupling exists).  Prices move between the two spaces:

* push-down: ``p(x) = min { <P, mu> : E_mu[m] = x }`` is convex, dominates
  ``v`` when ``P`` is feasible, and never exceeds ``P`` at the states;
* lift: ``P(w) = p(m(w))`` is feasible whenever ``p`` is convex and ``>= v``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .beliefs import PriceFunction, Prior, Signal
from .config import DEFAULT, Tolerances
from .errors import NumericFailure, OutOfHull
from .lp import LinearProgram, LpStatus, solve_lp


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _as_queries(x, dim: int):
    """Stack query moments as rows; report whether a single point was given."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1), True
    if x.ndim == 1:
        return (x[:, None], False) if dim == 1 else (x[None, :], True)
    return x, False


@dataclass(frozen=True)
class MomentMap:
    """Moment vector ``m(w)`` for each state (rows)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(_points(self.values), dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("moment map must give one vector per state")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def of(cls, m) -> "MomentMap":
        return m if isinstance(m, MomentMap) else cls(m)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def mean(self, mu) -> np.ndarray:
        return np.asarray(mu, dtype=float) @ self.values


def merge_atoms(weights, points, tol: float = DEFAULT.merge):
    """Combine atoms whose points agree within ``tol`` (sup norm)."""
    weights = np.asarray(weights, dtype=float)
    points = _points(points)
    order = np.lexsort(points.T[::-1])
    out_w, out_x = [], []
    for i in order:
        for j, x in enumerate(out_x):
            if np.abs(x - points[i]).max() <= tol:
                out_w[j] += weights[i]
                break
        else:
            out_w.append(float(weights[i]))
            out_x.append(points[i].copy())
    return np.array(out_w), np.array(out_x)


@dataclass(frozen=True)
class MomentDistribution:
    weights: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        x = np.array(_points(self.points), dtype=float)
        if w.ndim != 1 or x.shape[0] != w.size:
            raise ValueError("one weight per moment point required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > DEFAULT.simplex:
            raise ValueError("moment weights must be a probability vector")
        w.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", x)

    @classmethod
    def from_prior(cls, prior, m) -> "MomentDistribution":
        """Distribution ``F0`` of ``m(w)`` under the prior."""
        m = MomentMap.of(m)
        p = Prior.of(prior).probs
        keep = p > 0
        return cls(*merge_atoms(p[keep], m.values[keep]))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def expect(self, f: Callable) -> float:
        return float(self.weights @ np.asarray(f(self.points), dtype=float).reshape(-1))

    def in_hull(self, m) -> bool:
        """Whether every atom lies in the convex hull of the state moments."""
        return bool(hull_contains(m, self.points).all())


def hull_contains(m, xs) -> np.ndarray:
    """Mask of the query moments lying in the convex hull of the state moments."""
    m = MomentMap.of(m)
    out = []
    for x in _as_queries(xs, m.dim)[0]:
        try:
            moment_price(np.zeros(m.n), m, x)
            out.append(True)
        except OutOfHull:
            out.append(False)
    return np.array(out, dtype=bool)


def induce_moment_distribution(signal: Signal, m, tol: float = DEFAULT.merge) -> MomentDistribution:
    """Distribution of posterior moments ``E_mu[m]`` under ``signal``."""
    m = MomentMap.of(m)
    return MomentDistribution(*merge_atoms(signal.weights, signal.posteriors @ m.values, tol))


@dataclass(frozen=True)
class ConvexOrderResult:
    holds: bool
    coupling: np.ndarray | None  # coupling[i, j]: mass moved from G atom i to F0 atom j


def _martingale_rows(xs, ys):
    """Equality rows for a coupling ``pi[i, j]`` (row-major) between points
    ``xs`` (contracted) and ``ys`` (spread) with barycenter ``xs[i]``."""
    K, L, N = xs.shape[0], ys.shape[0], xs.shape[1]
    col = np.zeros((L, K * L))
    bary = np.zeros((K * N, K * L))
    for i in range(K):
        sl = slice(i * L, (i + 1) * L)
        col[:, sl] = np.eye(L)
        bary[i * N:(i + 1) * N, sl] = (ys - xs[i]).T
    return col, bary


def check_convex_order(G: MomentDistribution, F0: MomentDistribution, tol: Tolerances = DEFAULT) -> ConvexOrderResult:
    """Is ``G`` a mean-preserving contraction of ``F0``?

    Searches for a martingale coupling: ``pi >= 0`` with marginals ``G`` and
    ``F0`` and ``sum_j pi[i, j] y_j = G_i x_i`` for every atom of ``G``.
    """
    if G.dim != F0.dim:
        raise ValueError("moment dimensions differ")
    K, L = len(G), len(F0)
    col, bary = _martingale_rows(G.points, F0.points)
    row = np.kron(np.eye(K), np.ones(L))
    A_eq = np.vstack([row, col, bary])
    b_eq = np.concatenate([G.weights, F0.weights, np.zeros(bary.shape[0])])
    sol = solve_lp(LinearProgram(np.zeros(K * L), A_eq, b_eq), tol)
    if sol.status is not LpStatus.OPTIMAL:
        return ConvexOrderResult(False, None)
    return ConvexOrderResult(True, sol.x.reshape(K, L))


def convex_order_1d(G: MomentDistribution, F0: MomentDistribution, tol: float = 1e-12) -> bool:
    """One-dimensional test: equal means and ``E_G[(x-t)+] <= E_F0[(x-t)+]`` for all ``t``.

    Both sides are piecewise linear in ``t`` with kinks at the atoms, so
    checking the kinks suffices.
    """
    if G.dim != 1 or F0.dim != 1:
        raise ValueError("one-dimensional distributions required")
    g, f = G.points[:, 0], F0.points[:, 0]
    if abs(G.weights @ g - F0.weights @ f) > tol:
        return False
    for t in np.union1d(g, f):
        if G.weights @ np.maximum(g - t, 0) > F0.weights @ np.maximum(f - t, 0) + tol:
            return False
    return True


@dataclass(frozen=True)
class MomentSolution:
    G: MomentDistribution
    value: float
    coupling: np.ndarray  # [candidate, F0 atom]
    candidates: np.ndarray
    q: np.ndarray  # price per F0 atom
    r: np.ndarray  # obedience multiplier per candidate moment
    dual_value: float


def solve_moment_primal(F0: MomentDistribution, v: Callable, candidate_xs, tol: Tolerances = DEFAULT) -> MomentSolution:
    """Maximise ``E_G[v]`` over ``G <= F0`` in convex order with support in ``candidate_xs``.

    The atoms of ``F0`` are always added to the candidates.  The duals give
    ``q`` on the atoms of ``F0`` and ``r`` on the candidates with
    ``q(y) + r(x).(x - y) >= v(x)`` for every pair.
    """
    xs = np.vstack([_points(candidate_xs), F0.points])
    _, idx = np.unique(np.round(xs, 12), axis=0, return_index=True)
    xs = xs[np.sort(idx)]
    K, L, N = xs.shape[0], len(F0), F0.dim
    vx = np.asarray(v(xs), dtype=float).reshape(K)
    col, bary = _martingale_rows(xs, F0.points)
    A_eq = np.vstack([col, bary])
    b_eq = np.concatenate([F0.weights, np.zeros(K * N)])
    c = -np.repeat(vx, L)
    sol = solve_lp(LinearProgram(c, A_eq, b_eq), tol)
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericFailure(f"moment LP ended with status {sol.status.value}")
    pi = sol.x.reshape(K, L)
    mass = pi.sum(axis=1)
    keep = mass > tol.support
    G = MomentDistribution(*merge_atoms(mass[keep] / mass[keep].sum(), xs[keep]))
    q = -sol.dual_eq[:L]
    r = sol.dual_eq[L:].reshape(K, N)
    return MomentSolution(G, -sol.objective_value, pi, xs, q, r, float(q @ F0.weights))


def fiber_vertices(m, x, tol: float = 1e-10) -> np.ndarray:
    """Extreme points of ``{mu : E_mu[m] = x}``.

    Each is supported on at most ``N + 1`` states with affinely independent
    moments.  Enumerates supports, so only for small state spaces.
    """
    m = MomentMap.of(m)
    x = np.asarray(x, dtype=float).reshape(-1)
    n, N = m.n, m.dim
    out = []
    for size in range(1, min(n, N + 1) + 1):
        for S in itertools.combinations(range(n), size):
            A = np.vstack([m.values[list(S)].T, np.ones(size)])
            lam, *_ = np.linalg.lstsq(A, np.append(x, 1.0), rcond=None)
            if np.linalg.matrix_rank(A, tol=1e-9) < size:
                continue
            if np.abs(A @ lam - np.append(x, 1.0)).max() > tol or np.any(lam < -tol):
                continue
            if size > 1 and np.any(lam <= tol):
                continue  # lies on a smaller face, found already
            mu = np.zeros(n)
            mu[list(S)] = np.maximum(lam, 0.0)
            out.append(mu / mu.sum())
    if not out:
        return np.zeros((0, n))
    return np.unique(np.round(np.array(out), 13), axis=0)


# -- moment prices -------------------------------------------------------------


def moment_price(P, m, x, tol: Tolerances = DEFAULT):
    """Cheapest belief cost generating moment ``x``.

    Returns ``(p(x), minimising belief, subgradient of p at x)``.
    """
    m = MomentMap.of(m)
    Pv = P.prices if isinstance(P, PriceFunction) else np.asarray(P, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != m.dim:
        raise ValueError("moment dimension mismatch")
    A_eq = np.vstack([m.values.T, np.ones(m.n)])
    sol = solve_lp(LinearProgram(Pv, A_eq, np.append(x, 1.0)), tol)
    if sol.status is LpStatus.INFEASIBLE:
        raise OutOfHull(f"moment {x} is outside the convex hull of the state moments")
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericFailure(f"moment price LP ended with status {sol.status.value}")
    mu = np.maximum(sol.x, 0.0)
    return float(sol.objective_value), mu / mu.sum(), sol.dual_eq[: m.dim].copy()


@dataclass(frozen=True)
class MomentPrice:
    """Convex price on moments known at sample points.

    ``subgradients[i]`` supports the price at ``points[i]``; between samples
    the price is evaluated as the maximum of these supporting affine pieces.
    """

    points: np.ndarray
    values: np.ndarray
    subgradients: np.ndarray
    beliefs: np.ndarray | None = None

    def __call__(self, x) -> np.ndarray | float:
        X, single = _as_queries(x, self.points.shape[1])
        pieces = self.values[None, :] + np.einsum("kn,jkn->jk", self.subgradients, X[:, None, :] - self.points[None])
        out = pieces.max(axis=1)
        return float(out[0]) if single else out

    def subgradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        pieces = self.values + np.einsum("kn,kn->k", self.subgradients, x - self.points)
        return self.subgradients[int(np.argmax(pieces))]

    def convexity_violation(self) -> float:
        """Largest failure of ``p(x_j) >= p(x_i) + g_i.(x_j - x_i)`` over sample pairs."""
        D = self.points[None, :, :] - self.points[:, None, :]
        lower = self.values[:, None] + np.einsum("in,ijn->ij", self.subgradients, D)
        return float((lower - self.values[None, :]).max())

    def domination_violation(self, v: Callable) -> float:
        """Largest amount by which ``v`` exceeds the price at a sample."""
        return float((np.asarray(v(self.points), dtype=float).reshape(-1) - self.values).max())


@dataclass(frozen=True)
class SmoothPrice:
    """Convex price given in closed form with its gradient."""

    func: Callable
    grad: Callable

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def subgradient(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.grad(np.asarray(x, dtype=float)), dtype=float))


def push_down_price(P, m, query_xs=None, v: Callable | None = None, tol: float = 1e-8) -> MomentPrice:
    """Moment price at each query point (default: the state moments).

    Certifies discrete convexity through the LP subgradients, checks
    ``p >= v`` at the samples when ``v`` is given, and verifies that the
    pushed-down price never exceeds ``P`` at the states.
    """
    m = MomentMap.of(m)
    Pv = P.prices if isinstance(P, PriceFunction) else np.asarray(P, dtype=float)
    xs = m.values if query_xs is None else _points(query_xs)
    vals, beliefs, grads = [], [], []
    for x in xs:
        val, mu, g = moment_price(Pv, m, x)
        vals.append(val)
        beliefs.append(mu)
        grads.append(g)
    price = MomentPrice(np.array(xs, dtype=float), np.array(vals), np.array(grads), np.array(beliefs))
    at_states = xs if query_xs is None else m.values
    state_vals = np.array(vals) if query_xs is None else np.array([moment_price(Pv, m, x)[0] for x in at_states])
    if np.any(state_vals > Pv + tol):
        raise NumericFailure("pushed-down price exceeds the state price")
    if price.convexity_violation() > tol:
        raise NumericFailure(f"pushed-down price failed convexity by {price.convexity_violation():.3g}")
    if v is not None and price.domination_violation(v) > tol:
        raise NumericFailure("pushed-down price falls below v; the state price is infeasible")
    return price


def lift_price(p: Callable, m) -> PriceFunction:
    """``P(w) = p(m(w))``."""
    m = MomentMap.of(m)
    return PriceFunction(np.array([float(np.asarray(p(x)).reshape(-1)[0]) for x in m.values]))


def moment_duality_residual(G: MomentDistribution, p: Callable, F0: MomentDistribution, v: Callable) -> float:
    """``|E_F0[p] - E_G[v]|``; zero certifies the pair ``(G, p)`` as optimal."""
    Ep = sum(w * float(np.asarray(p(x)).reshape(-1)[0]) for w, x in zip(F0.weights, F0.points))
    return abs(Ep - G.expect(v))


@dataclass(frozen=True)
class ObedienceMultipliers:
    q: np.ndarray  # at each probe state
    r: np.ndarray  # at each query action
    worst: float  # largest violation of q(w) + r(a).(a - w) >= v(a)
    violations: int


def obedience_multipliers(p, query_as, probe_omegas, v: Callable, tol: float = 1e-9) -> ObedienceMultipliers:
    """Bayes-plausibility and obedience multipliers ``(q, r) = (p, dp)``.

    Checks ``q(w) + r(a).(a - w) >= v(a)`` on every (probe, action) pair.
    """
    A = _points(query_as)
    W = _points(probe_omegas)
    q = np.array([float(np.asarray(p(w)).reshape(-1)[0]) for w in W])
    r = np.array([np.atleast_1d(p.subgradient(a)) for a in A])
    va = np.asarray(v(A), dtype=float).reshape(-1)
    lhs = q[:, None] + np.einsum("an,wan->wa", r, A[None, :, :] - W[:, None, :])
    gap = va[None, :] - lhs
    return ObedienceMultipliers(q, r, float(gap.max()), int((gap > tol).sum()))
