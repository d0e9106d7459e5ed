"""Kantorovich-Rubinstein distance and steepness of the concave closure.

The distance between finitely supported (possibly signed) measures is

    d(mu, eta) = sup { sum_w f(w) (mu - eta)(w) : f 1-Lipschitz, |f| <= 1 }.

It is computed through the dual transport problem, whose equality rows
carry the optimal ``f`` as their multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .beliefs import Prior
from .concavify import CandidateSet, _closure, simplex_mesh
from .config import DEFAULT, Tolerances
from .errors import NumericFailure
from .lp import LinearProgram, LpStatus, solve_lp


@dataclass(frozen=True)
class GroundMetric:
    """Pairwise distances between states."""

    matrix: np.ndarray

    def __post_init__(self):
        D = np.array(self.matrix, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("metric must be a square matrix")
        if np.any(D < 0) or np.any(np.diag(D) != 0) or not np.array_equal(D, D.T):
            raise ValueError("metric must be nonnegative and symmetric with zero diagonal")
        # D[i, j] <= D[i, k] + D[k, j]
        if np.any(D[:, None, :] > D[:, :, None] + D[None, :, :] + 1e-12):
            raise ValueError("metric violates the triangle inequality")
        D.setflags(write=False)
        object.__setattr__(self, "matrix", D)

    @classmethod
    def from_coords(cls, coords, metric: str = "euclidean") -> "GroundMetric":
        X = np.asarray(coords, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        D = cdist(X, X, metric=metric)
        return cls((D + D.T) / 2)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _metric(rho) -> GroundMetric:
    return rho if isinstance(rho, GroundMetric) else GroundMetric(rho)


def kr_distance(mu, eta, rho, tol: Tolerances = DEFAULT, return_witness: bool = False):
    """Kantorovich-Rubinstein distance between two weight vectors.

    Solves ``min sum rho_ij pi_ij + sum (s+_i + s-_i)`` over flows with
    net outflow plus ``s+ - s-`` equal to ``mu - eta``.  Mass can be moved
    at cost ``rho`` or created and destroyed at unit cost, which is the dual
    of the bounded-Lipschitz program.  With ``return_witness`` the optimal
    ``f`` is returned as well.
    """
    rho = _metric(rho)
    d = np.asarray(mu, dtype=float) - np.asarray(eta, dtype=float)
    n = rho.n
    if d.shape != (n,):
        raise ValueError("weights and metric have different sizes")
    # solve for the sign of d whose first nonzero entry is positive, so swapping arguments is exact
    nz = np.flatnonzero(d)
    flip = -1.0 if nz.size and d[nz[0]] < 0 else 1.0
    d = flip * d
    I, J = np.nonzero(~np.eye(n, dtype=bool))
    A = np.zeros((n, I.size + 2 * n))
    A[I, np.arange(I.size)] += 1.0
    A[J, np.arange(I.size)] -= 1.0
    A[:, I.size:I.size + n] = np.eye(n)
    A[:, I.size + n:] = -np.eye(n)
    cost = np.concatenate([rho.matrix[I, J], np.ones(2 * n)])
    sol = solve_lp(LinearProgram(cost, A, d), tol)
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericFailure(f"distance LP ended with status {sol.status.value}")
    value = max(float(sol.objective_value), 0.0)
    if return_witness:
        return value, flip * np.clip(sol.dual_eq, -1.0, 1.0)
    return value


def lipschitz_constant(f, rho) -> float:
    """Smallest ``L`` with ``|f_i - f_j| <= L rho_ij`` for distinct states."""
    D = _metric(rho).matrix
    f = np.asarray(f, dtype=float)
    diff = np.abs(f[:, None] - f[None, :])
    off = D > 0
    return float((diff[off] / D[off]).max(initial=0.0))


def steepness_bound(f, rho) -> float:
    """Bound on ``f.(mu - eta) / d(mu, eta)`` for unit-mass ``mu`` and ``eta``.

    Shifting ``f`` by its midrange does not change the numerator, and then
    ``f / max(Lip, osc/2)`` is admissible in the supremum.
    """
    f = np.asarray(f, dtype=float)
    return max(lipschitz_constant(f, rho), (f.max() - f.min()) / 2)


def steepness_ratios(prior, obj, probe_beliefs, rho, cands: CandidateSet | None = None,
                     tol: Tolerances = DEFAULT) -> np.ndarray:
    """``(Vhat(mu) - Vhat(mu0)) / d(mu, mu0)`` for each probe.

    ``Vhat`` is the concave closure relative to ``cands`` (a mesh by default).
    """
    prior = Prior.of(prior)
    rho = _metric(rho)
    if cands is None:
        cands = simplex_mesh(prior.n, 4 if prior.n <= 8 else 1)
    M = cands.beliefs
    values = obj.evaluate_many(M)
    base = _closure(prior.probs, M, values, tol)
    P = np.atleast_2d(np.asarray(probe_beliefs, dtype=float))
    out = np.empty(P.shape[0])
    for i, mu in enumerate(P):
        dist = kr_distance(mu, prior.probs, rho, tol)
        if dist <= 1e-12:
            raise ValueError("a probe coincides with the prior")
        out[i] = (_closure(mu, M, values, tol) - base) / dist
    return out


def steepness_estimate(prior, obj, probe_beliefs, rho, cands: CandidateSet | None = None,
                       tol: Tolerances = DEFAULT) -> float:
    """Largest steepness ratio over the probes; a diagnostic, not a verdict."""
    return float(steepness_ratios(prior, obj, probe_beliefs, rho, cands, tol).max())
