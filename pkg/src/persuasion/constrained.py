"""Persuasion with linear side constraints ``E_tau[g_k] <= c_k``.

The grid LP gains one inequality row per constraint.  Its duals give a
state price ``P`` and multipliers ``lambda_k >= 0`` with

    <P, mu> + sum_k lambda_k g_k(mu) >= V(mu)   for every candidate mu,

and a feasible signal is optimal exactly when
``<P, mu0> + sum_k lambda_k c_k`` equals its expected objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import Oracle, PriceFunction, Prior, Signal
from .certificates import Verdict
from .concavify import CandidateSet, price_from_duals
from .config import DEFAULT, Tolerances
from .errors import InfeasibleProblem, NumericFailure
from .lp import LinearProgram, LpStatus, solve_lp


@dataclass(frozen=True)
class SideConstraint:
    """``E_tau[g(mu)] <= c``; ``g`` is any objective-like evaluator."""

    g: object
    c: float
    name: str = ""

    @classmethod
    def equal(cls, g, c: float, name: str = "") -> tuple["SideConstraint", "SideConstraint"]:
        """An equality as the pair ``E g <= c`` and ``E(-g) <= -c``."""
        neg = Oracle(lambda M: -g.evaluate_many(M), vectorized=True)
        return cls(g, float(c), name), cls(neg, -float(c), f"-{name}" if name else "")

    def expected(self, signal: Signal) -> float:
        return float(signal.weights @ self.g.evaluate_many(signal.posteriors))


@dataclass(frozen=True)
class ConstrainedResult:
    signal: Signal
    value: float
    multipliers: np.ndarray
    price: PriceFunction
    dual_value: float
    gap: float
    iterations: int


def _g_matrix(constraints, M) -> np.ndarray:
    if not constraints:
        return np.zeros((0, M.shape[0]))
    return np.vstack([k.g.evaluate_many(M) for k in constraints])


def solve_constrained_primal(prior, obj, constraints, cands: CandidateSet,
                             tol: Tolerances = DEFAULT) -> ConstrainedResult:
    """Best Bayes-plausible signal on ``cands`` meeting every side constraint.

    A zero-objective feasibility LP runs first and raises
    :class:`InfeasibleProblem` when no candidate signal satisfies the
    constraints.
    """
    prior = Prior.of(prior)
    n = prior.n
    M = cands.beliefs
    if M.shape[1] != n:
        raise ValueError("candidate beliefs and prior have different dimensions")
    values = obj.evaluate_many(M)
    Gm = _g_matrix(constraints, M)
    c = np.array([k.c for k in constraints], dtype=float)
    A_eq = np.vstack([M.T, np.ones(M.shape[0])])
    b_eq = np.append(prior.probs, 1.0)
    ub = dict(A_ub=Gm, b_ub=c) if constraints else {}

    phase1 = solve_lp(LinearProgram(np.zeros(M.shape[0]), A_eq, b_eq, **ub), tol)
    if phase1.status is LpStatus.INFEASIBLE:
        raise InfeasibleProblem("no signal on the candidate grid satisfies the side constraints")

    sol = solve_lp(LinearProgram(-values, A_eq, b_eq, **ub), tol)
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericFailure(f"constrained LP ended with status {sol.status.value}")
    keep = sol.x > tol.support
    signal = Signal(sol.x[keep] / sol.x[keep].sum(), M[keep])
    lam = sol.dual_ub if constraints else np.zeros(0)
    P = PriceFunction(price_from_duals(sol.dual_eq, n))
    dual = float(P.prices @ prior.probs + lam @ c)
    value = -sol.objective_value
    return ConstrainedResult(signal, value, lam, P, dual, dual - value, sol.iterations)


@dataclass
class ConstrainedCertificate:
    signal: Signal
    price: PriceFunction
    multipliers: np.ndarray
    gap: float
    verdict: Verdict
    primal_value: float
    dual_value: float
    max_violation: float
    constraint_slack: np.ndarray  # c_k - E_tau[g_k]
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "value": float(self.primal_value),
            "dual_value": float(self.dual_value),
            "gap": float(self.gap),
            "atoms": [{"weight": float(w), "posterior": [float(p) for p in mu]}
                      for w, mu in zip(self.signal.weights, self.signal.posteriors)],
            "price": [float(p) for p in self.price.prices],
            "multipliers": [float(x) for x in self.multipliers],
            "constraint_slack": [float(x) for x in self.constraint_slack],
            "max_violation": float(self.max_violation),
            "verdict": self.verdict.value,
        }
        out.update(self.extra)
        return out


def check_constrained_optimality(signal: Signal, price, multipliers, constraints, prior, obj,
                                 probes=None, tol: float = 1e-6) -> ConstrainedCertificate:
    """Verify a (signal, price, multipliers) triple.

    ``gap`` is ``|<P, mu0> + sum lambda_k c_k - E_tau[V]|``.  The triple is
    ``Invalid`` when the signal breaks a constraint or Bayes plausibility, or
    the dual inequality fails on the probes (the signal's posteriors are
    always probed); ``Optimal`` when additionally the gap is within ``tol``.
    """
    prior = Prior.of(prior)
    lam = np.asarray(multipliers, dtype=float).reshape(-1)
    if lam.size != len(constraints):
        raise ValueError("one multiplier per constraint required")
    if np.any(lam < -1e-9):
        raise ValueError("multipliers must be nonnegative")
    P = price if isinstance(price, PriceFunction) else PriceFunction(np.asarray(price, dtype=float))
    c = np.array([k.c for k in constraints], dtype=float)
    primal = signal.value(obj)
    dual = float(P.prices @ prior.probs + lam @ c)
    gap = abs(dual - primal)

    M = signal.posteriors
    if probes is not None:
        extra = probes.beliefs if isinstance(probes, CandidateSet) else np.atleast_2d(np.asarray(probes, dtype=float))
        M = np.vstack([extra, M])
    viol = obj.evaluate_many(M) - M @ P.prices - lam @ _g_matrix(constraints, M)
    max_violation = float(viol.max())
    slack = c - np.array([k.expected(signal) for k in constraints])
    plausible = np.abs(signal.barycenter() - prior.probs).max() <= DEFAULT.plausibility
    if not plausible or np.any(slack < -tol) or max_violation > tol:
        verdict = Verdict.INVALID
    elif gap <= tol:
        verdict = Verdict.OPTIMAL
    else:
        verdict = Verdict.FEASIBLE_ONLY
    return ConstrainedCertificate(signal, P, lam, gap, verdict, primal, dual, max_violation, slack)
