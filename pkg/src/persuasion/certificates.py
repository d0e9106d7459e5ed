"""Optimality certificates for (signal, price) pairs.

A price is dual feasible when its hyperplane dominates the objective at
every probe belief.  A Bayes-plausible signal and a dual-feasible price are
jointly optimal exactly when the price hyperplane touches the objective at
every posterior the signal uses; equivalently, when the hyperplane's value
at the prior equals the signal's expected objective.  Certificates are only
as strong as the probe set they were checked on, so every report names it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .beliefs import PriceFunction, Prior, Signal, bayes_plausibility_residual
from .concavify import CandidateSet
from .config import DEFAULT
from .errors import NotBayesPlausible


class Verdict(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE_ONLY = "FeasibleOnly"
    INVALID = "Invalid"


def _prices(price) -> np.ndarray:
    return price.prices if isinstance(price, PriceFunction) else np.asarray(price, dtype=float)


def _probe_matrix(probes) -> np.ndarray:
    if isinstance(probes, CandidateSet):
        return probes.beliefs
    return np.atleast_2d(np.asarray(probes, dtype=float))


def dual_violations(price, obj, probes) -> np.ndarray:
    """``V(mu) - <P, mu>`` at every probe."""
    M = _probe_matrix(probes)
    return obj.evaluate_many(M) - M @ _prices(price)


def check_dual_feasible(price, obj, probes) -> float:
    """Largest amount by which ``V`` exceeds the price hyperplane on ``probes``."""
    return float(dual_violations(price, obj, probes).max())


def weak_duality_gap(signal: Signal, price, prior, obj, tol: float = DEFAULT.plausibility) -> float:
    """``<P, mu0> - E_tau[V]``; nonnegative for every feasible pair."""
    prior = Prior.of(prior)
    res = bayes_plausibility_residual(signal, prior)
    if res > tol:
        raise NotBayesPlausible(f"signal barycenter misses the prior by {res:.3g}")
    return float(_prices(price) @ prior.probs - signal.value(obj))


@dataclass(frozen=True)
class SlacknessReport:
    residuals: np.ndarray  # <P, mu_i> - V(mu_i) per atom
    flagged: list  # atom indices in the support with residual beyond tol
    passed: bool


def check_complementary_slackness(signal: Signal, price, obj, tol: float = 1e-7,
                                  support_tol: float = DEFAULT.support) -> SlacknessReport:
    """Every atom with weight above ``support_tol`` must lie on the price hyperplane.

    A negative residual means the price is infeasible at that posterior and
    is flagged as well.
    """
    res = signal.posteriors @ _prices(price) - obj.evaluate_many(signal.posteriors)
    flagged = [i for i in range(signal.n_atoms) if signal.weights[i] > support_tol and abs(res[i]) > tol]
    return SlacknessReport(res, flagged, not flagged)


@dataclass(frozen=True)
class FullDisclosureReport:
    is_optimal: bool
    worst_violation: float
    price: PriceFunction
    worst_probe: np.ndarray


def full_disclosure_certificate(prior, obj, probes, tol: float = 1e-9) -> FullDisclosureReport:
    """Test full disclosure with the price ``P(w) = V(delta_w)``.

    Full disclosure is optimal iff ``E_mu[V(delta_w)] >= V(mu)`` at every
    belief; here "every" means every probe.
    """
    prior = Prior.of(prior)
    P = PriceFunction(obj.evaluate_many(np.eye(prior.n)))
    M = np.vstack([_probe_matrix(probes), prior.probs])
    viol = obj.evaluate_many(M) - M @ P.prices
    i = int(np.argmax(viol))
    return FullDisclosureReport(bool(viol[i] <= tol), float(viol[i]), P, M[i])


@dataclass
class Certificate:
    signal: Signal
    price: PriceFunction
    primal_value: float
    dual_value: float
    gap: float
    slackness: SlacknessReport
    verdict: Verdict
    plausibility_residual: float = 0.0
    max_violation: float = math.nan
    probes: str = ""
    worst_probe: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self, labels=None) -> dict:
        atoms = [
            {"weight": float(w), "posterior": [float(p) for p in mu], "slack": float(s)}
            for w, mu, s in zip(self.signal.weights, self.signal.posteriors, self.slackness.residuals)
        ]
        out = {
            "value": float(self.primal_value),
            "dual_value": float(self.dual_value),
            "gap": float(self.gap),
            "atoms": atoms,
            "price": [float(p) for p in self.price.prices],
            "probes": self.probes,
            "max_violation": float(self.max_violation),
            "plausibility_residual": float(self.plausibility_residual),
            "verdict": self.verdict.value,
        }
        if labels is not None:
            out["states"] = list(labels)
        out.update(self.extra)
        return out


def certify(signal: Signal, price, prior, obj, probes, tol: float = DEFAULT.report_gap,
            probe_name: str | None = None) -> Certificate:
    """Full check of a candidate pair.

    ``Invalid`` when the signal is not Bayes-plausible or the price is
    infeasible beyond ``tol`` on the probes; ``Optimal`` when in addition the
    gap and every slackness residual are within ``tol``; ``FeasibleOnly``
    otherwise.
    """
    prior = Prior.of(prior)
    P = PriceFunction(_prices(price))
    M = np.vstack([_probe_matrix(probes), signal.posteriors])
    viol = obj.evaluate_many(M) - M @ P.prices
    worst = int(np.argmax(viol))
    max_violation = float(viol[worst])
    residual = bayes_plausibility_residual(signal, prior)
    primal = signal.value(obj)
    dual = float(P.prices @ prior.probs)
    slack = check_complementary_slackness(signal, P, obj, tol)
    if residual > DEFAULT.plausibility or max_violation > tol:
        verdict = Verdict.INVALID
    elif dual - primal <= tol and slack.passed:
        verdict = Verdict.OPTIMAL
    else:
        verdict = Verdict.FEASIBLE_ONLY
    name = probe_name or f"{len(M)} beliefs"
    return Certificate(signal, P, primal, dual, dual - primal, slack, verdict, residual,
                       max_violation, name, M[worst])
