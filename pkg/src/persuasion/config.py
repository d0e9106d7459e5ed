"""Numerical tolerances shared by every solver and checker."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    simplex: float = 1e-9  # probability vectors sum to one within this
    plausibility: float = 1e-8  # Bayes plausibility, sup norm
    feas: float = 1e-8  # LP primal / dual feasibility residuals
    gap: float = 1e-7  # LP primal-dual objective gap
    pivot: float = 1e-9  # smallest usable pivot element
    pricing: float = 1e-10  # reduced cost below -pricing enters the basis
    support: float = 1e-9  # atoms lighter than this are numeric dust
    cut: float = 1e-7  # violation accepted by the cutting-plane loop
    report_gap: float = 1e-6  # gap at which certificates are declared optimal
    merge: float = 1e-9  # moment atoms closer than this are merged

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT = Tolerances()
