"""Finite-state Bayesian persuasion: solvers and optimality certificates."""

from __future__ import annotations

from .beliefs import (Belief, MomentComposed, Oracle, PiecewiseLinearMax, PriceFunction, Prior, Signal, StateSpace,
                      VertexTable, bayes_plausibility_residual, evaluate_objective, expectation, product,
                      sender_receiver_objective)
from .certificates import (Certificate, Verdict, certify, check_complementary_slackness, check_dual_feasible,
                           full_disclosure_certificate, weak_duality_gap)
from .concavify import (AdaptiveRefiner, CandidateSet, ConcavifyResult, check_supergradient, concave_closure,
                        concavify_grid, reduce_support, separation_oracle, simplex_mesh, solve_dual_cutting_plane)
from .config import DEFAULT, Tolerances
from .constrained import (ConstrainedCertificate, SideConstraint, check_constrained_optimality,
                          solve_constrained_primal)
from .errors import (EvaluationError, InfeasibleProblem, IterationLimit, NotBayesPlausible, NumericFailure,
                     OutOfHull, PersuasionError, SchemaError, SizeLimitExceeded)
from .lp import LinearProgram, LpSolution, LpStatus, solve_lp
from .metrics import GroundMetric, kr_distance, steepness_estimate
from .moment import (MomentDistribution, MomentMap, MomentPrice, check_convex_order, induce_moment_distribution,
                     lift_price, moment_price, obedience_multipliers, push_down_price, solve_moment_primal)
from .revelation import (LinearRevelation, certify_linear_revelation, check_line_support, check_ordered_support,
                         closed_form_price, linear_revelation_signal, pooling_gain)

__version__ = "0.1.0"
