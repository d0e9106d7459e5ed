"""Dense revised simplex solver with dual multipliers.

Every finite problem in the toolkit (grid concavification, moment prices,
martingale couplings, Kantorovich-Rubinstein distances, constrained
persuasion) is compiled to a :class:`LinearProgram` and handed to
:func:`solve_lp`.  The dual multipliers it returns are the price functions
the rest of the package reasons about, so the solver certifies them: an
``OPTIMAL`` result always passes primal feasibility, dual feasibility and
zero-gap checks.

Sign conventions for a minimisation ``min c.x  s.t.  A_eq x = b_eq,
A_ub x <= b_ub, lb <= x <= ub``:

* ``dual_eq[i]`` is the sensitivity of the optimal value to ``b_eq[i]``;
* ``dual_ub[j] >= 0`` and the sensitivity to ``b_ub[j]`` is ``-dual_ub[j]``.

So the dual problem reads ``max b_eq.y - b_ub.lam`` subject to the reduced
costs ``c - A_eq^T y + A_ub^T lam`` having the sign required by the bounds.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .config import DEFAULT, Tolerances
from .errors import NumericFailure

log = logging.getLogger(__name__)


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """``min c.x`` subject to equality rows, inequality rows and bounds.

    Bounds default to ``x >= 0``.  Use ``-np.inf`` / ``np.inf`` for free
    directions.
    """

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "eq")
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "ub")
        self.lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, float), (n,)).copy()
        for name in ("c", "A_eq", "b_eq", "A_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite coefficient in {name}")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)) or np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("invalid variable bounds")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def standard_form(self) -> "StandardForm":
        return StandardForm.build(self)


def _rows(A, b, n, name):
    if A is None:
        if b is not None and np.size(b):
            raise ValueError(f"b_{name} given without A_{name}")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[0] == 0:
        return np.zeros((0, n)), np.zeros(0)
    if A.shape != (b.size, n):
        raise ValueError(f"A_{name} has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class StandardForm:
    """``min c.y + const  s.t.  A y = b, y >= 0`` plus the map back to ``x``.

    ``x = offset + T @ y[:T.shape[1]]``.  Rows are ordered equality rows,
    inequality rows (with slacks), then finite upper-bound rows.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    const: float
    T: np.ndarray
    offset: np.ndarray
    n_eq: int
    n_ub: int

    @classmethod
    def build(cls, lp: LinearProgram) -> "StandardForm":
        n = lp.n_vars
        cols = []  # (original var, coefficient) per structural column
        offset = np.zeros(n)
        bound_rows = []  # (structural column, width)
        for j in range(n):
            lo, hi = lp.lb[j], lp.ub[j]
            if np.isfinite(lo):
                offset[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    bound_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        ns = len(cols)
        T = np.zeros((n, ns))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        me, mi, mb = lp.A_eq.shape[0], lp.A_ub.shape[0], len(bound_rows)
        n_slack = mi + mb
        A = np.zeros((me + mi + mb, ns + n_slack))
        b = np.zeros(me + mi + mb)
        A[:me, :ns] = lp.A_eq @ T
        b[:me] = lp.b_eq - lp.A_eq @ offset
        A[me:me + mi, :ns] = lp.A_ub @ T
        A[me:me + mi, ns:ns + mi] = np.eye(mi)
        b[me:me + mi] = lp.b_ub - lp.A_ub @ offset
        for r, (k, width) in enumerate(bound_rows):
            A[me + mi + r, k] = 1.0
            A[me + mi + r, ns + mi + r] = 1.0
            b[me + mi + r] = width
        c = np.concatenate([lp.c @ T, np.zeros(n_slack)])
        return cls(A, b, c, float(lp.c @ offset), T, offset, me, mi)

    def to_x(self, y: np.ndarray) -> np.ndarray:
        return self.offset + self.T @ y[: self.T.shape[1]]


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    objective_value: float = np.nan
    dual_value: float = np.nan
    iterations: int = 0
    # standard-form certificates, see StandardForm
    ray: np.ndarray | None = None  # unbounded: A r = 0, r >= 0, c.r < 0
    farkas: np.ndarray | None = None  # infeasible: A^T u <= 0, b.u > 0
    std_y: np.ndarray | None = None
    std_duals: np.ndarray | None = None
    x_ray: np.ndarray | None = None  # unbounded direction in x space
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Unbounded(Exception):
    def __init__(self, ray):
        self.ray = ray


class _Simplex:
    """Revised simplex on ``min c.y, A y = b, y >= 0`` from a feasible basis.

    Uses largest-coefficient pricing and falls back to Bland's rule after a
    run of degenerate pivots, which rules out cycling.
    """

    def __init__(self, A, b, c, basis, tol: Tolerances, max_iter: int, allowed=None):
        self.A, self.b, self.c = A, b, c
        self.basis = list(basis)
        self.tol = tol
        self.max_iter = max_iter
        self.allowed = np.ones(A.shape[1], bool) if allowed is None else allowed
        self.iterations = 0

    def factor(self):
        return linalg.lu_factor(self.A[:, self.basis])

    def run(self):
        m, n = self.A.shape
        degenerate_run = 0
        bland = False
        while True:
            lu = self.factor()
            xB = linalg.lu_solve(lu, self.b)
            y = linalg.lu_solve(lu, self.c[self.basis], trans=1)
            d = self.c - self.A.T @ y
            d[self.basis] = 0.0
            d[~self.allowed] = 0.0
            candidates = np.flatnonzero(d < -self.tol.pricing)
            if candidates.size == 0:
                return xB, y
            if self.iterations >= self.max_iter:
                raise NumericFailure(f"simplex iteration limit {self.max_iter} reached")
            entering = candidates[0] if bland else candidates[np.argmin(d[candidates])]
            u = linalg.lu_solve(lu, self.A[:, entering])
            pos = np.flatnonzero(u > self.tol.pivot)
            if pos.size == 0:
                ray = np.zeros(n)
                ray[entering] = 1.0
                ray[self.basis] = -u
                raise _Unbounded(ray)
            ratios = np.maximum(xB[pos], 0.0) / u[pos]
            best = ratios.min()
            if bland:
                ties = pos[ratios <= best + self.tol.pivot]
                big = ties[u[ties] >= 1e-3 * u[ties].max()]
                leave = min(big, key=lambda r: self.basis[r])
            else:
                # Harris pass: relax the bounds slightly, then take the largest pivot
                bound = ((np.maximum(xB[pos], 0.0) + self.tol.feas) / u[pos]).min()
                ties = pos[ratios <= bound]
                leave = ties[np.argmax(u[ties])]
                best = ratios[np.searchsorted(pos, leave)]
            if best <= self.tol.pivot:
                degenerate_run += 1
                if degenerate_run > 2 * m:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
            log.debug("pivot %d: in=%d out=%d step=%.3g", self.iterations, entering, self.basis[leave], best)
            self.basis[leave] = int(entering)
            self.iterations += 1


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT, max_iter: int = 50_000) -> LpSolution:
    """Solve ``lp`` with a two-phase revised simplex method.

    Raises :class:`NumericFailure` when an optimal basis fails the
    feasibility or duality-gap self checks.
    """
    sf = lp.standard_form()
    A, b, c = sf.A, sf.b, sf.c
    m, n = A.shape

    if m == 0:
        if np.any(c < -tol.pricing):
            ray = (c < -tol.pricing).astype(float)
            return LpSolution(LpStatus.UNBOUNDED, ray=ray, x_ray=sf.T @ ray[: sf.T.shape[1]])
        y = np.zeros(n)
        return _finish(lp, sf, y, np.zeros(0), 0, tol)

    # phase 1: artificial basis on rows flipped to b >= 0
    sign = np.where(b < 0, -1.0, 1.0)
    A1 = np.hstack([A * sign[:, None], np.eye(m)])
    b1 = b * sign
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    ph1 = _Simplex(A1, b1, c1, range(n, n + m), tol, max_iter)
    xB, u1 = ph1.run()
    infeas = float(c1[ph1.basis] @ xB)
    if infeas > tol.feas * max(1.0, np.abs(b).max()):
        farkas = u1 * sign  # A^T farkas <= 0 and b.farkas > 0 on the original rows
        return LpSolution(LpStatus.INFEASIBLE, farkas=farkas, iterations=ph1.iterations,
                          residuals={"phase1": infeas})

    # drive remaining artificials out; rows where that is impossible are redundant
    basis = list(ph1.basis)
    rows = list(range(m))
    changed = True
    while changed:
        changed = False
        for r, j in enumerate(basis):
            if j < n:
                continue
            Binv_row = linalg.solve(A1[np.ix_(rows, basis)].T, np.eye(len(rows))[r])
            row = Binv_row @ A1[rows, :n]
            row[[k for k in basis if k < n]] = 0.0
            k = int(np.argmax(np.abs(row)))
            if abs(row[k]) > 1e-7:
                basis[r] = k
            else:
                rows.remove(j - n)  # the artificial's own row is a combination of the others
                del basis[r]
            changed = True
            break
    ph2 = _Simplex(A1[rows, :n], b1[rows], c, basis, tol, max_iter)
    try:
        xB, y_kept = ph2.run()
    except _Unbounded as exc:
        return LpSolution(LpStatus.UNBOUNDED, ray=exc.ray, x_ray=sf.T @ exc.ray[: sf.T.shape[1]],
                          iterations=ph1.iterations + ph2.iterations)
    y = np.zeros(n)
    y[ph2.basis] = xB
    duals = np.zeros(m)
    duals[rows] = y_kept
    duals *= sign
    return _finish(lp, sf, y, duals, ph1.iterations + ph2.iterations, tol)


def _finish(lp, sf, y, duals, iterations, tol):
    A, b, c = sf.A, sf.b, sf.c
    y = np.where(np.abs(y) < 1e-13, 0.0, y)
    scale = max(1.0, np.abs(b).max(initial=0.0), np.abs(c).max(initial=0.0))
    primal_res = float(np.abs(A @ y - b).max(initial=0.0))
    neg = float(max(0.0, -y.min(initial=0.0)))
    reduced = c - A.T @ duals
    dual_res = float(max(0.0, -reduced.min(initial=0.0)))
    pval = float(c @ y) + sf.const
    dval = float(b @ duals) + sf.const
    res = {"primal": max(primal_res, neg), "dual": dual_res, "gap": abs(pval - dval)}
    if res["primal"] > tol.feas * scale or res["dual"] > tol.feas * scale or res["gap"] > tol.gap * scale:
        raise NumericFailure(f"LP self-check failed: {res}")
    me, mi = sf.n_eq, sf.n_ub
    return LpSolution(
        LpStatus.OPTIMAL,
        x=sf.to_x(y),
        dual_eq=duals[:me].copy(),
        dual_ub=np.maximum(-duals[me:me + mi], 0.0),
        objective_value=pval,
        dual_value=dval,
        iterations=iterations,
        std_y=y,
        std_duals=duals,
        residuals=res,
    )
