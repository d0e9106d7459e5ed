"""Two-dimensional persuasion with the product objective ``v(x) = x1 * x2``.

A linear revelation with slope ``a > 0`` discloses ``theta = w2 + a*w1`` and
nothing else.  When the posterior means it induces lie on a line
``x2 = a*x1 + b``, the quadratic

    p(x) = x1*x2 + (x2 - a*x1 - b)**2 / (4a)

is a convex price that touches ``v`` on that line, which certifies the
revelation as optimal.  The converse only holds on convex state spaces, so
a failed line test is reported as inconclusive rather than as suboptimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .beliefs import MomentComposed, PriceFunction, Prior, Signal, product
from .certificates import Certificate, Verdict, certify
from .concavify import simplex_mesh
from .moment import (MomentDistribution, MomentSolution, induce_moment_distribution, lift_price, merge_atoms,
                     moment_duality_residual, solve_moment_primal)

THETA_TOL = 1e-9


@dataclass(frozen=True)
class LineFit:
    is_line: bool
    b: float
    residual: float


@dataclass(frozen=True)
class LinearRevelation:
    a: float
    theta_atoms: list  # (theta, weight, conditional mean)
    signal: Signal
    G: MomentDistribution
    line_fit: LineFit


def _coords(coords) -> np.ndarray:
    S = np.asarray(coords, dtype=float)
    if S.ndim != 2 or S.shape[1] != 2:
        raise ValueError("states need two-dimensional coordinates")
    return S


def check_line_support(G: MomentDistribution, a: float, tol: float = 1e-9) -> LineFit:
    """Fit ``x2 = a*x1 + b`` with ``b`` the weighted mean offset."""
    off = G.points[:, 1] - a * G.points[:, 0]
    b = float(G.weights @ off)
    residual = float(np.abs(off - b).max())
    return LineFit(residual <= tol, b, residual)


def linear_revelation_signal(prior, coords, a: float, group_tol: float = THETA_TOL,
                             line_tol: float = 1e-9) -> LinearRevelation:
    """Signal revealing ``theta = w2 + a*w1``; states are grouped by ``theta``
    rounded to ``group_tol``."""
    if not a > 0:
        raise ValueError("slope a must be positive")
    S = _coords(coords)
    p = Prior.of(prior).probs
    if S.shape[0] != p.size:
        raise ValueError("one coordinate pair per state required")
    theta = S[:, 1] + a * S[:, 0]
    keys = np.round(theta / group_tol).astype(np.int64)
    atoms, beliefs, weights = [], [], []
    for key in np.unique(keys[p > 0]):
        members = (keys == key) & (p > 0)
        w = float(p[members].sum())
        mu = np.where(members, p, 0.0) / w
        x = mu @ S
        atoms.append((float(x[1] + a * x[0]), w, x))
        beliefs.append(mu)
        weights.append(w)
    signal = Signal(np.array(weights), np.array(beliefs))
    G = induce_moment_distribution(signal, S)
    return LinearRevelation(float(a), atoms, signal, G, check_line_support(G, a, line_tol))


@dataclass(frozen=True)
class QuadraticLinePrice:
    """``p(x) = x1*x2 + (x2 - a*x1 - b)**2 / (4a)``."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("slope a must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        out = x1 * x2 + (x2 - self.a * x1 - self.b) ** 2 / (4 * self.a)
        return float(out) if out.ndim == 0 else out

    def subgradient(self, x) -> np.ndarray:
        x1, x2 = np.asarray(x, dtype=float)
        r = (x2 - self.a * x1 - self.b) / (2 * self.a)
        return np.array([x2 - self.a * r, x1 + r])

    def hessian(self) -> np.ndarray:
        return np.array([[self.a / 2, 0.5], [0.5, 1 / (2 * self.a)]])

    def exact_hessian(self):
        """Hessian entries as fractions, with its exact determinant."""
        a = Fraction(self.a)
        H = ((a / 2, Fraction(1, 2)), (Fraction(1, 2), 1 / (2 * a)))
        return H, H[0][0] * H[1][1] - H[0][1] * H[1][0]


def closed_form_price(a: float, b: float) -> QuadraticLinePrice:
    return QuadraticLinePrice(float(a), float(b))


def price_identity_residual(rev: LinearRevelation, coords, price: PriceFunction) -> float:
    """Largest deviation of ``P(w)`` from ``w1*w2 + a*(x1(theta) - w1)**2``."""
    S = _coords(coords)
    a = rev.a
    means = {round(t / THETA_TOL): x for t, _, x in rev.theta_atoms}
    out = 0.0
    for w, P in zip(S, price.prices):
        key = round((w[1] + a * w[0]) / THETA_TOL)
        if key not in means:
            continue  # zero-probability state
        target = w[0] * w[1] + a * (means[key][0] - w[0]) ** 2
        out = max(out, abs(P - target))
    return out


def certify_linear_revelation(prior, coords, a: float, probes=None, tol: float = 1e-9,
                              line_tol: float = 1e-9) -> Certificate:
    """Certify the ``theta`` revelation with the closed-form quadratic price.

    ``Optimal`` needs the induced means on a line and the primal and dual
    values to agree; otherwise the sufficient condition does not apply and
    the verdict is ``FeasibleOnly`` (the pair is still reported).
    """
    prior = Prior.of(prior)
    S = _coords(coords)
    rev = linear_revelation_signal(prior, S, a, line_tol=line_tol)
    obj = MomentComposed(S, product)
    price = closed_form_price(a, rev.line_fit.b)
    P = lift_price(price, S)
    if probes is None:
        probes = simplex_mesh(prior.n, 4 if prior.n <= 10 else 2)
    cert = certify(rev.signal, P, prior, obj, probes, tol=max(tol, 1e-6))
    F0 = MomentDistribution.from_prior(prior, S)
    om = moment_duality_residual(rev.G, price, F0, product)
    _, det = price.exact_hessian()
    if cert.verdict is not Verdict.INVALID:
        ok = rev.line_fit.is_line and om <= max(tol, 1e-9) and det >= 0
        cert.verdict = Verdict.OPTIMAL if ok else Verdict.FEASIBLE_ONLY
    cert.extra.update({
        "theta_atoms": [{"theta": t, "weight": w, "mean": [float(v) for v in x]} for t, w, x in rev.theta_atoms],
        "line_fit": {"is_line": rev.line_fit.is_line, "b": rev.line_fit.b, "residual": rev.line_fit.residual},
        "moment_gap": float(om),
    })
    return cert


def pooling_gain(atom1, atom2) -> float:
    """Change in ``E[x1*x2]`` from merging two atoms ``(beta, x)`` at their barycenter."""
    (beta, x), (beta2, x2) = atom1, atom2
    x, x2 = np.asarray(x, dtype=float), np.asarray(x2, dtype=float)
    if beta <= 0 or beta2 <= 0:
        raise ValueError("atom weights must be positive")
    return float(-beta * beta2 / (beta + beta2) * (x2[0] - x[0]) * (x2[1] - x[1]))


def check_ordered_support(G, tol: float = 1e-9) -> bool:
    """True iff every pair of atoms is componentwise comparable."""
    X = G.points if isinstance(G, MomentDistribution) else np.atleast_2d(np.asarray(G, dtype=float))
    D = X[:, None, :] - X[None, :, :]
    up = np.all(D >= -tol, axis=2)
    down = np.all(D <= tol, axis=2)
    return bool(np.all(up | down))


def _unordered_pairs(X, tol):
    D = X[:, None, :] - X[None, :, :]
    bad = ~(np.all(D >= -tol, axis=2) | np.all(D <= tol, axis=2))
    return [(i, j) for i, j in zip(*np.nonzero(np.triu(bad)))]


def pool_unordered(G: MomentDistribution, tol: float = 1e-9):
    """Merge unordered atom pairs at their barycenters until the support is ordered.

    Each merge keeps ``G`` below ``F0`` in convex order and raises
    ``E_G[x1*x2]`` by the pair's pooling gain.  Returns ``(G, total gain)``.
    """
    w, X = np.array(G.weights), np.array(G.points)
    total = 0.0
    while True:
        pairs = _unordered_pairs(X, tol)
        if not pairs:
            return MomentDistribution(w, X), total
        gains = [pooling_gain((w[i], X[i]), (w[j], X[j])) for i, j in pairs]
        i, j = pairs[int(np.argmax(gains))]
        total += max(gains)
        x = (w[i] * X[i] + w[j] * X[j]) / (w[i] + w[j])
        keep = [k for k in range(len(w)) if k not in (i, j)]
        w, X = merge_atoms(np.append(w[keep], w[i] + w[j]), np.vstack([X[keep], x]))


@dataclass(frozen=True)
class ProductSolution:
    G: MomentDistribution
    value: float
    lp: MomentSolution  # last candidate LP, before pooling
    rounds: int


def solve_product_moment(F0: MomentDistribution, candidate_xs, rounds: int = 3, tol: float = 1e-9) -> ProductSolution:
    """Maximise ``E_G[x1*x2]`` over ``G <= F0`` in convex order.

    The candidate LP is re-solved with the barycenters of unordered atom
    pairs added, then any pair still unordered is pooled; the returned
    support is therefore ordered and its value is at least the LP value.
    """
    if F0.dim != 2:
        raise ValueError("two-dimensional moments required")
    xs = np.atleast_2d(np.asarray(candidate_xs, dtype=float))
    sol = solve_moment_primal(F0, product, xs)
    used = 0
    for used in range(1, rounds + 1):
        G = sol.G
        pairs = _unordered_pairs(G.points, tol)
        if not pairs:
            break
        extra = [(G.weights[i] * G.points[i] + G.weights[j] * G.points[j]) / (G.weights[i] + G.weights[j])
                 for i, j in pairs]
        xs = np.vstack([sol.candidates, extra])
        sol = solve_moment_primal(F0, product, xs)
    G, _ = pool_unordered(sol.G, tol)
    return ProductSolution(G, G.expect(product), sol, used)
