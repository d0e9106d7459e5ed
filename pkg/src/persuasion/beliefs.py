"""States, beliefs, signals, objectives and prices.

Beliefs are dense probability vectors over a finite state space.  A signal
is a finite list of ``(weight, posterior)`` atoms; it is Bayes-plausible for
a prior when the weighted posteriors average back to that prior.

Objectives come in four flavours, all exposing ``obj(mu)`` for one belief
and ``obj.evaluate_many(M)`` for a matrix whose rows are beliefs:

* :class:`VertexTable` - values tabulated on a fixed finite set of beliefs;
* :class:`PiecewiseLinearMax` - maximum of finitely many affine functions;
* :class:`MomentComposed` - ``v(E_mu[m])`` for a moment map ``m``;
* :class:`Oracle` - an arbitrary user callback.

Oracle callbacks may be invoked from several worker threads at once when
``jobs > 1``; they must be safe to call concurrently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .config import DEFAULT
from .errors import EvaluationError


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    labels: tuple
    coords: np.ndarray | None = None

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise ValueError("state space must contain at least one state")
        if len(set(labels)) != len(labels):
            raise ValueError("state labels must be unique")
        object.__setattr__(self, "labels", labels)
        if self.coords is not None:
            coords = _frozen(self.coords)
            if coords.ndim == 1:
                coords = _frozen(coords[:, None])
            if coords.shape[0] != len(labels) or coords.shape[1] < 1:
                raise ValueError("coords must have one row of dimension >= 1 per state")
            object.__setattr__(self, "coords", coords)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int | None:
        return None if self.coords is None else self.coords.shape[1]

    @classmethod
    def from_coords(cls, coords) -> "StateSpace":
        coords = np.asarray(coords, dtype=float)
        return cls(tuple(range(len(coords))), coords)


@dataclass(frozen=True)
class Belief:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("belief must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > DEFAULT.simplex:
            raise ValueError(f"not a probability vector: {p}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def dirac(cls, n: int, i: int) -> "Belief":
        p = np.zeros(n)
        p[i] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, n: int) -> "Belief":
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)


@dataclass(frozen=True)
class Prior:
    belief: Belief

    @classmethod
    def of(cls, probs) -> "Prior":
        if isinstance(probs, Prior):
            return probs
        if isinstance(probs, Belief):
            return cls(probs)
        return cls(Belief(probs))

    @property
    def probs(self) -> np.ndarray:
        return self.belief.probs

    @property
    def n(self) -> int:
        return self.belief.n

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.probs > 0))


@dataclass(frozen=True)
class Signal:
    """Finitely supported distribution over posteriors.

    ``weights[i]`` is the probability of posterior ``posteriors[i]``.
    """

    weights: np.ndarray
    posteriors: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        M = _frozen(np.atleast_2d(self.posteriors))
        if w.ndim != 1 or M.shape[0] != w.size:
            raise ValueError("one weight per posterior required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > DEFAULT.simplex:
            raise ValueError(f"signal weights must be a probability vector, got sum {w.sum()}")
        if np.any(M < 0) or np.any(np.abs(M.sum(axis=1) - 1.0) > DEFAULT.simplex):
            raise ValueError("every posterior must be a probability vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "posteriors", M)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, object]]) -> "Signal":
        w = [a[0] for a in atoms]
        M = [np.asarray(a[1], dtype=float) for a in atoms]
        return cls(np.array(w), np.array(M))

    @classmethod
    def full_disclosure(cls, prior) -> "Signal":
        p = Prior.of(prior).probs
        keep = np.flatnonzero(p > 0)
        return cls(p[keep], np.eye(p.size)[keep])

    @classmethod
    def no_disclosure(cls, prior) -> "Signal":
        p = Prior.of(prior).probs
        return cls(np.array([1.0]), p[None, :])

    @property
    def atoms(self) -> list[tuple[float, Belief]]:
        return [(float(w), Belief(mu)) for w, mu in zip(self.weights, self.posteriors)]

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    def barycenter(self) -> np.ndarray:
        return self.weights @ self.posteriors

    def support(self, tol: float = DEFAULT.support) -> "Signal":
        """Drop atoms lighter than ``tol`` and renormalise."""
        keep = self.weights > tol
        w = self.weights[keep]
        return Signal(w / w.sum(), self.posteriors[keep])

    def value(self, obj: "ObjectiveSpec") -> float:
        return float(self.weights @ obj.evaluate_many(self.posteriors))


@dataclass(frozen=True)
class PriceFunction:
    """A price per state; its linear extension is a hyperplane over beliefs."""

    prices: np.ndarray

    def __post_init__(self):
        p = _frozen(self.prices)
        if p.ndim != 1 or not np.all(np.isfinite(p)):
            raise ValueError("prices must be a finite vector")
        object.__setattr__(self, "prices", p)

    def __call__(self, mu) -> float:
        return expectation(mu, self.prices)

    def on(self, M) -> np.ndarray:
        """Hyperplane values at each row of ``M``."""
        return np.asarray(M, dtype=float) @ self.prices

    def shifted(self, delta) -> "PriceFunction":
        return PriceFunction(self.prices + delta)


# -- objectives ---------------------------------------------------------------


class _Objective:
    def __call__(self, mu) -> float:
        return float(self.evaluate_many(np.asarray(mu, dtype=float)[None, :])[0])

    def evaluate_many(self, M, jobs: int = 1) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class VertexTable(_Objective):
    """Values tabulated on a finite set of beliefs (rows of ``beliefs``)."""

    beliefs: np.ndarray
    values: np.ndarray
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        B = _frozen(np.atleast_2d(self.beliefs))
        v = _frozen(self.values)
        if v.shape != (B.shape[0],):
            raise ValueError("one value per tabulated belief required")
        object.__setattr__(self, "beliefs", B)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_index", {_key(b): i for i, b in enumerate(B)})

    def evaluate_many(self, M, jobs: int = 1) -> np.ndarray:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        out = np.empty(M.shape[0])
        for r, mu in enumerate(M):
            i = self._index.get(_key(mu))
            if i is None:
                raise EvaluationError(f"belief {mu} is not in the table")
            out[r] = self.values[i]
        return out


def _key(mu, digits: int = 9):
    return tuple(np.round(np.asarray(mu, dtype=float), digits) + 0.0)


@dataclass(frozen=True)
class PiecewiseLinearMax(_Objective):
    """``V(mu) = max_k (slopes[k] . mu + intercepts[k])``."""

    slopes: np.ndarray
    intercepts: np.ndarray | None = None

    def __post_init__(self):
        S = _frozen(np.atleast_2d(self.slopes))
        if S.shape[0] == 0:
            raise ValueError("at least one affine piece required")
        b = np.zeros(S.shape[0]) if self.intercepts is None else self.intercepts
        b = _frozen(b)
        if b.shape != (S.shape[0],):
            raise ValueError("one intercept per piece required")
        object.__setattr__(self, "slopes", S)
        object.__setattr__(self, "intercepts", b)

    @property
    def vertex_slopes(self) -> np.ndarray:
        """Each piece as a per-state vector (intercept folded in)."""
        return self.slopes + self.intercepts[:, None]

    def evaluate_many(self, M, jobs: int = 1) -> np.ndarray:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return (M @ self.slopes.T + self.intercepts).max(axis=1)


@dataclass(frozen=True)
class MomentComposed(_Objective):
    """``V(mu) = v(E_mu[m])``.

    ``v`` receives an array whose last axis has length ``N`` and must return
    the values over the leading axes (``product`` below is an example).
    """

    moment_map: np.ndarray
    v: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        m = _frozen(self.moment_map)
        if m.ndim == 1:
            m = _frozen(m[:, None])
        object.__setattr__(self, "moment_map", m)

    def moments(self, M) -> np.ndarray:
        return np.atleast_2d(np.asarray(M, dtype=float)) @ self.moment_map

    def evaluate_many(self, M, jobs: int = 1) -> np.ndarray:
        return np.asarray(self.v(self.moments(M)), dtype=float).reshape(-1)


@dataclass(frozen=True)
class Oracle(_Objective):
    """Opaque evaluation callback.

    ``func(mu) -> float`` by default; with ``vectorized=True`` it receives the
    whole belief matrix and returns one value per row.
    """

    func: Callable
    vectorized: bool = False

    def evaluate_many(self, M, jobs: int = 1) -> np.ndarray:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        try:
            if self.vectorized:
                return np.asarray(self.func(M), dtype=float).reshape(M.shape[0])
            if jobs > 1 and M.shape[0] > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    return np.fromiter(pool.map(self.func, M), float, M.shape[0])
            return np.fromiter((self.func(mu) for mu in M), float, M.shape[0])
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"objective evaluation failed: {exc}") from exc


ObjectiveSpec = Union[VertexTable, PiecewiseLinearMax, MomentComposed, Oracle]


def product(x: np.ndarray) -> np.ndarray:
    """``v(x1, x2) = x1 * x2``."""
    x = np.asarray(x, dtype=float)
    return x[..., 0] * x[..., 1]


def sender_receiver_objective(sender, receiver) -> Oracle:
    """Indirect utility of a sender facing a best-responding receiver.

    ``sender[w, a]`` and ``receiver[w, a]`` are utilities in state ``w`` from
    action ``a``.  The receiver picks ``argmax_a E_mu[receiver[., a]]``, ties
    broken in the sender's favour, so ``V`` is upper semi-continuous and
    piecewise linear with at most one piece per action.
    """
    S = np.asarray(sender, dtype=float)
    R = np.asarray(receiver, dtype=float)
    if S.shape != R.shape:
        raise ValueError("sender and receiver utilities must have the same shape")

    def V(M):
        ur = M @ R
        us = M @ S
        best = ur.max(axis=1, keepdims=True)
        us = np.where(ur >= best - 1e-12, us, -np.inf)
        return us.max(axis=1)

    return Oracle(V, vectorized=True)


def evaluate_objective(obj: ObjectiveSpec, mu) -> float:
    return obj(np.asarray(mu, dtype=float))


def expectation(mu, f) -> float:
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    if mu.shape != f.shape:
        raise ValueError(f"dimension mismatch: belief {mu.shape} vs function {f.shape}")
    return float(mu @ f)


def bayes_plausibility_residual(sig: Signal, prior) -> float:
    p = Prior.of(prior).probs
    return float(np.abs(sig.barycenter() - p).max())
