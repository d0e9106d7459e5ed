"""JSON instance files.

An instance is a JSON object::

    {
      "states": ["w1", "w2", ...],
      "coords": [[...], ...],            # optional, one vector per state
      "prior": [...],
      "objective": {"type": ..., ...},
      "moment_map": [[...], ...],        # optional, defaults to coords
      "moment_objective": {"type": ...}, # optional, v for moment commands
      "constraints": [{"g": {...}, "c": 0.5, "kind": "le"}],
      "options": {"mesh_k": 4, "tol": 1e-6, "max_iters": 1000, "seed": 0, "a": 1.0}
    }

Objective types: ``piecewise_linear_max`` (slopes, intercepts),
``vertex_table`` (beliefs, values), ``receiver_action`` (sender, receiver:
state-by-action utilities) and ``moment`` (``v`` a moment function, optional
``moment_map``).  Moment functions: ``product``, ``quadratic`` (Q, l, c),
``max_affine`` (slopes, intercepts) and ``table`` (points, values).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .beliefs import (MomentComposed, PiecewiseLinearMax, Prior, StateSpace, VertexTable, product,
                      sender_receiver_objective)
from .constrained import SideConstraint
from .errors import EvaluationError, SchemaError


def _array(spec: dict, key: str, ndim: int | None = None) -> np.ndarray:
    if key not in spec:
        raise SchemaError(f"missing field {key!r}")
    try:
        a = np.asarray(spec[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field {key!r} is not numeric") from exc
    if ndim is not None and a.ndim != ndim:
        raise SchemaError(f"field {key!r} must have {ndim} dimension(s)")
    if not np.all(np.isfinite(a)):
        raise SchemaError(f"field {key!r} has non-finite entries")
    return a


@dataclass(frozen=True)
class MomentFunction:
    """Named moment-space function with a vectorised call on ``(..., N)`` arrays."""

    kind: str
    func: Callable = field(repr=False)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def parse_moment_function(spec: dict) -> MomentFunction:
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind == "product":
        return MomentFunction(kind, product)
    if kind == "quadratic":
        Q = np.atleast_2d(_array(spec, "Q"))
        l = _array(spec, "l", 1) if "l" in spec else np.zeros(Q.shape[0])
        c = float(spec.get("c", 0.0))
        return MomentFunction(kind, lambda x: np.einsum("...i,ij,...j->...", x, Q, x) + x @ l + c)
    if kind == "max_affine":
        S = _array(spec, "slopes", 2)
        b = _array(spec, "intercepts", 1) if "intercepts" in spec else np.zeros(S.shape[0])
        return MomentFunction(kind, lambda x: (x @ S.T + b).max(axis=-1))
    if kind == "table":
        pts = np.atleast_2d(_array(spec, "points"))
        vals = _array(spec, "values", 1)
        index = {tuple(np.round(p, 9) + 0.0): v for p, v in zip(pts, vals)}

        def lookup(x):
            X = np.atleast_2d(x)
            out = []
            for p in X.reshape(-1, X.shape[-1]):
                key = tuple(np.round(p, 9) + 0.0)
                if key not in index:
                    raise EvaluationError(f"moment {p} is not in the table")
                out.append(index[key])
            return np.array(out).reshape(X.shape[:-1])

        return MomentFunction(kind, lookup)
    raise SchemaError(f"unknown moment function type {kind!r}")


def parse_objective(spec: dict, n: int, moment_map=None):
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind == "piecewise_linear_max":
        S = np.atleast_2d(_array(spec, "slopes"))
        b = _array(spec, "intercepts", 1) if "intercepts" in spec else None
        obj = PiecewiseLinearMax(S, b)
        if obj.slopes.shape[1] != n:
            raise SchemaError("slopes must have one entry per state")
        return obj
    if kind == "vertex_table":
        return VertexTable(np.atleast_2d(_array(spec, "beliefs")), _array(spec, "values", 1))
    if kind == "receiver_action":
        S = _array(spec, "sender", 2)
        R = _array(spec, "receiver", 2)
        if S.shape[0] != n:
            raise SchemaError("utilities need one row per state")
        return sender_receiver_objective(S, R)
    if kind == "moment":
        m = _array(spec, "moment_map") if "moment_map" in spec else moment_map
        if m is None:
            raise SchemaError("moment objective needs a moment map or coordinates")
        m = np.asarray(m, dtype=float)
        m = m[:, None] if m.ndim == 1 else m
        if m.shape[0] != n:
            raise SchemaError("moment map needs one row per state")
        return MomentComposed(m, parse_moment_function(spec.get("v", {})))
    raise SchemaError(f"unknown objective type {kind!r}")


@dataclass(frozen=True)
class Instance:
    states: StateSpace
    prior: Prior
    objective: object
    moment_map: np.ndarray | None
    moment_objective: MomentFunction | None
    constraints: tuple
    options: dict
    raw: dict = field(repr=False)

    @property
    def n(self) -> int:
        return self.prior.n

    @property
    def labels(self) -> list:
        return list(self.states.labels)


def parse_instance(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise SchemaError("instance must be a JSON object")
    prior_arr = _array(data, "prior", 1)
    n = prior_arr.size
    labels = data.get("states", [f"w{i + 1}" for i in range(n)])
    if not isinstance(labels, list) or len(labels) != n:
        raise SchemaError("states must list one label per prior entry")
    coords = _array(data, "coords") if "coords" in data else None
    if coords is not None and coords.shape[0] != n:
        raise SchemaError("coords need one row per state")
    try:
        prior = Prior.of(prior_arr)
        states = StateSpace(tuple(str(s) for s in labels), coords)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    m = _array(data, "moment_map") if "moment_map" in data else coords
    if m is not None and m.ndim == 1:
        m = m[:, None]
    if "objective" in data:
        obj = parse_objective(data["objective"], n, m)
    elif "moment_objective" in data and m is not None:
        obj = MomentComposed(m, parse_moment_function(data["moment_objective"]))
    else:
        raise SchemaError("missing field 'objective'")
    v = None
    if "moment_objective" in data:
        v = parse_moment_function(data["moment_objective"])
    elif isinstance(obj, MomentComposed):
        v = obj.v
        m = np.asarray(obj.moment_map)
    constraints = []
    for i, spec in enumerate(data.get("constraints", [])):
        if not isinstance(spec, dict) or "g" not in spec or "c" not in spec:
            raise SchemaError(f"constraint {i} needs 'g' and 'c'")
        g = parse_objective(spec["g"], n, m)
        name = str(spec.get("name", f"g{i + 1}"))
        kind = spec.get("kind", "le")
        if kind == "le":
            constraints.append(SideConstraint(g, float(spec["c"]), name))
        elif kind == "eq":
            constraints.extend(SideConstraint.equal(g, float(spec["c"]), name))
        else:
            raise SchemaError(f"constraint kind must be 'le' or 'eq', got {kind!r}")
    options = data.get("options", {})
    if not isinstance(options, dict):
        raise SchemaError("options must be an object")
    return Instance(states, prior, obj, m, v, tuple(constraints), dict(options), data)


def load_instance(path) -> Instance:
    with open(Path(path), encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON: {exc}") from exc
    return parse_instance(data)
