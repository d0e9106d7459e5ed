"""Command-line front end.

Exit codes: 0 success, 1 unreadable or schema-invalid input, 2 an
``Invalid`` verdict (``solve`` and friends) or a certificate that does not
certify optimality (``certify``).  Results go to standard output as JSON
(CSV for ``plot-data``); diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .beliefs import MomentComposed, PriceFunction, Signal
from .certificates import Verdict, certify
from .concavify import (AdaptiveRefiner, CandidateSet, concave_closure, concavify_grid, mesh_size, simplex_mesh,
                        solve_dual_cutting_plane)
from .config import DEFAULT
from .constrained import check_constrained_optimality, solve_constrained_primal
from .errors import EvaluationError, IterationLimit, PersuasionError, SchemaError
from .instance import Instance, load_instance
from .metrics import GroundMetric, kr_distance
from .moment import MomentDistribution, solve_moment_primal

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2
AUTO_MESH_LIMIT = 6000
RANDOM_PROBES = 200

log = logging.getLogger("persuasion")


class InputError(Exception):
    pass


def _resolve(path: str) -> Path:
    """A file path, or the name of a shipped fixture (``fixtures/example3.json`` or ``example3``)."""
    p = Path(path)
    if p.exists():
        return p
    from .fixtures import fixture_path, list_fixtures

    name = p.name[:-5] if p.name.endswith(".json") else p.name
    if name in list_fixtures():
        return Path(str(fixture_path(name)))
    raise InputError(f"cannot read {path}: no such file")


def _load(path: str) -> Instance:
    try:
        return load_instance(_resolve(path))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except SchemaError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON: {exc}") from exc


def _option(args, inst: Instance, name: str, default):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    return inst.options.get(name, default)


def _mesh_k(args, inst: Instance) -> int:
    k = _option(args, inst, "mesh_k", None)
    if k is not None:
        return int(k)
    k = 1
    while k < 8 and mesh_size(inst.n, k + 1) <= AUTO_MESH_LIMIT:
        k += 1
    return k


def _probes(inst: Instance, k: int, seed: int) -> tuple[np.ndarray, str]:
    rng = np.random.default_rng(seed)
    mesh = simplex_mesh(inst.n, k).beliefs
    rand = rng.dirichlet(np.ones(inst.n), size=RANDOM_PROBES)
    return np.vstack([mesh, rand]), f"mesh k={k} plus {RANDOM_PROBES} random beliefs (seed {seed})"


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _moments_block(inst: Instance, signal: Signal) -> dict:
    if isinstance(inst.objective, MomentComposed):
        return {"moments": [[float(v) for v in x] for x in inst.objective.moments(signal.posteriors)]}
    return {}


def _named_support(inst: Instance, mu) -> list[str]:
    return [inst.labels[i] for i in np.flatnonzero(np.asarray(mu) > DEFAULT.support)]


# -- subcommands -------------------------------------------------------------------


def cmd_solve(args) -> int:
    inst = _load(args.path)
    k = _mesh_k(args, inst)
    tol = float(_option(args, inst, "tol", DEFAULT.report_gap))
    seed = int(_option(args, inst, "seed", 0))
    probes, name = _probes(inst, k, seed)
    if args.method == "grid":
        # the probes join the candidates so the price is feasible wherever it is checked
        cands = simplex_mesh(inst.n, k).union(probes)
        res = concavify_grid(inst.prior, inst.objective, cands, jobs=args.jobs)
    else:
        max_iters = int(_option(args, inst, "max_iters", 1000))
        refiner = AdaptiveRefiner(inst.n, k0=min(2, k), k_max=k, extra=probes)
        try:
            res = solve_dual_cutting_plane(inst.prior, inst.objective, refiner, max_iters=max_iters, jobs=args.jobs)
        except IterationLimit as exc:
            print(f"warning: {exc}; reporting the best bundle", file=sys.stderr)
            res = exc.best
    cert = certify(res.signal, res.price, inst.prior, inst.objective, probes, tol=tol, probe_name=name)
    cert.extra.update({"method": args.method, "mesh_k": k})
    cert.extra.update(_moments_block(inst, res.signal))
    out = cert.to_json(inst.labels)
    if args.rs_a is not None:
        out["linear_revelation"] = _revelation_block(inst, args.rs_a, probes)
    _emit(out)
    return EXIT_FAIL if cert.verdict is Verdict.INVALID else EXIT_OK


def _revelation_block(inst: Instance, a: float, probes) -> dict:
    from .revelation import certify_linear_revelation

    coords = inst.states.coords
    if coords is None or coords.shape[1] != 2:
        raise InputError("--rs-a needs two-dimensional coords")
    try:
        rc = certify_linear_revelation(inst.prior, coords, float(a), probes=CandidateSet.user_grid(probes))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return {"a": float(a), "verdict": rc.verdict.value, "value": rc.primal_value, "dual_value": rc.dual_value,
            "gap": rc.gap, "line_fit": rc.extra["line_fit"], "moment_gap": rc.extra["moment_gap"]}


def _signal_from_json(data: dict, n: int) -> Signal:
    try:
        atoms = data["atoms"]
        w = np.array([a["weight"] for a in atoms], dtype=float)
        M = np.array([a["posterior"] for a in atoms], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"signal file needs atoms with weight and posterior: {exc}") from exc
    if M.ndim != 2 or M.shape[1] != n:
        raise InputError("signal posteriors do not match the number of states")
    try:
        return Signal(w, M)
    except ValueError as exc:
        raise InputError(f"invalid signal: {exc}") from exc


def cmd_certify(args) -> int:
    inst = _load(args.path)
    sig_data = _read_json(args.signal)
    price_data = _read_json(args.price)
    signal = _signal_from_json(sig_data, inst.n)
    try:
        prices = np.asarray(price_data["price"] if isinstance(price_data, dict) else price_data, dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"price file needs a 'price' list: {exc}") from exc
    if prices.shape != (inst.n,):
        raise InputError("price vector does not match the number of states")
    k = _mesh_k(args, inst)
    tol = float(_option(args, inst, "tol", DEFAULT.report_gap))
    probes, name = _probes(inst, k, int(_option(args, inst, "seed", 0)))
    cert = certify(signal, PriceFunction(prices), inst.prior, inst.objective, probes, tol=tol, probe_name=name)
    report = {
        "verdict": cert.verdict.value,
        "value": cert.primal_value,
        "dual_value": cert.dual_value,
        "gap": cert.gap,
        "max_violation": cert.max_violation,
        "plausibility_residual": cert.plausibility_residual,
        "slackness_flagged": [int(i) for i in cert.slackness.flagged],
        "probes": cert.probes,
    }
    problems = []
    if cert.plausibility_residual > DEFAULT.plausibility:
        problems.append(f"signal is not Bayes-plausible: residual {cert.plausibility_residual:.3g}")
    if cert.max_violation > tol:
        states = _named_support(inst, cert.worst_probe)
        report["worst_probe"] = {"belief": [float(x) for x in cert.worst_probe], "states": states}
        problems.append(f"price infeasible by {cert.max_violation:.3g} at a belief on states {', '.join(states)}")
    if cert.verdict is Verdict.FEASIBLE_ONLY:
        if cert.gap > tol:
            problems.append(f"duality gap {cert.gap:.3g} exceeds {tol:g}")
        if cert.slackness.flagged:
            problems.append(f"atoms {cert.slackness.flagged} are off the price hyperplane")
    _emit(report)
    for msg in problems:
        print(f"certificate failed: {msg}", file=sys.stderr)
    return EXIT_OK if cert.verdict is Verdict.OPTIMAL else EXIT_FAIL


def cmd_moment_solve(args) -> int:
    inst = _load(args.path)
    if inst.moment_map is None or inst.moment_objective is None:
        raise InputError("moment-solve needs a moment map (or coords) and a moment objective")
    m = np.asarray(inst.moment_map, dtype=float)
    k = _mesh_k(args, inst)
    tol = float(_option(args, inst, "tol", DEFAULT.report_gap))
    F0 = MomentDistribution.from_prior(inst.prior, m)
    xs = np.unique(np.round(simplex_mesh(inst.n, k).beliefs @ m, 12), axis=0)
    sol = solve_moment_primal(F0, inst.moment_objective, xs)
    gap = sol.dual_value - sol.value
    # the price of each state is the price of its moment atom
    price = [float(sol.q[int(np.argmin(np.abs(F0.points - x).max(axis=1)))]) for x in m]
    out = {
        "value": float(sol.value),
        "dual_value": float(sol.dual_value),
        "gap": float(gap),
        "G": [{"weight": float(w), "x": [float(v) for v in x]} for w, x in zip(sol.G.weights, sol.G.points)],
        "price": price,
        "states": inst.labels,
        "candidates": int(len(sol.candidates)),
        "verdict": (Verdict.OPTIMAL if abs(gap) <= tol else Verdict.FEASIBLE_ONLY).value,
    }
    _emit(out)
    return EXIT_OK


def cmd_rs_certify(args) -> int:
    from .revelation import certify_linear_revelation

    inst = _load(args.path)
    coords = inst.states.coords
    if coords is None or coords.shape[1] != 2:
        raise InputError("rs-certify needs two-dimensional coords")
    a = _option(args, inst, "rs_a", inst.options.get("a"))
    if a is None:
        raise InputError("slope missing: pass --rs-a or set options.a")
    k = _mesh_k(args, inst)
    probes, name = _probes(inst, k, int(_option(args, inst, "seed", 0)))
    try:
        cert = certify_linear_revelation(inst.prior, coords, float(a), probes=CandidateSet.user_grid(probes))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    cert.probes = name
    _emit(cert.to_json(inst.labels))
    return EXIT_FAIL if cert.verdict is Verdict.INVALID else EXIT_OK


def cmd_constrained_solve(args) -> int:
    inst = _load(args.path)
    k = _mesh_k(args, inst)
    tol = float(_option(args, inst, "tol", DEFAULT.report_gap))
    cands = simplex_mesh(inst.n, k)
    res = solve_constrained_primal(inst.prior, inst.objective, list(inst.constraints), cands)
    cert = check_constrained_optimality(res.signal, res.price, res.multipliers, list(inst.constraints),
                                        inst.prior, inst.objective, cands, tol=tol)
    out = cert.to_json()
    out["constraints"] = [k_.name for k_ in inst.constraints]
    out["states"] = inst.labels
    out["mesh_k"] = k
    _emit(out)
    return EXIT_FAIL if cert.verdict is Verdict.INVALID else EXIT_OK


def cmd_kr(args) -> int:
    data = _read_json(args.path)
    try:
        mu = np.asarray(data["mu"], dtype=float)
        eta = np.asarray(data["eta"], dtype=float)
        if "metric" in data:
            rho = GroundMetric(np.asarray(data["metric"], dtype=float))
        else:
            rho = GroundMetric.from_coords(data["coords"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"kr input needs mu, eta and metric (or coords): {exc}") from exc
    try:
        d, f = kr_distance(mu, eta, rho, return_witness=True)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit({"distance": d, "witness": [float(x) for x in f]})
    return EXIT_OK


def cmd_plot_data(args) -> int:
    inst = _load(args.path)
    if inst.n != 2:
        raise InputError("plot-data needs a binary state space")
    k = int(_option(args, inst, "mesh_k", 100))
    cands = simplex_mesh(2, max(k, 1))
    res = concavify_grid(inst.prior, inst.objective, cands)
    ts = np.linspace(0.0, 1.0, args.points)
    M = np.column_stack([1 - ts, ts])
    V = inst.objective.evaluate_many(M)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["t", "V", "Vhat", "price_line"])
    for t, mu, v in zip(ts, M, V):
        vhat = concave_closure(mu, inst.objective, cands.union(mu[None, :]))
        writer.writerow([f"{t:.10g}", f"{v:.10g}", f"{vhat:.10g}", f"{float(res.price(mu)):.10g}"])
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh-k", dest="mesh_k", type=int, default=None, help="simplex mesh resolution")
    common.add_argument("--tol", type=float, default=None, help="gap and feasibility tolerance for verdicts")
    common.add_argument("--max-iters", dest="max_iters", type=int, default=None, help="cutting-plane iteration cap")
    common.add_argument("--jobs", type=int, default=1, help="parallel objective evaluations")
    common.add_argument("--seed", type=int, default=None, help="seed for random probe beliefs")
    common.add_argument("--rs-a", dest="rs_a", type=float, default=None, help="slope of the linear revelation")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(prog="persuasion", description="Finite-state persuasion solver and certifier.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve an instance and print its certificate")
    p.add_argument("path")
    p.add_argument("--method", choices=["grid", "cutting-plane"], default="grid")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", parents=[common], help="check a signal and price against an instance")
    p.add_argument("path")
    p.add_argument("--signal", required=True, help="JSON with atoms [{weight, posterior}]")
    p.add_argument("--price", required=True, help="JSON with a price list")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("moment-solve", parents=[common], help="solve in moment space")
    p.add_argument("path")
    p.set_defaults(func=cmd_moment_solve)

    p = sub.add_parser("rs-certify", parents=[common], help="certify a linear revelation in two dimensions")
    p.add_argument("path")
    p.set_defaults(func=cmd_rs_certify)

    p = sub.add_parser("constrained-solve", parents=[common], help="solve with side constraints")
    p.add_argument("path")
    p.set_defaults(func=cmd_constrained_solve)

    p = sub.add_parser("kr", parents=[common], help="distance between two weight vectors")
    p.add_argument("path", help="JSON with mu, eta and metric (or coords)")
    p.set_defaults(func=cmd_kr)

    p = sub.add_parser("plot-data", parents=[common], help="CSV of V, its concave closure and the price line")
    p.add_argument("path")
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, EvaluationError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PersuasionError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
