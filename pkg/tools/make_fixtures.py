"""Regenerate the shipped fixture files (run from the repository root)."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "persuasion" / "fixtures"


def label(x) -> str:
    return "(" + ",".join(f"{v:g}" for v in x) + ")"


def grid_instance(coords, provenance, expected, mesh_k):
    n = len(coords)
    return {
        "states": [label(c) for c in coords],
        "coords": coords,
        "prior": [1 / n] * n,
        "objective": {"type": "moment", "v": {"type": "product"}},
        "options": {"mesh_k": mesh_k, "tol": 1e-6, "seed": 0},
        "expected": expected,
        "provenance": provenance,
    }


def main():
    fx = {}
    six = [[0.1, 0.3], [0.3, 0.1], [0.4, 0.6], [0.6, 0.4], [0.8, 0.9], [1.0, 0.7]]
    fx["example3"] = grid_instance(
        six,
        "Six equally likely points in the plane with the product objective. The "
        "optimum pools the three anti-ordered pairs; value 101/300 by direct arithmetic "
        "(each pooled mean has weight 1/3).",
        {"value": 101 / 300, "means": [[0.2, 0.2], [0.5, 0.5], [0.9, 0.8]],
         "verdicts": {"solve": "Optimal", "rs_certify": "FeasibleOnly", "line_support": False}},
        4,
    )
    fx["example3"]["options"]["a"] = 1.0
    for n, k in ((11, 4), (101, 2)):
        pts = [Fraction(i, n - 1) for i in range(n)]
        line = [[float(t), float(t)] for t in pts]
        fx[f"example1-line{n}"] = grid_instance(
            line,
            f"{n} equally spaced points on the diagonal segment from (0,0) to (1,1). "
            "The product is convex along the segment, so full disclosure is optimal; "
            "value is the mean of t^2 over the points.",
            {"value": float(sum(t * t for t in pts) / n), "verdicts": {"solve": "Optimal", "full_disclosure": True}},
            k,
        )
        par = [[float(t), float(t * t)] for t in pts]
        fx[f"example2-parabola{n}"] = grid_instance(
            par,
            f"{n} points (t, t^2) with t equally spaced in [0,1]. Full disclosure is "
            "optimal; the full-disclosure price is t^3 and the value is the mean of t^3.",
            {"value": float(sum(t ** 3 for t in pts) / n), "verdicts": {"solve": "Optimal", "full_disclosure": True}},
            k,
        )
    sym = [[0.0, 0.5], [0.5, 0.0], [0.5, 1.0], [1.0, 0.5]]
    fx["symmetric4"] = grid_instance(
        sym,
        "Four equally likely points symmetric about the diagonal. Revealing w1+w2 "
        "pools them into means (0.25,0.25) and (0.75,0.75), which lie on x2 = x1; "
        "value 0.5*0.0625 + 0.5*0.5625.",
        {"value": 0.3125, "means": [[0.25, 0.25], [0.75, 0.75]],
         "price": [0.0625, 0.0625, 0.5625, 0.5625],
         "verdicts": {"solve": "Optimal", "rs_certify": "Optimal", "line_support": True}},
        4,
    )
    fx["symmetric4"]["options"]["a"] = 1.0
    fx["constrained-binary"] = {
        "states": ["L", "H"],
        "coords": [[0.0], [1.0]],
        "prior": [0.5, 0.5],
        "objective": {"type": "moment", "v": {"type": "quadratic", "Q": [[4.0]], "l": [-4.0], "c": 1.0}},
        "constraints": [{"name": "informativeness",
                         "g": {"type": "moment", "v": {"type": "max_affine", "slopes": [[2.0], [-2.0]],
                                                       "intercepts": [-1.0, 1.0]}},
                         "c": 0.5}],
        "options": {"mesh_k": 20, "tol": 1e-6, "seed": 0},
        "expected": {"value": 0.5, "multipliers": [1.0], "unconstrained_value": 1.0,
                     "verdicts": {"constrained_solve": "Optimal"}},
        "provenance": "Binary state, V(t) = (2t-1)^2 with t the probability of H, and the "
                      "side constraint E|2t-1| <= c. Since V <= g pointwise the value is "
                      "min(c, 1); at c = 0.5 the multiplier is 1 and the price is zero.",
    }
    OUT.mkdir(parents=True, exist_ok=True)
    for name, data in fx.items():
        (OUT / f"{name}.json").write_text(json.dumps(data, indent=1) + "\n")


if __name__ == "__main__":
    main()
