"""Binary instance with one side constraint, binding and then relaxed."""

from __future__ import annotations

from persuasion.concavify import concavify_grid, simplex_mesh
from persuasion.constrained import SideConstraint, check_constrained_optimality, solve_constrained_primal
from persuasion.fixtures import load_fixture

inst = load_fixture("constrained-binary").instance
cands = simplex_mesh(2, inst.options["mesh_k"])
print(f"unconstrained value {concavify_grid(inst.prior, inst.objective, cands).value:.6f}")

for label, cons in (("binding", list(inst.constraints)),
                    ("relaxed", [SideConstraint(k.g, 10.0, k.name) for k in inst.constraints])):
    res = solve_constrained_primal(inst.prior, inst.objective, cons, cands)
    cert = check_constrained_optimality(res.signal, res.price, res.multipliers, cons, inst.prior, inst.objective, cands)
    print(f"{label:<8} value {res.value:.6f}  multipliers {res.multipliers}  verdict {cert.verdict.value}")
