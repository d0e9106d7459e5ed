"""Solve the six-state product instance on a mesh and print the certificate."""

from __future__ import annotations

import numpy as np

from persuasion.certificates import certify
from persuasion.concavify import concavify_grid, simplex_mesh
from persuasion.fixtures import load_fixture
from persuasion.moment import induce_moment_distribution
from persuasion.revelation import check_line_support

inst = load_fixture("example3").instance
cands = simplex_mesh(inst.n, inst.options["mesh_k"])
res = concavify_grid(inst.prior, inst.objective, cands)
cert = certify(res.signal, res.price, inst.prior, inst.objective, cands)

print(f"value    {res.value:.6f}  (101/300 = {101 / 300:.6f})")
print(f"verdict  {cert.verdict.value}  gap {cert.gap:.2e}")
G = induce_moment_distribution(res.signal.support(), inst.states.coords)
for w, x in sorted(zip(G.weights, map(tuple, G.points)), key=lambda t: t[1]):
    print(f"  weight {w:.4f}  mean ({x[0]:.3f}, {x[1]:.3f})")
print("means on a line of slope a:", check_line_support(G, inst.options["a"]).is_line)
print("price", np.round(res.price.prices, 6))
