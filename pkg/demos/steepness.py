"""Square-root objective on [0, 1]: the value-to-distance ratio grows like sqrt(n)."""

from __future__ import annotations

import numpy as np

from persuasion.beliefs import PiecewiseLinearMax
from persuasion.concavify import CandidateSet
from persuasion.metrics import GroundMetric, kr_distance, steepness_ratios

grid = np.linspace(0, 1, 41)
rho = GroundMetric(np.abs(np.subtract.outer(grid, grid)))
obj = PiecewiseLinearMax(np.sqrt(grid)[None, :])
cands = CandidateSet.user_grid(np.eye(grid.size))

unif = np.full(grid.size, 0.5 / grid.size)
mu0 = unif.copy()
mu0[0] += 0.5
print(" n   distance   ratio   ratio/sqrt(n)")
for n in (2, 4, 8, 10, 20, 40):
    mu = unif.copy()
    mu[np.argmin(np.abs(grid - 1 / n))] += 0.5
    d = kr_distance(mu, mu0, rho)
    r = steepness_ratios(mu0, obj, mu, rho, cands)[0]
    print(f"{n:>2}   {d:.5f}   {r:6.3f}   {r / np.sqrt(n):.4f}")
