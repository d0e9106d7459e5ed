"""Four symmetric states: pooling along a line is certified optimal."""

from __future__ import annotations

from persuasion.fixtures import load_fixture
from persuasion.revelation import certify_linear_revelation

inst = load_fixture("symmetric4").instance
for a in (1.0, 0.5, 2.0):
    cert = certify_linear_revelation(inst.prior, inst.states.coords, a)
    print(f"a={a:<4} verdict {cert.verdict.value:<13} value {cert.primal_value:.6f}"
          f"  moment gap {cert.extra['moment_gap']:.2e}")
