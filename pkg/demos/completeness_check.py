"""Overcompleteness of the pair-coherent family.

Checks the Stieltjes moments of the radial weight, the resolution of unity on
a block of chain states, and the Carleman test on the sector moment sequences.
"""

import numpy as np

from ktcs.completeness import MomentProblem, carleman_test, resolution_of_unity, verify_moments

for p, q in ((0, 0), (1, 2), (3, 3)):
    rep = verify_moments(MomentProblem(p, q, 8, 1e-5))
    print(f"moments p={p} q={q}: max rel error {max(rep.rel_error):.1e}")

for K in (1, 2, 3):
    block = resolution_of_unity(K, 1, 0, n_max=6)
    print(f"resolution of unity K={K}: |block - 1| max {np.abs(block - np.eye(len(block))).max():.1e}")

for K in (1, 2, 3):
    r = carleman_test(K)
    print(f"Carleman K={K}: T = {r.estimate:.4f} -> {r.verdict}")
