"""Photon statistics of pair-coherent states along the three modes.

Prints the number distribution, the small-z Mandel limits, the crossover
points where mode c turns Poissonian, and the sign of the Cauchy-Schwarz
measure between modes a and c.
"""

import numpy as np

from ktcs.fock import KtcsParams
from ktcs.statistics import csi_measures, find_crossover, mandel, mandel_limit, number_distribution

params = KtcsParams(2.0, 0.0, 1, 0, 3, 0)
n = np.arange(15)
print("P(n) for K=3, j=0, p=1, q=0, |xi|=2")
for k, pk in zip(n, number_distribution(params, n)):
    if pk > 0:
        print(f"  n={k:2d}  {pk:.6f}")

print("\nsmall-z Mandel limits")
for K in (2, 3, 4):
    for j in range(K):
        m = mandel_limit(KtcsParams(1.0, 0.0, 1, 2, K, j))
        print(f"  K={K} j={j}  Ma={m.Ma:+.3f}  Mb={m.Mb:+.3f}  Mc={m.Mc:+.3f}")

print("\nmode-c crossover z for K=3, j=0, q=0")
for p in range(4):
    z0 = find_crossover(KtcsParams(1.0, 0.0, p, 0, 3, 0), "c", 60.0)
    print(f"  p={p}  z={z0:.4f}  Mc at crossover {mandel(KtcsParams(z0 ** 0.5, 0.0, p, 0, 3, 0)).Mc:+.1e}")

print("\nCauchy-Schwarz measure G_ac for K=2, j=0, p=q=0")
for z in (0.5, 2.0, 8.0, 32.0):
    g = csi_measures(KtcsParams(z ** 0.5, 0.0, 0, 0, 2, 0)).G["ac"]
    print(f"  z={z:5.1f}  G_ac={g:+.4f}")
