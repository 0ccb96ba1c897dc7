"""Husimi Q slices and their bell structure.

Counts the bells of the Q function on the x = y = w slice for the K = 2 and
K = 3 states and shows the exact fringe zero that appears only for odd j.
Pass a directory to also write the slices as CSV.
"""

import sys
from pathlib import Path

from ktcs.fock import KtcsParams
from ktcs.io import write_qgrid
from ktcs.phase_space import count_peaks, fringe_minimum, q_slice

cases = [("K2_j0", KtcsParams(5.0, 0.0, 0, 0, 2, 0), 2.5),
         ("K2_j1", KtcsParams(5.0, 0.0, 0, 0, 2, 1), 2.5),
         ("K3_j0", KtcsParams(12.0, 0.0, 0, 0, 3, 0), 4.0),
         ("K1_tcs", KtcsParams(5.0, 0.0, 0, 0, 1, 0), 2.5)]
out = Path(sys.argv[1]) if len(sys.argv) > 1 else None

for name, params, hw in cases:
    grid = q_slice(params, nx=400, half_width=hw)
    print(f"{name:7s} bells={count_peaks(grid)}  Q max={grid.values.max():.3e}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_qgrid(grid, out / f"q_{name}.csv")

for j in (0, 1):
    f = fringe_minimum(KtcsParams(5.0, 0.0, 0, 0, 2, j))
    print(f"fringe minimum between bells, j={j}: {f.value:.2e}")
