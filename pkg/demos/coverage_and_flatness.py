"""How well does a set meet every segment, and how flat is a piece of spectrum?

The first half estimates the GCC constant gamma(ell) of two strip patterns:
the smallest fraction of a length-ell segment that lies inside the set,
minimized over centers and directions.  Vertical strips leave vertical gaps,
so gamma is zero.  Add horizontal strips and every segment is caught.

The second half measures the flatness of caps of an annulus inside a fixed
ball: the thinner the best slab holding the cap, the more the annulus looks
like a strip locally.

Run:  python3 demos/coverage_and_flatness.py
"""
import math

import numpy as np

from plslab.geometry import GccBudget, estimate_gcc, grid_pattern, segment_measure, vertical_strips
from plslab.lattice import TorusGrid
from plslab.spectra import Annulus, mask_flatness, region_mask

L = 4.0
budget = GccBudget(centers=128, random_orientations=8)

#%% GCC estimates
for name, E in [("vertical strips", vertical_strips(1.0, 0.2)), ("grid pattern", grid_pattern(1.0, 0.2))]:
    est = estimate_gcc(E, 1, 2.0, d=2, L=L, budget=budget, seed=1)
    ang = math.degrees(math.atan2(est.witness_frame[0][1], est.witness_frame[0][0])) % 180
    print(f"{name:16s} gamma_hat = {est.gamma_hat:.4f}  worst segment at {np.round(est.witness_center, 3)}, {ang:.1f} deg")

# an axis-parallel segment inside a gap still crosses the perpendicular
# strips, so it is covered in proportion to their width; the minimum above
# comes from a tilted segment placed to clip the strips as little as possible
for deg in (0, 20, 45):
    u = np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])
    frac = segment_measure(grid_pattern(1.0, 0.2), [0.6, 0.6], u, 2.0, L)
    print(f"  segment through (0.6, 0.6) at {deg:2d} deg covers {frac:.3f}")

#%% flatness of annular caps seen through a ball of radius 6
grid = TorusGrid(2, 2 * math.pi * 8, 1024)
print("\n  R   half-width of the best slab")
for R in (10.0, 20.0, 40.0):
    mask = region_mask(Annulus(R, 0.25), grid)
    print(f"{R:4.0f}   {mask_flatness(mask, grid, 1, center=(R, 0.0), radius=6.0):.4f}")
