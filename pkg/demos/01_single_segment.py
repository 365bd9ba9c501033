"""Stress in one wire: the closed-form solver against the finite-difference oracle.

A 30 um copper line carries 2e9 A/m^2.  We follow it twice: once with both
ends blocked, starting stress free, and once after a void has opened at its
tensile end.  Each case is solved with the series solution and with a fine
implicit finite-difference grid, and we print the end stresses over time.
"""

# %%
import time

import numpy as np

from empost.analytic import BoundaryFluxSpec, SeriesConfig, solve_segment
from empost.bpinn import initial_gradients
from empost.core import tree_model
from empost.fdm import FdmConfig, tree_fdm_solution
from empost.fixtures import single_void_segment, single_voidless_segment

t = np.linspace(0.0, 1e8, 100)
oracle_cfg = FdmConfig(n_steps=4000, cells_per_segment=128)

# %% [markdown]
# A lone segment has no junction, so its end gradients stay at their initial
# values: -G at a blocked end.  The void end instead holds zero stress.

# %%
for name, tree in (("blocked", single_voidless_segment()), ("void at x = 0", single_void_segment())):
    seg = tree.segments[0]
    model = tree_model(tree).segments[0]
    phi0 = initial_gradients(tree)
    flux = BoundaryFluxSpec(phi0.get((seg.id, "minus"), 0.0), phi0.get((seg.id, "plus"), 0.0))
    x = np.linspace(0.0, seg.length, 30)

    start = time.perf_counter()
    series = solve_segment(model, flux, SeriesConfig(), x, t)
    wall = time.perf_counter() - start
    fdm = tree_fdm_solution(tree_model(tree), oracle_cfg, t, {seg.id: x}).fields({seg.id: x})[0]

    err = np.sqrt(np.mean((series.values - fdm.values) ** 2)) / np.ptp(fdm.values)
    print(f"\n{name}: series solve {1e3 * wall:.1f} ms, relative RMSE vs FDM {err:.1e}")
    print("   t [s]     sigma(0) [MPa]   sigma(L) [MPa]")
    for k in (0, 10, 30, 99):
        print(f"  {t[k]:8.2e}   {series.values[0, k] / 1e6:12.2f}   {series.values[-1, k] / 1e6:12.2f}")

# %% [markdown]
# The blocked line builds toward the linear profile G (L/2 - x).  With the
# void the tensile end drops to zero and the rest of the line relaxes toward
# G (L - x).
