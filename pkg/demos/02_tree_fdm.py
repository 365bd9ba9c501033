"""A ten-segment tree on the finite-difference solver.

The bundled tree starts from its steady pre-void stress with a void at the
most tensile terminal.  We solve it on a junction-coupled grid and look at
how the junction stresses drift after the void forms.  We also check that a
fully blocked copy of the same tree conserves its integrated stress.
"""

# %%
import numpy as np

from empost.core import tree_model
from empost.fdm import FdmConfig, tree_fdm_solution
from empost.fixtures import TEN_SEGMENT, ten_segment_tree, tree_from_segments

tree = ten_segment_tree()
t = np.linspace(0.0, 1e8, 11)
sol = tree_fdm_solution(tree_model(tree), FdmConfig(), t)
fields = {f.segment_id: f for f in sol.fields()}

# %%
print("junction stress [MPa] at t = 0 and t = 1e8 s")
for j in tree.interior_junctions:
    s = tree.segment(j.slots[j.occupied[0]])
    col = fields[s.id].values[0 if s.node_minus == j.id else -1]
    print(f"  {j.id:>3}  {col[0] / 1e6:9.2f} -> {col[-1] / 1e6:9.2f}")

# %% [markdown]
# Without a void, atoms only move around inside the tree, so the integral of
# stress over all segments cannot change.

# %%
blocked = tree_from_segments(TEN_SEGMENT, initial_stress=None)
closed = tree_fdm_solution(tree_model(blocked), FdmConfig(), t)
total = closed.total_stress()
print(f"\nblocked tree: total stress drift {np.max(np.abs(total - total[0])):.2e} Pa*m "
      f"(scale {np.max(closed.mass @ np.abs(closed.state)):.2e})")
