"""Learning junction fluxes on a three-segment tree.

Each segment is solved in closed form once its end fluxes are known.  A
small Bayesian network supplies those fluxes at every junction.  It is fit
so that the stresses of neighbouring segments agree there.  We then push 30
random current draws through the posterior and compare the stress
statistics with a Monte Carlo run of the finite-difference solver.  Takes
a few seconds.
"""

# %%
from empost.bnn import NetArchitecture
from empost.bpinn import BpinnConfig, fit, junction_mismatch_samples
from empost.fixtures import three_segment_tree
from empost.hmc import HmcConfig
from empost.stochastic import CurrentVariationSpec, bpinn_estimate, comparison_summary, mc_reference, sample_currents

tree = three_segment_tree()
spec = CurrentVariationSpec.for_tree(tree, relative_std=0.15, n_samples=30, seed=0)
train = sample_currents(CurrentVariationSpec.for_tree(tree, n_samples=16, seed=1))

cfg = BpinnConfig(arch=NetArchitecture(hidden_widths=(8, 8)), var_l=1e-8, map_iterations=1500)
hmc = HmcConfig(step_size=1e-4, leapfrog_steps=10, n_samples=30, burn_in=200, tune_window=25)

# %% [markdown]
# Fitting is a MAP optimisation followed by Hamiltonian sampling around it.

# %%
result = fit(tree, train, cfg, hmc, seed=0)
print(f"MAP energy {result.map_energy:.3g} after {result.map_iterations} iterations; "
      f"HMC acceptance {result.diagnostics.acceptance_rate:.2f}")

# %%
est = bpinn_estimate(tree, result.chain.samples, spec, result.norm, arch=cfg.arch)
ref = mc_reference(tree, spec)
summary = comparison_summary(ref, est)
# posterior sample i is paired with current draw i, as in the estimate above
mism = junction_mismatch_samples(tree, result.chain.samples, sample_currents(spec), cfg, result.norm)

print(f"combined RMSE {100 * summary['combined_relative']:.2f}% of the stress range")
print(f"max junction mismatch over the draws {100 * mism.max() / summary['stress_range']:.2f}% of range")
print(f"prediction {est.wall_time:.3f} s vs Monte Carlo {ref.wall_time:.3f} s")
print("mean +/- std stress where the voided segment meets the junction [MPa]:")
for k in range(0, 100, 20):
    print(f"  t = {est.mean[-1].t_grid[k]:8.2e} s   {est.mean[-1].values[0, k] / 1e6:8.2f} "
          f"+/- {est.std[-1].values[0, k] / 1e6:.2f}")
