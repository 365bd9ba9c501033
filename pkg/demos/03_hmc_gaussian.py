"""The sampler on a target whose answer we know.

A ten-dimensional standard normal is the simplest check of the Hamiltonian
sampler.  During burn-in the step size is tuned toward an acceptance rate
between 0.6 and 0.9.  After that the moments of the retained samples should
match zero mean and unit variance.
"""

# %%
import numpy as np

from empost.hmc import HmcConfig, sample_posterior


def potential(theta):
    return 0.5 * float(theta @ theta), theta.copy()


chain, diag = sample_posterior(np.zeros(10), potential,
                               HmcConfig(step_size=0.05, leapfrog_steps=20, n_samples=5000, burn_in=500))

# %%
print(f"tuned step size {diag.step_size:.3f}, acceptance {diag.acceptance_rate:.2f}, "
      f"mean |dH| {diag.mean_abs_delta_h:.3f}")
print("sample means    ", np.round(chain.samples.mean(axis=0), 3))
print("sample variances", np.round(chain.samples.var(axis=0), 3))
