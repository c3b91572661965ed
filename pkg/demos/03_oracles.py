"""
Stochastic oracles
==================

Two independent simulations of the spin environment, compared against the
closed-form kernels.
"""

# %%
import numpy as np

from fluxspin import ClusterEnsembleConfig, InhomogeneousDiffusion, cluster_ensemble_f
from fluxspin.oracles import diffusion_mode_config, langevin_polarize_check, langevin_run

# %%
# Langevin ensemble of 200 relaxing modes with tau_n = 1 / n^2.
cfg = diffusion_mode_config(200, epsilon_p=2.0, temperature=0.5, ensemble_size=10_000, seed=0)
cmp = langevin_polarize_check(cfg, np.geomspace(1e-3, 3, 10))
for row in zip(cmp.t, cmp.closed, cmp.estimate, cmp.z):
    print("t={:.4f}  closed={:.5f}  ensemble={:.5f}  z={:+.2f}".format(*row))

# %%
# In steady state Var(xi) = 2 eps_p T, and every mode carries chi T.
steady = langevin_run(cfg, np.linspace(1, 10, 10), "steady")
print(steady.samples.var() / (2 * cfg.epsilon_p * cfg.temperature))
print(steady.mode_msd.min(), steady.mode_msd.max())

# %%
# Cluster ensemble: exponentially distributed widths, each relaxing by
# its own diffusion modes. The average is the inhomogeneous kernel.
ccfg = ClusterEnsembleConfig(mean_width=1.0, samples=100_000, seed=0)
t = np.geomspace(1e-3, 10, 8) / ccfg.omega_c
res = cluster_ensemble_f(ccfg, t)
closed = InhomogeneousDiffusion(ccfg.omega_c).f(t)
print(np.round((res.f - closed) / res.stderr, 2))
