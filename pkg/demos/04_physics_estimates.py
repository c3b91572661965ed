"""
From fits to spin-layer physics
===============================

Curie-Weiss fit of the saturation flux, then areal spin density and
cluster parameters.
"""

# %%
import numpy as np

from fluxspin import DevicePhysics, estimate_surface_density, fit_curie_weiss, solve_cluster_parameters
from fluxspin.inference import curie_weiss

temps = np.linspace(12.5, 21.0, 6)
clean = curie_weiss(temps, 34.8 * 6.8, 5.7)
phi = clean * (1 + 0.03 * np.random.default_rng(0).standard_normal(6))
cw = fit_curie_weiss(temps, phi, 0.03 * clean)
print(cw.params, cw.uncertainties)

# %%
# Device: 2 uA persistent current, 0.7 mm loop, 1 um wire.
device = DevicePhysics(i_p=2e-6, loop_length=0.7e-3, wire_width=1e-6)
n_s, err = estimate_surface_density(device, cw)
print(f"n_s = {n_s * 1e-4:.3g} +- {err * 1e-4:.2g} cm^-2")

# %%
# A diffusion rate of 100 Hz fixes the filling factor, hence the
# coupling, diffusion coefficient and mean cluster width.
cluster = solve_cluster_parameters(100.0, n_s, 12.5e-3, cw["t_c"] * 1e-3)
print(f"x_f = {cluster.x_f:.3f}, w = {cluster.mean_width * 1e6:.3f} um, D = {cluster.diffusion_coeff * 1e4:.2e} cm^2/s")
