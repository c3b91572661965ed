"""
Fitting a polarization trace
============================

Synthesize a noisy polarization curve, fit it with the cutoff 1/f model,
then with inhomogeneous diffusion restricted to early times.
"""

# %%
import numpy as np

from fluxspin import CutoffOneOverF, NoiseSpec, fit_kernel, synth_trace
from fluxspin.protocol import polarization_grid, write_trace

truth = CutoffOneOverF(0.98, 11.6, 8560.0)
grid = polarization_grid(np.geomspace(5, 5000, 50), tau_d=1.0)
trace = synth_trace(truth, 34.8, grid, NoiseSpec(gaussian_sigma=0.5, seed=1))
print(write_trace(trace)[:300])

# %%
fit = fit_kernel(trace, "cutoff")
for name, value in fit.params.items():
    print(f"{name:8s} {value:12.4g} +- {fit.uncertainties[name]:.3g}")
print("chi2/dof", fit.reduced_chi2)

# %%
# The data stop at 5 ms, below tau_max, so tau_max is the loosest
# parameter: its error bar is much wider than the others.
print("relative errors", {k: fit.uncertainties[k] / v for k, v in fit.params.items()})

# %%
# Diffusion fit up to 1 ms, in the spirit of a rough cross-model estimate.
diff = fit_kernel(trace, "inhomogeneous", t_max=1000.0)
print("phi_p", diff["phi_p"], "Omega [Hz]", diff["omega_c"] * 1e6, "chi2/dof", diff.reduced_chi2)
