"""
Relaxation kernels and their noise spectra
==========================================

Three models for how the polarized spin layer relaxes, and the flux-noise
spectrum each one implies.
"""

# %%
import numpy as np

from fluxspin import CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion, short_time_coefficient
from fluxspin.spectrum import compute_spectrum, spectral_slope

# Times in microseconds throughout; Omega = 1e-4 / us is 100 Hz.
omega = 1e-4
kernels = {
    "homogeneous": HomogeneousDiffusion(omega),
    "inhomogeneous": InhomogeneousDiffusion(omega),
    "cutoff 1/f": CutoffOneOverF(0.98, 11.6, 8560.0),
}

# %%
# F(t) falls from 1 to 0. Diffusion gives sqrt(t) growth of 1 - F at
# short times, the cutoff model a near-logarithmic one.
t = np.geomspace(1.0, 1e5, 6)
print("t_us      " + "  ".join(f"{name:>13}" for name in kernels))
for ti in t:
    print(f"{ti:8.0f}  " + "  ".join(f"{k.f(ti):13.6f}" for k in kernels.values()))

# %%
# Short-time prefactor of 1 - F = C sqrt(Omega t), evaluated from the series
# and the integral.
for name in ("homogeneous", "inhomogeneous"):
    k = kernels[name]
    x = 1e-8
    print(name, (1 - k.f(x / omega)) / np.sqrt(x), short_time_coefficient(k))

# %%
# High-frequency slopes. The diffusion spectra bend towards -3/2 slowly:
# the correction decays like sqrt(Omega / omega).
for name in ("homogeneous", "inhomogeneous"):
    for lo in (10, 1e3, 1e5):
        w = np.geomspace(lo, 100 * lo, 20) * omega
        print(name, lo, round(spectral_slope(compute_spectrum(kernels[name], w), (w[0], w[-1])), 4))

# %%
# The cutoff model gives S ~ 1 / omega^alpha between its two band edges.
k = kernels["cutoff 1/f"]
w = np.geomspace(10 / k.tau_max, 0.1 / k.tau_min, 20)
print("cutoff slope", spectral_slope(compute_spectrum(k, w), (w[0], w[-1])))
