"""Physical constants (CODATA 2018, SI) used for derived quantities."""

import math

MU_0 = 1.25663706212e-06        # vacuum permeability, T m / A
MU_B = 9.2740100783e-24         # Bohr magneton, J / T
K_B = 1.380649e-23              # Boltzmann constant, J / K (exact)
HBAR = 1.054571817e-34          # reduced Planck constant, J s
PHI_0 = 2.067833848e-15         # magnetic flux quantum h / 2e, Wb

EULER_GAMMA = 0.577215664901532860606512090082

PI = math.pi
