"""Relaxation kernels, flux-noise spectra and fitting tools for the polarized
spin environment of a flux qubit."""

from .errors import (DomainError, FluxSpinError, InfeasibleError, NumericalError, RankDeficiencyError,
                     TraceParseError, UnitError, UnsupportedVariantError)
from .inference import FitResult, fit_curie_weiss, fit_kernel, fit_kernel_joint
from .kernels import (CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion, Variant, asymptotic_constants,
                      f_asymptotic, f_cutoff_one_over_f, f_eval, f_homogeneous, f_inhomogeneous,
                      short_time_coefficient)
from .oracles import (ClusterEnsembleConfig, LangevinConfig, cluster_ensemble_f, gaussianity_check,
                      langevin_depolarize_identity, langevin_run)
from .physics import (ClusterPhysics, DevicePhysics, estimate_surface_density, reorganization_energy,
                      solve_cluster_parameters)
from .protocol import (ExperimentTrace, Mode, NoiseSpec, ProtocolSchedule, feedback_flux, read_trace, synth_trace,
                       trace_residuals, write_trace)
from .spectrum import ModeSet, SpectrumResult, psd_from_kernel, psd_mode_sum, spectral_slope

__version__ = "0.1.0"
