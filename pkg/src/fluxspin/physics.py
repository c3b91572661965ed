"""Order-of-magnitude physics of the interface spin layer, in SI units.

Chains the Curie-Weiss amplitude to an areal spin density, and a fitted
diffusion rate to the cluster filling factor, exchange energy, diffusion
coefficient and mean cluster width:

    D = eta J a^2 / hbar,   J = mu0 mu_B^2 / (4 pi a^3),   Omega = pi^2 D / w^2,
    a = sqrt(x_f / n_s),    w = n_s^(-1/2) / (1 - sqrt(x_f)),
    eta = sqrt(pi) (T - T_c) / (2 T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from .constants import HBAR, K_B, MU_0, MU_B, PHI_0
from .errors import DomainError, InfeasibleError, UnsupportedVariantError

_X_EDGE = 1e-12


@dataclass(frozen=True)
class DevicePhysics:
    """Qubit loop geometry: persistent current (A) and lengths (m)."""

    i_p: float
    loop_length: float
    wire_width: float
    wire_height: float | None = None
    spin: float = 0.5

    def __post_init__(self):
        for name in ("i_p", "loop_length", "wire_width", "spin"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.wire_height is not None and not self.wire_height > 0:
            raise DomainError("wire_height must be positive")

    @property
    def thin_wire(self):
        """Whether h << W holds (taken as h <= W / 5); None if h is unknown."""
        return None if self.wire_height is None else self.wire_height <= 0.2 * self.wire_width


@dataclass(frozen=True)
class ClusterPhysics:
    """Derived cluster parameters (SI): n_s in 1/m^2, lengths in m, J in J, D in m^2/s."""

    n_s: float
    x_f: float
    a: float
    j_coupling: float
    eta: float
    diffusion_coeff: float
    mean_width: float
    t_c: float
    omega_c: float


def _spin_factor(spin, general):
    if spin != 0.5 and not general:
        raise UnsupportedVariantError("only S = 1/2 is supported; pass general=True for the S(S+1) form")
    # 2 at S = 1/2
    return 8.0 * spin * (spin + 1.0) / 3.0


def surface_density_from_amplitude(physics, amplitude, general_spin=False):
    """n_s (1/m^2) from the Curie-Weiss amplitude A = phi_p (T - T_c).

    ``amplitude`` is in Wb * K.
    """
    if not amplitude > 0:
        raise DomainError("Curie-Weiss amplitude must be positive")
    pref = _spin_factor(physics.spin, general_spin)
    return amplitude * K_B * physics.wire_width / (pref * (MU_0 * MU_B) ** 2 * physics.i_p * physics.loop_length)


def estimate_surface_density(physics, fit=None, *, phi_p=None, temperature=None, t_c=None, general_spin=False):
    """Areal spin density from a Curie-Weiss fit or a single amplitude.

    Parameters
    ----------
    physics : DevicePhysics
    fit : FitResult, optional
        Curie-Weiss fit in lab units (amplitude in uPhi0 * mK).
    phi_p, temperature, t_c : float, optional
        Alternatively one amplitude (uPhi0) at ``temperature`` with a known
        ``t_c`` (both mK).

    Returns
    -------
    (n_s, sigma_n_s) : tuple of float
        In 1/m^2; the uncertainty is zero for the single-amplitude form.
    """
    lab = 1e-6 * PHI_0 * 1e-3
    if fit is not None:
        if not fit.converged:
            raise DomainError("Curie-Weiss fit did not converge")
        amp, err = fit["amplitude"], fit.uncertainties["amplitude"]
    elif None not in (phi_p, temperature, t_c):
        if temperature <= t_c:
            raise DomainError("temperature must exceed t_c")
        amp, err = phi_p * (temperature - t_c), 0.0
    else:
        raise DomainError("need either a fit or phi_p, temperature and t_c")
    n_s = surface_density_from_amplitude(physics, amp * lab, general_spin)
    return n_s, n_s * err / amp


def coherence_factor(temperature, t_c):
    """eta = sqrt(pi) (T - T_c) / (2 T)."""
    if not temperature > t_c:
        raise DomainError("temperature must exceed t_c")
    return math.sqrt(math.pi) * (temperature - t_c) / (2.0 * temperature)


def _cluster(x, n_s, eta, t_c):
    a = math.sqrt(x / n_s)
    j = MU_0 * MU_B ** 2 / (4.0 * math.pi * a ** 3)
    d = eta * j * a * a / HBAR
    w = 1.0 / (math.sqrt(n_s) * (1.0 - math.sqrt(x)))
    return ClusterPhysics(n_s, x, a, j, eta, d, w, t_c, math.pi ** 2 * d / (w * w))


def omega_of_filling(x_f, n_s, temperature, t_c):
    """Diffusion rate Omega (1/s) implied by filling factor x_f."""
    return _cluster(x_f, n_s, coherence_factor(temperature, t_c), t_c).omega_c


def solve_cluster_parameters(omega_c, n_s, temperature, t_c):
    """Find the filling factor reproducing ``omega_c`` and report cluster physics.

    Omega(x_f) decreases monotonically from infinity at x_f -> 0 to zero at
    x_f -> 1, which is checked on a grid before bracketing.

    Parameters
    ----------
    omega_c : float
        Diffusion rate (1/s).
    n_s : float
        Areal density (1/m^2).
    temperature, t_c : float
        Kelvin (only their ratio matters).

    Raises
    ------
    InfeasibleError
        If ``omega_c`` lies outside the attainable range.
    """
    if not omega_c > 0 or not n_s > 0:
        raise DomainError("omega_c and n_s must be positive")
    eta = coherence_factor(temperature, t_c)
    # solve in u = sqrt(x_f) on a log scale of Omega
    g = lambda u: math.log(_cluster(u * u, n_s, eta, t_c).omega_c / omega_c)
    lo, hi = math.sqrt(_X_EDGE), 1.0 - _X_EDGE
    probe = [g(lo + (hi - lo) * k / 64) for k in range(65)]
    if any(b >= a for a, b in zip(probe, probe[1:])):
        raise InfeasibleError("Omega(x_f) is not monotone on the physical branch")
    if not probe[-1] < 0 < probe[0]:
        span = (omega_c * math.exp(probe[-1]), omega_c * math.exp(probe[0]))
        raise InfeasibleError(f"omega_c={omega_c} outside attainable range [{span[0]:.3g}, {span[1]:.3g}] 1/s")
    u = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return _cluster(u * u, n_s, eta, t_c)


def reorganization_energy(physics, chi, field_gradient, mean_width):
    """eps_p = L chi B'^2 w^3 / 6 and the matching flux phi_p = eps_p / (2 |I_p|).

    Returns
    -------
    (epsilon_p, phi_p) : tuple of float
    """
    if chi < 0 or field_gradient < 0 or not mean_width > 0:
        raise DomainError("chi and field_gradient must be non-negative, mean_width positive")
    eps = physics.loop_length * chi * field_gradient ** 2 * mean_width ** 3 / 6.0
    return eps, eps / (2.0 * physics.i_p)
