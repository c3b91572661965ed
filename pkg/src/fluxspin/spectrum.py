"""Flux-noise spectral density from relaxation kernels.

The classical fluctuation-dissipation relation ties the noise to the
relaxation of the order parameter,

    S_Phi(omega) = T / (omega I_p^2) int_0^inf sin(omega t) |d xi/dt| dt,

with xi(t) = eps_p (1 - F(t)). For a discrete set of relaxers this reduces
to a sum of Lorentzians, eps_p T / I_p^2 sum_n p_n tau_n / (omega^2 tau_n^2 + 1).

Units are whatever the caller uses consistently; temperature enters as an
energy (k_B = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, UnsupportedVariantError
from .kernels import (CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion, _log_h)

PI2 = math.pi ** 2
_TINY = 1e-300


@dataclass(frozen=True)
class ModeSet:
    """Discrete relaxers: weights ``p`` (summing to one) and times ``tau``.

    Also behaves as a relaxation kernel with F(t) = sum_n p_n exp(-t/tau_n).
    """

    p: np.ndarray
    tau: np.ndarray
    epsilon_p: float = 1.0
    chi: float = 1.0
    temperature: float = 1.0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if p.size == 0:
            raise DomainError("mode set is empty")
        if p.shape != tau.shape:
            raise DomainError("weights and times must have the same length")
        if np.any(p < 0) or np.any(~(tau > 0)):
            raise DomainError("weights must be non-negative and times positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_weights(cls, weights, tau, **kw):
        """Build from unnormalized weights."""
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), tau, **kw)

    @classmethod
    def from_form_factors(cls, b_n, tau, chi, temperature):
        """Build from field form factors B_n: p_n = B_n^2 / sum B^2, eps_p = 2 chi sum B^2."""
        b2 = np.asarray(b_n, dtype=float) ** 2
        return cls(b2 / b2.sum(), tau, epsilon_p=2.0 * chi * b2.sum(), chi=chi, temperature=temperature)

    @property
    def entries(self):
        return list(zip(self.p.tolist(), self.tau.tolist()))

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-t[..., None] / self.tau) @ self.p

    def complement(self, t):
        t = np.asarray(t, dtype=float)
        return -np.expm1(-t[..., None] / self.tau) @ self.p

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-t[..., None] / self.tau) @ (self.p / self.tau)

    def timescales(self):
        return (float(self.tau.min()), float(self.tau.max()))


@dataclass(frozen=True)
class SpectrumResult:
    """PSD values on a strictly increasing angular-frequency grid."""

    frequencies: np.ndarray
    values: np.ndarray
    model_tag: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.values, dtype=float)
        if w.shape != s.shape or w.ndim != 1:
            raise DomainError("frequencies and values must be 1-d arrays of equal length")
        if np.any(np.diff(w) <= 0):
            raise DomainError("frequency grid must be strictly increasing")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "values", s)


def psd_mode_sum(modes, omega, i_p):
    """Lorentzian superposition eps_p T / I_p^2 sum_n p_n tau_n / (omega^2 tau_n^2 + 1)."""
    if i_p <= 0:
        raise DomainError("persistent current must be positive")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("omega must be non-negative")
    wt = omega[..., None] * modes.tau
    s = (modes.p * modes.tau / (wt * wt + 1.0)).sum(axis=-1)
    out = modes.epsilon_p * modes.temperature / i_p ** 2 * s
    return float(out) if out.ndim == 0 else out


def sine_transform(g, omega, scales, rtol=1e-9, target=1e-6):
    """int_0^inf sin(omega t) g(t) dt for a positive, eventually decaying g.

    The range is cut at knots spaced by a factor of four, starting well
    below the shortest of ``scales`` and continuing until t g(t) is
    negligible. Pieces spanning many periods go through QUADPACK's
    Clenshaw-Curtis rule (QAWO). A tail that is still significant past the
    last knot is summed period by period with epsilon-algorithm acceleration
    of the alternating partial sums (QAWF).

    Raises
    ------
    NumericalError
        If the accumulated error estimate exceeds ``target`` relative.
    """
    omega = float(omega)
    if not omega > 0:
        raise DomainError("omega must be positive")
    g_scalar = lambda t: float(g(t))
    t_lo, t_hi = min(scales), max(scales)
    a, b = 0.0, t_lo * 1e-4
    total, err, mass = 0.0, 0.0, 0.0
    while True:
        if omega * b < 1.0:
            val, e = integrate.quad(lambda t: math.sin(omega * t) * g_scalar(t), a, b,
                                    epsabs=rtol * mass * 1e-3, epsrel=rtol, limit=200)
        else:
            val, e = integrate.quad(g_scalar, a, b, weight="sin", wvar=omega,
                                    epsabs=rtol * mass * 1e-3, epsrel=rtol, limit=200)
        total += val
        err += e
        mass += abs(val) if omega * b < 1.0 else (b - a) * g_scalar(b)
        tail = b * g_scalar(b)
        if b >= 8.0 * t_hi and tail <= 1e-3 * rtol * max(abs(total), _TINY):
            break
        if b >= 1e6 * t_hi:
            val, e = integrate.quad(g_scalar, b, np.inf, weight="sin", wvar=omega, limlst=200)
            total += val
            err += e
            break
        a, b = b, 4.0 * b
    if not err <= target * abs(total):
        raise NumericalError(f"sine transform at omega={omega} reached only {err:.3g} absolute error",
                             estimate=total, error=err)
    return total


def _closed_homogeneous(kernel, omega):
    om = kernel.omega_c
    n_max = int(max(2000, 50 * math.sqrt(omega / om)))
    n = np.arange(1, n_max + 1, dtype=float)
    s = (4.0 * om / (16.0 * om * om * n ** 4 + omega * omega)).sum()
    s += 1.0 / (12.0 * om * (n_max + 0.5) ** 3)
    return 6.0 / PI2 * s


def _closed_inhomogeneous(kernel, omega):
    om = kernel.omega_c
    r = omega / om
    fn = lambda v: math.exp(_log_h(v)) * v * v / (r * r * v ** 4 + 1.0)
    pts = [1.0, 5.0] + ([1.0 / math.sqrt(r)] if r > 0 and 1.0 / math.sqrt(r) < 40 else [])
    val, err = integrate.quad(fn, 0.0, 40.0, points=sorted(pts), epsabs=0.0, epsrel=1e-12, limit=200)
    return 4.0 / (om * PI2) * val


def _closed_cutoff(kernel, omega):
    # int p(tau) tau / (omega^2 tau^2 + 1) dtau, in u = log tau
    lo, hi = math.log(kernel.tau_min), math.log(kernel.tau_max)
    fn = lambda u: float(kernel.density(math.exp(u))) * math.exp(2 * u) / (omega * omega * math.exp(2 * u) + 1.0)
    pts = [-math.log(omega)] if lo < -math.log(omega) < hi else None
    val, _ = integrate.quad(fn, lo, hi, points=pts, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def psd_closed(kernel, omega):
    """T = eps_p = I_p = 1 closed-form PSD (sum over relaxation modes)."""
    if isinstance(kernel, ModeSet):
        return psd_mode_sum(ModeSet(kernel.p, kernel.tau), omega, 1.0)
    if isinstance(kernel, HomogeneousDiffusion):
        return _closed_homogeneous(kernel, omega)
    if isinstance(kernel, InhomogeneousDiffusion):
        return _closed_inhomogeneous(kernel, omega)
    if isinstance(kernel, CutoffOneOverF):
        return _closed_cutoff(kernel, omega)
    raise UnsupportedVariantError(f"no closed form for {type(kernel).__name__}")


def psd_from_kernel(kernel, epsilon_p, temperature, i_p, omega, method="auto", quantum=False):
    """Flux-noise PSD S_Phi(omega) implied by a relaxation kernel.

    Parameters
    ----------
    kernel : relaxation kernel or ModeSet
    epsilon_p, temperature, i_p : float
        Reorganization energy, temperature (energy units), persistent current.
    omega : float or array_like
        Angular frequency, strictly positive.
    method : {"auto", "quadrature", "closed"}
        ``"quadrature"`` sine-transforms eps_p |dF/dt| numerically;
        ``"closed"`` sums the kernel's relaxation modes analytically.
        ``"auto"`` uses the closed form for a ModeSet, quadrature otherwise.
    quantum : bool
        Multiply by (omega / 2T) coth(omega / 2T); only meaningful when
        omega and temperature share units (hbar = k_B = 1).
    """
    if i_p <= 0:
        raise DomainError("persistent current must be positive")
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omegas <= 0):
        raise DomainError("omega must be positive")
    if method == "auto":
        method = "closed" if isinstance(kernel, ModeSet) else "quadrature"
    scale = epsilon_p * temperature / i_p ** 2
    out = np.empty_like(omegas)
    for i, w in enumerate(omegas):
        if method == "quadrature":
            out[i] = scale / w * sine_transform(kernel.rate, w, kernel.timescales())
        elif method == "closed":
            out[i] = scale * psd_closed(kernel, w)
        else:
            raise DomainError(f"unknown method {method!r}")
    if quantum:
        x = omegas / (2.0 * temperature)
        out = out * x / np.tanh(x)
    return float(out[0]) if np.ndim(omega) == 0 else out


def compute_spectrum(kernel, omegas, epsilon_p=1.0, temperature=1.0, i_p=1.0, method="closed"):
    """Evaluate the PSD on a grid and wrap it in a :class:`SpectrumResult`."""
    omegas = np.asarray(omegas, dtype=float)
    values = psd_from_kernel(kernel, epsilon_p, temperature, i_p, omegas, method=method)
    return SpectrumResult(omegas, np.atleast_1d(values), model_tag=f"{_tag(kernel)}/{method}")


def _tag(kernel):
    if isinstance(kernel, ModeSet):
        return f"modeset(n={kernel.p.size})"
    params = ",".join(f"{k}={v:g}" for k, v in vars(kernel).items())
    return f"{kernel.variant.value}({params})"


def spectral_slope(spectrum, band):
    """Least-squares slope of log S versus log omega inside ``band = (lo, hi)``."""
    lo, hi = band
    w, s = spectrum.frequencies, spectrum.values
    sel = (w >= lo) & (w <= hi)
    if sel.sum() < 8:
        raise DomainError(f"need at least 8 grid points in band, found {int(sel.sum())}")
    slope, _ = np.polyfit(np.log(w[sel]), np.log(s[sel]), 1)
    return float(slope)


def cutoff_frequencies(tau_min, tau_max):
    """Band edges f = 1 / (2 pi tau) of the cutoff 1/f model, as (low, high)."""
    return 1.0 / (2.0 * math.pi * tau_max), 1.0 / (2.0 * math.pi * tau_min)
