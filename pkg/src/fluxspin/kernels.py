"""Relaxation envelopes F(t) of the polarized spin environment.

Three environment models are provided:

* ``HomogeneousDiffusion`` -- diffusion across a wire of a single width,
  F(t) = (6/pi^2) sum_n exp(-4 Omega t n^2) / n^2.
* ``InhomogeneousDiffusion`` -- diffusion inside clusters with exponentially
  distributed widths, F(t) = (4/pi^2) int_0^inf v^3 coth(v)/sinh(v)^2
  exp(-Omega t / v^2) dv.
* ``CutoffOneOverF`` -- exponential relaxers with p(tau) ~ tau^(alpha-2)
  between tau_min and tau_max, written with incomplete gamma functions.

Every kernel satisfies F(0) = 1, F(inf) = 0 and is strictly decreasing.
Time only enters through dimensionless combinations, so any time unit works
as long as rates and times agree (e.g. microseconds with rates in 1/us).

Each kernel also exposes ``rate(t) = -dF/dt``, obtained analytically, which
the spectral module needs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, UnsupportedVariantError
from .special import gamma_difference, upper_incomplete_gamma

__all__ = [
    "Variant",
    "HomogeneousDiffusion",
    "InhomogeneousDiffusion",
    "CutoffOneOverF",
    "RelaxationKernel",
    "AsymptoticConstants",
    "asymptotic_constants",
    "short_time_coefficient",
    "f_homogeneous",
    "f_inhomogeneous",
    "f_cutoff_one_over_f",
    "f_asymptotic",
    "f_eval",
    "upper_incomplete_gamma",
    "inhomogeneous_normalization",
]

PI2 = math.pi ** 2
ALPHA_ONE_THRESHOLD = 1e-6

# homogeneous series: below this value of a = 4 Omega t the Poisson-resummed
# form is exact to ~exp(-pi^2 / a) < 1e-21
_THETA_SWITCH = 0.2
_N_SERIES = np.arange(1, 64, dtype=float)

# inhomogeneous quadrature
_QUAD_RTOL = 1e-11
_QUAD_ACCEPT = 1e-8
_COMPLEMENT_SWITCH = 0.1


class Variant(enum.Enum):
    HOMOGENEOUS = "homogeneous"
    INHOMOGENEOUS = "inhomogeneous"
    CUTOFF = "cutoff"


def _times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("time must be non-negative")
    return arr


def _positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


def _map(scalar_fn, t):
    arr = _times(t)
    if arr.ndim == 0:
        return scalar_fn(float(arr))
    return np.array([scalar_fn(float(x)) for x in arr.ravel()]).reshape(arr.shape)


# ---------------------------------------------------------------------------
# homogeneous diffusion

def _homogeneous(x, what):
    # x = Omega t ; returns F, 1 - F or -dF/d(Omega t)
    if math.isinf(x):
        return 1.0 if what == "complement" else 0.0
    a = 4.0 * x
    if a < _THETA_SWITCH:
        # sum_{n>=1} e^{-a n^2}/n^2 = pi^2/6 - sqrt(pi a) + a/2  (Jacobi theta)
        if what == "rate":
            if a == 0.0:
                return math.inf
            return 12.0 / PI2 * (math.sqrt(math.pi / a) - 1.0)
        comp = 6.0 / PI2 * (math.sqrt(math.pi * a) - 0.5 * a)
        return comp if what == "complement" else 1.0 - comp
    e = np.exp(-a * _N_SERIES ** 2)
    if what == "rate":
        return 24.0 / PI2 * float(e.sum())
    f = 6.0 / PI2 * float((e / _N_SERIES ** 2).sum())
    return 1.0 - f if what == "complement" else f


def f_homogeneous(t, omega_c):
    """Envelope of homogeneous spin diffusion.

    Parameters
    ----------
    t : float or array_like
        Time(s), non-negative.
    omega_c : float
        Diffusion rate Omega = D (pi / w)^2 in inverse time units.

    Returns
    -------
    float or ndarray
        F(t), relative error below 1e-12.
    """
    omega_c = _positive("omega_c", omega_c)
    return _map(lambda x: _homogeneous(omega_c * x, "f"), t)


# ---------------------------------------------------------------------------
# inhomogeneous diffusion

def _log_h(v):
    # log of v^3 coth(v) / sinh(v)^2, stable for all v > 0
    q = math.exp(-2.0 * v)
    return 3.0 * math.log(v) + math.log(4.0) - 2.0 * v + math.log1p(q) - 3.0 * math.log(-math.expm1(-2.0 * v))


def _quad(fn, upper, points, label, x):
    val, err = integrate.quad(fn, 0.0, upper, points=sorted(set(points)), epsabs=0.0,
                              epsrel=_QUAD_RTOL, limit=400)
    if not err <= _QUAD_ACCEPT * abs(val) + 1e-300:
        raise NumericalError(f"{label} quadrature did not converge at Omega t = {x}", estimate=val, error=err)
    return val


def _breakpoints(x, vmax):
    pts = [1.0, 5.0]
    r = math.sqrt(x)
    if r < vmax:
        pts += [p for p in (r / 3.0, r, 3.0 * r, 10.0 * r) if p < vmax]
    v0 = x ** (1.0 / 3.0)
    if x > 1.0:
        pts += [p for p in (0.5 * v0, v0, 1.5 * v0, 2.5 * v0) if p < vmax]
    return pts


def _inhomogeneous(x, what):
    if math.isinf(x):
        return 1.0 if what == "complement" else 0.0
    if x == 0.0:
        if what == "rate":
            return math.inf
        return 0.0 if what == "complement" else 1.0
    v0 = x ** (1.0 / 3.0)
    vmax = max(30.0, 5.0 * v0)
    pts = _breakpoints(x, vmax)
    if what == "complement" or (what == "f" and x < _COMPLEMENT_SWITCH):
        val = _quad(lambda v: math.exp(_log_h(v)) * -math.expm1(-x / (v * v)), vmax, pts, "1 - F", x)
        comp = 4.0 / PI2 * val
        return comp if what == "complement" else 1.0 - comp
    # factor out the steepest-descent scale so tiny values keep full precision
    shift = 3.0 * v0 if x > 1.0 else 0.0
    if what == "rate":
        val = _quad(lambda v: math.exp(_log_h(v) - 2.0 * math.log(v) - x / (v * v) + shift), vmax, pts, "dF/dt", x)
    else:
        val = _quad(lambda v: math.exp(_log_h(v) - x / (v * v) + shift), vmax, pts, "F", x)
    return 4.0 / PI2 * val * math.exp(-shift)


def f_inhomogeneous(t, omega_c):
    """Envelope of spin diffusion inside randomly sized clusters.

    The integral is evaluated by adaptive quadrature on v in (0, v_max] with
    v_max = max(30, 5 (Omega t)^(1/3)); for Omega t < 0.1 the complement
    1 - F is integrated instead so short-time values keep full precision.

    Raises
    ------
    NumericalError
        If the quadrature misses a relative accuracy of 1e-8.
    """
    omega_c = _positive("omega_c", omega_c)
    return _map(lambda x: _inhomogeneous(omega_c * x, "f"), t)


def inhomogeneous_normalization():
    """(4/pi^2) int_0^inf v^3 coth(v)/sinh(v)^2 dv, which must equal one."""
    val = _quad(lambda v: math.exp(_log_h(v)), 40.0, [1.0, 5.0], "normalization", 0.0)
    return 4.0 / PI2 * val


# ---------------------------------------------------------------------------
# cutoff 1/f^alpha

def _cutoff_prefactor(t, alpha, tau_min, log_span):
    # N t^(alpha-1) written scale-free; alpha == 1 gives 1 / log(tau_max/tau_min)
    if alpha == 1.0:
        return 1.0 / log_span
    return (alpha - 1.0) * (t / tau_min) ** (alpha - 1.0) / math.expm1((alpha - 1.0) * log_span)


def _cutoff(t, alpha, tau_min, tau_max, what):
    log_span = math.log(tau_max / tau_min)
    if math.isinf(t):
        return 1.0 if what == "complement" else 0.0
    if t == 0.0:
        if what == "rate":
            if alpha == 1.0:
                return -math.expm1(-log_span) / (tau_min * log_span)
            return ((alpha - 1.0) / (tau_min * math.expm1((alpha - 1.0) * log_span))
                    * -math.expm1((alpha - 2.0) * log_span) / (2.0 - alpha))
        return 0.0 if what == "complement" else 1.0
    pref = _cutoff_prefactor(t, alpha, tau_min, log_span)
    a, b = t / tau_max, t / tau_min
    if what == "rate":
        return pref / t * gamma_difference(2.0 - alpha, a, b)
    f = pref * gamma_difference(1.0 - alpha, a, b)
    return 1.0 - f if what == "complement" else f


def _check_cutoff(alpha, tau_min, tau_max):
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    tau_min = _positive("tau_min", tau_min)
    tau_max = _positive("tau_max", tau_max)
    if not tau_max > tau_min:
        raise DomainError(f"need tau_max > tau_min, got {tau_min}, {tau_max}")
    if abs(alpha - 1.0) < ALPHA_ONE_THRESHOLD:
        alpha = 1.0
    return alpha, tau_min, tau_max


def f_cutoff_one_over_f(t, alpha, tau_min, tau_max):
    """Envelope of the cutoff 1/f^alpha model.

    F(t) = N t^(alpha-1) [Gamma(1-alpha, t/tau_max) - Gamma(1-alpha, t/tau_min)]
    with N^-1 = log(tau_max/tau_min) at alpha = 1 and
    (tau_max^(alpha-1) - tau_min^(alpha-1)) / (alpha - 1) otherwise. Within
    1e-6 of alpha = 1 the logarithmic branch is used.
    """
    alpha, tau_min, tau_max = _check_cutoff(alpha, tau_min, tau_max)
    return _map(lambda x: _cutoff(x, alpha, tau_min, tau_max, "f"), t)


# ---------------------------------------------------------------------------
# kernel objects

@dataclass(frozen=True)
class HomogeneousDiffusion:
    """Spin diffusion across a wire of one width; ``omega_c`` is the rate Omega."""

    omega_c: float

    variant = Variant.HOMOGENEOUS

    def __post_init__(self):
        _positive("omega_c", self.omega_c)

    def f(self, t):
        return _map(lambda x: _homogeneous(self.omega_c * x, "f"), t)

    def complement(self, t):
        """1 - F(t), accurate when F is close to one."""
        return _map(lambda x: _homogeneous(self.omega_c * x, "complement"), t)

    def rate(self, t):
        """-dF/dt."""
        return _map(lambda x: self.omega_c * _homogeneous(self.omega_c * x, "rate"), t)

    def timescales(self):
        return (1.0 / (4.0 * self.omega_c),)


@dataclass(frozen=True)
class InhomogeneousDiffusion:
    """Spin diffusion in clusters with exponentially distributed widths."""

    omega_c: float

    variant = Variant.INHOMOGENEOUS

    def __post_init__(self):
        _positive("omega_c", self.omega_c)

    def f(self, t):
        return _map(lambda x: _inhomogeneous(self.omega_c * x, "f"), t)

    def complement(self, t):
        return _map(lambda x: _inhomogeneous(self.omega_c * x, "complement"), t)

    def rate(self, t):
        return _map(lambda x: self.omega_c * _inhomogeneous(self.omega_c * x, "rate"), t)

    def timescales(self):
        return (1.0 / self.omega_c,)


@dataclass(frozen=True)
class CutoffOneOverF:
    """Superposition of relaxers with p(tau) ~ tau^(alpha-2) on [tau_min, tau_max]."""

    alpha: float
    tau_min: float
    tau_max: float

    variant = Variant.CUTOFF

    def __post_init__(self):
        _check_cutoff(self.alpha, self.tau_min, self.tau_max)

    @property
    def _args(self):
        return _check_cutoff(self.alpha, self.tau_min, self.tau_max)

    def f(self, t):
        alpha, lo, hi = self._args
        return _map(lambda x: _cutoff(x, alpha, lo, hi, "f"), t)

    def complement(self, t):
        alpha, lo, hi = self._args
        return _map(lambda x: _cutoff(x, alpha, lo, hi, "complement"), t)

    def rate(self, t):
        alpha, lo, hi = self._args
        return _map(lambda x: _cutoff(x, alpha, lo, hi, "rate"), t)

    def density(self, tau):
        """Normalized distribution p(tau) of relaxation times."""
        alpha, lo, hi = self._args
        tau = np.asarray(tau, dtype=float)
        log_span = math.log(hi / lo)
        if alpha == 1.0:
            norm = 1.0 / log_span
        else:
            norm = (alpha - 1.0) / (lo ** (alpha - 1.0) * math.expm1((alpha - 1.0) * log_span))
        inside = (tau >= lo) & (tau <= hi)
        return np.where(inside, norm * np.where(inside, tau, 1.0) ** (alpha - 2.0), 0.0)

    def timescales(self):
        return (self.tau_min, self.tau_max)


RelaxationKernel = Union[HomogeneousDiffusion, InhomogeneousDiffusion, CutoffOneOverF]


def f_eval(kernel, t):
    """Evaluate F(t) for any kernel (or any object with an ``f`` method)."""
    try:
        fn = kernel.f
    except AttributeError:
        raise UnsupportedVariantError(f"{type(kernel).__name__} is not a relaxation kernel") from None
    return fn(t)


# ---------------------------------------------------------------------------
# asymptotics

@dataclass(frozen=True)
class AsymptoticConstants:
    """Coefficients of F ~ 1 - c_short sqrt(Omega t) and c_long exp(-kappa (Omega t)^nu).

    ``c_long`` is None where no constant prefactor exists (inhomogeneous case).
    """

    c_short: float
    c_long: float | None
    kappa: float
    nu: float


_PUB_CONSTANTS = {
    Variant.HOMOGENEOUS: AsymptoticConstants(48.0 * math.pi ** -3.5, 6.0 / PI2, 4.0, 1.0),
    Variant.INHOMOGENEOUS: AsymptoticConstants(16.0 * math.pi ** -3.5, None, 3.0, 1.0 / 3.0),
}

# leading coefficient of 1 - F actually produced by the series / integral:
# homogeneous (6/pi^2) * 2 sqrt(pi), inhomogeneous (4/pi^2) * sqrt(pi)
_EXACT_SHORT = {
    Variant.HOMOGENEOUS: 12.0 * math.pi ** -1.5,
    Variant.INHOMOGENEOUS: 4.0 * math.pi ** -1.5,
}


def _diffusion_variant(kernel):
    variant = getattr(kernel, "variant", None)
    if variant not in _PUB_CONSTANTS:
        raise UnsupportedVariantError("asymptotic forms exist only for the diffusion kernels")
    return variant


def asymptotic_constants(kernel):
    """Published asymptotic constants (C, C', kappa, nu) for a diffusion kernel."""
    return _PUB_CONSTANTS[_diffusion_variant(kernel)]


def short_time_coefficient(kernel):
    """Exact coefficient c in 1 - F = c sqrt(Omega t) + O(Omega t).

    These are 12 pi^(-3/2) and 4 pi^(-3/2); the published values are smaller
    by a factor pi^2 / 4.
    """
    return _EXACT_SHORT[_diffusion_variant(kernel)]


def f_asymptotic(kernel, t, regime, constants="published"):
    """Short- or long-time asymptotic form of a diffusion kernel.

    Parameters
    ----------
    kernel : HomogeneousDiffusion or InhomogeneousDiffusion
    t : float or array_like
    regime : {"short", "long"}
    constants : {"published", "exact"}
        ``"published"`` uses the published (C, C', kappa, nu). ``"exact"`` uses the
        true short-time coefficient and, for the inhomogeneous long-time
        branch, the full steepest-descent prefactor
        (16/pi^2) v0^3 sqrt(pi v0 / 3) with v0 = (Omega t)^(1/3).

    Notes
    -----
    With ``"published"`` the inhomogeneous long-time branch is exp(-3 (Omega t)^(1/3))
    without prefactor, since none is published.
    """
    variant = _diffusion_variant(kernel)
    consts = _PUB_CONSTANTS[variant]
    x = kernel.omega_c * _times(t)
    regime = str(regime).lower()
    if regime == "short":
        c = consts.c_short if constants == "published" else _EXACT_SHORT[variant]
        return 1.0 - c * np.sqrt(x)
    if regime != "long":
        raise DomainError(f"regime must be 'short' or 'long', got {regime!r}")
    decay = np.exp(-consts.kappa * x ** consts.nu)
    if variant is Variant.HOMOGENEOUS:
        return consts.c_long * decay
    if constants == "published":
        return decay
    v0 = np.cbrt(x)
    return 16.0 / PI2 * v0 ** 3 * np.sqrt(math.pi * v0 / 3.0) * decay
