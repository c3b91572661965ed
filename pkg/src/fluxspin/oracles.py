"""Stochastic oracles for the closed-form kernels.

Two independent models of the spin environment:

* a Langevin ensemble of overdamped modes mu_n relaxing towards chi B_n,
  whose order parameter xi = 2 sum_n B_n mu_n has mean eps_p (1 - F(t)) and
  variance 2 eps_p T;
* a Poisson-cluster ensemble: clusters of exponentially distributed width
  w, each relaxing by diffusion, averaged with weight w^3.

Each ensemble member draws from its own Philox stream keyed by
(seed, member), so results do not depend on how members are batched.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .spectrum import ModeSet

_CHUNK = 512
_POISSON_SWITCH = 0.2
_TAIL_BOUND = 1e-10


def member_rng(seed, member):
    """Counter-based generator for one ensemble member."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + int(member)))


class Protocol(enum.Enum):
    POLARIZE = "polarize"
    DEPOLARIZE = "depolarize"
    STEADY = "steady"


@dataclass(frozen=True)
class LangevinConfig:
    """Mode ensemble: form factors ``b_n``, relaxation times ``tau_n``.

    ``dt`` sets the time resolution: requested grid times are rounded to
    multiples of it. Because each update uses the exact Ornstein-Uhlenbeck
    transition, no further sub-stepping is needed.
    """

    b_n: np.ndarray
    tau_n: np.ndarray
    chi: float
    temperature: float
    dt: float
    ensemble_size: int = 10_000
    seed: int = 0
    drive_on: bool = True

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b_n, dtype=float))
        tau = np.atleast_1d(np.asarray(self.tau_n, dtype=float))
        if b.shape != tau.shape or b.size == 0:
            raise DomainError("b_n and tau_n must be non-empty and of equal length")
        if not np.all(tau > 0):
            raise DomainError("relaxation times must be positive")
        if self.chi <= 0 or self.temperature < 0:
            raise DomainError("chi must be positive and temperature non-negative")
        if not 0 < self.dt <= tau.min() / 20:
            raise DomainError(f"dt={self.dt} exceeds min(tau)/20={tau.min() / 20}")
        if self.ensemble_size < 100:
            raise DomainError("ensemble_size must be at least 100")
        object.__setattr__(self, "b_n", b)
        object.__setattr__(self, "tau_n", tau)

    @property
    def modes(self):
        return ModeSet.from_form_factors(self.b_n, self.tau_n, self.chi, self.temperature)

    @property
    def epsilon_p(self):
        return 2.0 * self.chi * float(np.sum(self.b_n ** 2))


def diffusion_mode_config(n_modes=200, tau_1=1.0, epsilon_p=1.0, chi=1.0, temperature=1.0,
                          ensemble_size=10_000, seed=0, dt=None):
    """Langevin config for the diffusion family tau_n = tau_1 / n^2, p_n ~ 1 / n^2."""
    n = np.arange(1, n_modes + 1, dtype=float)
    p = 1.0 / n ** 2
    p /= p.sum()
    b = np.sqrt(epsilon_p * p / (2.0 * chi))
    tau = tau_1 / n ** 2
    dt = tau[-1] / 20 if dt is None else dt
    return LangevinConfig(b, tau, chi, temperature, dt, ensemble_size, seed)


@dataclass(frozen=True)
class LangevinResult:
    """Ensemble statistics of xi on the (dt-rounded) grid ``t``.

    ``samples`` holds xi for every member and grid time, shape
    (ensemble_size, len(t)). ``mode_msd`` is the member- and time-averaged
    (mu_n - chi B_n drive)^2, which equals chi T in equilibrium.
    """

    t: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    samples: np.ndarray
    mode_msd: np.ndarray

    @property
    def stderr(self):
        return np.sqrt(self.variance / self.samples.shape[0])


def _snap(t_grid, dt):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0):
        raise DomainError("time grid must be a non-empty list of non-negative times")
    steps = np.round(t / dt)
    if np.any(np.diff(steps) < 0):
        raise DomainError("time grid must be sorted")
    return steps * dt


def langevin_run(config, t_grid, protocol="polarize", t0=None):
    """Simulate the mode ensemble and return statistics of xi(t).

    Each mode obeys d mu = -(mu - chi B drive) / tau dt + sqrt(2 chi T / tau) dW.

    Parameters
    ----------
    config : LangevinConfig
    t_grid : array_like
        Sorted observation times, rounded to multiples of ``config.dt``.
    protocol : {"polarize", "depolarize", "steady"}
        ``polarize`` starts from the undriven equilibrium and switches the
        drive on at t = 0. ``depolarize`` first polarizes for ``t0`` (one
        exact transition; ``t0 = inf`` means full polarization) and
        switches the drive off at t = 0. ``steady`` samples the equilibrium
        with the drive set by ``config.drive_on``.
    """
    protocol = Protocol(protocol)
    if protocol is Protocol.DEPOLARIZE and (t0 is None or t0 < 0):
        raise DomainError("depolarize needs t0 >= 0")
    t = _snap(t_grid, config.dt)
    b, tau, chi, temp = config.b_n, config.tau_n, config.chi, config.temperature
    steps = np.diff(np.concatenate(([0.0], t)))
    decay = np.exp(-steps[:, None] / tau)
    kick = np.sqrt(chi * temp * -np.expm1(-2.0 * steps[:, None] / tau))
    sd_eq = math.sqrt(chi * temp)

    drive = {Protocol.POLARIZE: 1.0, Protocol.DEPOLARIZE: 0.0,
             Protocol.STEADY: 1.0 if config.drive_on else 0.0}[protocol]
    target = chi * b * drive
    start = 0.0 if protocol is Protocol.POLARIZE else target

    m = config.ensemble_size
    xi = np.empty((m, t.size))
    msd = np.zeros_like(b)
    for lo in range(0, m, _CHUNK):
        members = range(lo, min(lo + _CHUNK, m))
        draws = np.stack([member_rng(config.seed, k).standard_normal((t.size + 2, b.size)) for k in members])
        mu = start + sd_eq * draws[:, 0]
        if protocol is Protocol.DEPOLARIZE:
            full = chi * b
            if math.isinf(t0):
                mu = full + sd_eq * draws[:, 1]
            else:
                d0 = np.exp(-t0 / tau)
                mu = full + (mu - full) * d0 + np.sqrt(chi * temp * -np.expm1(-2.0 * t0 / tau)) * draws[:, 1]
        for k in range(t.size):
            mu = target + (mu - target) * decay[k] + kick[k] * draws[:, k + 2]
            xi[lo:lo + len(members), k] = 2.0 * mu @ b
            msd += ((mu - target) ** 2).sum(axis=0)
    return LangevinResult(t, xi.mean(axis=0), xi.var(axis=0, ddof=1), xi, msd / (m * t.size))


@dataclass(frozen=True)
class Comparison:
    """Ensemble estimate next to its closed form, with z-scores."""

    t: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    closed: np.ndarray

    @property
    def z(self):
        diff = self.estimate - self.closed
        # rounding floor, so a deterministic ensemble does not turn 1e-17 into a huge z
        floor = 1e-12 * np.max(np.abs(self.closed), initial=0.0)
        err = np.hypot(self.stderr, floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(err > 0, diff / err, np.where(diff == 0, 0.0, np.inf))

    def within(self, n_sigma=3.0):
        return bool(np.all(np.abs(self.z) <= n_sigma))


def langevin_polarize_check(config, t_grid):
    """Polarization mean versus eps_p (1 - F(t))."""
    res = langevin_run(config, t_grid, "polarize")
    modes = config.modes
    return Comparison(res.t, res.mean, res.stderr, modes.epsilon_p * modes.complement(res.t))


def langevin_depolarize_identity(config, t0, t_grid):
    """Depolarization mean versus eps_p sum_n p_n [e^(-t/tau_n) - e^(-(t+t0)/tau_n)]."""
    res = langevin_run(config, t_grid, "depolarize", t0=t0)
    modes = config.modes
    later = 0.0 if math.isinf(t0) else modes.f(res.t + t0)
    return Comparison(res.t, res.mean, res.stderr, modes.epsilon_p * (modes.f(res.t) - later))


def diffusion_modes(width, diffusion_coeff, field_gradient, n_modes):
    """Form factors and times of a diffusing segment of width ``width``.

    B_n = B' (-1)^(n+1) sqrt(2 w) / k_n, tau_n = 1 / (D k_n^2), k_n = 2 pi n / w.
    """
    n = np.arange(1, n_modes + 1, dtype=float)
    k = 2.0 * math.pi * n / width
    b = field_gradient * np.where(n % 2 == 1, 1.0, -1.0) * math.sqrt(2.0 * width) / k
    return b, 1.0 / (diffusion_coeff * k * k)


@dataclass(frozen=True)
class ClusterEnsembleConfig:
    """Poisson-cluster ensemble with widths drawn from Exp(mean_width).

    ``width_distribution="fixed"`` gives every cluster the mean width,
    which reduces to the homogeneous kernel.
    """

    mean_width: float
    samples: int = 100_000
    modes_per_cluster: int = 50
    diffusion_coeff: float = 1.0
    field_gradient: float = 1.0
    seed: int = 0
    n_bootstrap: int = 1000
    width_distribution: str = "exponential"

    def __post_init__(self):
        if self.samples < 1000:
            raise DomainError("samples must be at least 1000")
        if self.modes_per_cluster < 50:
            raise DomainError("modes_per_cluster must be at least 50")
        if not self.mean_width > 0 or not self.diffusion_coeff > 0:
            raise DomainError("mean_width and diffusion_coeff must be positive")
        if self.width_distribution not in ("exponential", "fixed"):
            raise DomainError(f"unknown width distribution {self.width_distribution!r}")

    @property
    def omega_c(self):
        return math.pi ** 2 * self.diffusion_coeff / self.mean_width ** 2


@dataclass(frozen=True)
class ClusterResult:
    t: np.ndarray
    f: np.ndarray
    stderr: np.ndarray
    mean_sum_b2: float


def _relaxed_mode_sum(a, n_modes):
    """sum_n (1 - exp(-a n^2)) / n^2 for an array of a >= 0."""
    out = np.empty_like(a)
    small = a < _POISSON_SWITCH
    # Poisson resummation; the dropped terms are below exp(-pi^2 / a) ~ 1e-21
    out[small] = np.sqrt(math.pi * a[small]) - 0.5 * a[small]
    big = a[~small]
    if big.size:
        cap = n_modes
        while np.exp(-big.min() * (cap + 1) ** 2) / cap >= _TAIL_BOUND:
            cap *= 2
            if cap > 10 * n_modes:
                raise NumericalError(f"mode tail above {_TAIL_BOUND} even with {10 * n_modes} modes")
        n2 = np.arange(1, cap + 1, dtype=float) ** 2
        # saturated tail sum_{n > cap} 1/n^2 is added analytically
        out[~small] = (-np.expm1(-big[:, None] * n2) / n2).sum(axis=1) + float(special.polygamma(1, cap + 1))
    return out


def cluster_ensemble_f(config, t_grid):
    """Ensemble-averaged F(t) over clusters, with bootstrap standard errors.

    Every cluster of width w contributes the exact mode sum
    sum_n (w^3 / pi^2 n^2)(1 - exp(-D (2 pi n / w)^2 t)); its saturation
    value w^3 / 6 normalizes the ratio estimator 1 - F.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(t < 0):
        raise DomainError("time grid must be non-negative")
    rng = np.random.default_rng(config.seed)
    if config.width_distribution == "fixed":
        w = np.full(config.samples, config.mean_width)
    else:
        w = rng.exponential(config.mean_width, size=config.samples)
    w3 = w ** 3
    num = np.empty((w.size, t.size))
    for j, tj in enumerate(t):
        a = 4.0 * math.pi ** 2 * config.diffusion_coeff * tj / (w * w)
        num[:, j] = w3 * _relaxed_mode_sum(a, config.modes_per_cluster) / math.pi ** 2
    den = w3 / 6.0
    f = 1.0 - num.mean(axis=0) / den.mean()

    n = w.size
    boot = np.empty((config.n_bootstrap, t.size))
    for i in range(config.n_bootstrap):
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
        boot[i] = 1.0 - (counts @ num) / (counts @ den)
    stderr = boot.std(axis=0, ddof=1)
    return ClusterResult(t, f, stderr, config.field_gradient ** 2 * float(w3.mean()) / 12.0)


@dataclass(frozen=True)
class GaussianityResult:
    skewness: float
    excess_kurtosis: float
    skewness_se: float
    kurtosis_se: float

    def passes(self, n_sigma=5.0):
        return (abs(self.skewness) <= n_sigma * self.skewness_se
                and abs(self.excess_kurtosis) <= n_sigma * self.kurtosis_se)


def gaussianity_check(samples):
    """Sample skewness and excess kurtosis with their large-n standard errors."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 10_000:
        raise DomainError(f"need at least 10000 samples, got {n}")
    x = x - x.mean()
    m2 = np.mean(x ** 2)
    skew = float(np.mean(x ** 3) / m2 ** 1.5)
    kurt = float(np.mean(x ** 4) / m2 ** 2 - 3.0)
    return GaussianityResult(skew, kurt, math.sqrt(6.0 / n), math.sqrt(24.0 / n))
