"""Polarization / depolarization measurement protocol as a signal model.

The qubit is held in one flux state for a time tau_p (polarizing the
environment), then decoupled for tau_d, after which the feedback flux that
restores degeneracy is read out:

    Phi_fb = Phi_p [F(tau_d) - F(tau_d + tau_p)].

Traces use lab units throughout: times in microseconds, flux in micro flux
quanta, temperature in millikelvin. Kernel time parameters must therefore
also be in microseconds.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TraceParseError

TRACE_COLUMNS = ("t_us", "phi_fb_uPhi0", "sigma_uPhi0")
_NOMINAL_SIGMA = 1.0


class Mode(enum.Enum):
    POLARIZATION = "polarization"
    DEPOLARIZATION = "depolarization"


@dataclass(frozen=True)
class ProtocolSchedule:
    """Durations of one protocol cycle: anneal, polarize, decouple, recover.

    Only ``tau_p`` and ``tau_d`` enter the signal; ``tau_a`` and ``tau_r``
    set the cycle length, which matters for drift.
    """

    tau_p: float
    tau_d: float
    tau_a: float = 0.0
    tau_r: float = 0.0
    prep_sign: int = 1
    repeats: int = 1

    def __post_init__(self):
        if min(self.tau_a, self.tau_p, self.tau_d, self.tau_r) < 0:
            raise DomainError("protocol times must be non-negative")
        if self.prep_sign not in (1, -1):
            raise DomainError("prep_sign must be +1 or -1")
        if self.repeats < 1:
            raise DomainError("repeats must be at least 1")

    @property
    def cycle(self):
        return self.tau_a + self.tau_p + self.tau_d + self.tau_r

    @property
    def well_separated(self):
        """Whether tau_d << tau_p, as recommended for polarization runs."""
        return self.tau_d <= 0.1 * self.tau_p


@dataclass(frozen=True)
class NoiseSpec:
    """Per-point Gaussian noise plus an optional slow sinusoidal drift."""

    gaussian_sigma: float = 0.0
    drift_amplitude: float = 0.0
    drift_timescale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0 or self.drift_amplitude < 0:
            raise DomainError("noise amplitudes must be non-negative")
        if self.drift_amplitude > 0 and not self.drift_timescale > 0:
            raise DomainError("drift_timescale must be positive when drift is on")


@dataclass(frozen=True)
class ExperimentTrace:
    """Feedback flux versus the varied protocol time."""

    mode: Mode
    fixed_time: float
    t: np.ndarray
    phi_fb: np.ndarray
    sigma: np.ndarray
    temperature: float | None = None
    device_id: str = ""
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        phi = np.asarray(self.phi_fb, dtype=float)
        sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), t.shape).copy()
        if t.ndim != 1 or t.size == 0 or phi.shape != t.shape:
            raise DomainError("trace needs equal-length, non-empty t and phi_fb columns")
        if np.any(np.diff(t) < 0):
            raise DomainError("trace times must be sorted")
        if not np.all(np.isfinite(phi)):
            raise DomainError("phi_fb must be finite")
        if not np.all(sigma > 0):
            raise DomainError("sigma must be positive")
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "phi_fb", phi)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return self.t.size

    def protocol_times(self):
        """(tau_p, tau_d) arrays for every point."""
        fixed = np.full_like(self.t, self.fixed_time)
        if self.mode is Mode.POLARIZATION:
            return self.t, fixed
        return fixed, self.t


def feedback_flux(kernel, phi_p, tau_p, tau_d):
    """Noiseless feedback flux Phi_p [F(tau_d) - F(tau_d + tau_p)].

    Both times may be arrays (broadcast together). An infinite ``tau_p``
    gives Phi_p F(tau_d).
    """
    tau_p, tau_d = np.broadcast_arrays(np.asarray(tau_p, dtype=float), np.asarray(tau_d, dtype=float))
    if np.any(tau_p < 0) or np.any(tau_d < 0):
        raise DomainError("protocol times must be non-negative")
    if not math.isfinite(phi_p):
        raise DomainError("phi_p must be finite")
    if np.all(tau_d == 0):
        # avoid the 1 - F cancellation for short polarization times
        out = phi_p * np.asarray(kernel.complement(tau_p), dtype=float)
    else:
        out = phi_p * (np.asarray(kernel.f(tau_d)) - np.asarray(kernel.f(tau_d + tau_p)))
    return float(out) if out.ndim == 0 else out


def _grid_mode(grid):
    tp = {s.tau_p for s in grid}
    td = {s.tau_d for s in grid}
    if len(grid) == 1 or (len(td) == 1 and len(tp) > 1):
        return Mode.POLARIZATION
    if len(tp) == 1 and len(td) > 1:
        return Mode.DEPOLARIZATION
    raise DomainError("schedule grid must vary exactly one of tau_p and tau_d")


def polarization_grid(times, tau_d, **kw):
    """Schedules with varying tau_p and fixed tau_d."""
    return [ProtocolSchedule(tau_p=float(t), tau_d=tau_d, **kw) for t in times]


def depolarization_grid(times, tau_p, **kw):
    """Schedules with varying tau_d and fixed tau_p."""
    return [ProtocolSchedule(tau_p=tau_p, tau_d=float(t), **kw) for t in times]


def _drift(noise, phase, wall):
    if noise.drift_amplitude == 0:
        return 0.0
    return noise.drift_amplitude * math.sin(wall / noise.drift_timescale + phase)


def synth_trace(kernel, phi_p, schedule_grid, noise=None, *, mode=None, temperature=None, device_id="synthetic"):
    """Generate a synthetic trace from a kernel and a protocol grid.

    Each grid point is measured ``repeats`` times with both initializations,
    alternating in wall-clock time. A common-mode drift adds to both
    branches while the signal flips sign with the initialization, so the
    half-difference keeps the signal and cancels the drift to first order.
    Gaussian noise of width ``gaussian_sigma`` is then added per point.

    Parameters
    ----------
    kernel : relaxation kernel
        Time parameters in microseconds.
    phi_p : float
        Polarization flux amplitude (micro flux quanta).
    schedule_grid : list of ProtocolSchedule
    noise : NoiseSpec, optional
        Defaults to a noiseless trace.
    mode : Mode or str, optional
        Needed only when the grid has one point and it is a depolarization run.

    Returns
    -------
    ExperimentTrace
        Sorted by the varied time. The sigma column holds ``gaussian_sigma``,
        or 1.0 when the Gaussian noise is off.
    """
    grid = list(schedule_grid)
    if not grid:
        raise DomainError("schedule grid is empty")
    mode = Mode(mode) if mode is not None else _grid_mode(grid)
    noise = noise or NoiseSpec()
    rng = np.random.default_rng(noise.seed)
    phase = rng.uniform(0.0, 2.0 * math.pi)

    tau_p = np.array([s.tau_p for s in grid])
    tau_d = np.array([s.tau_d for s in grid])
    signal = np.atleast_1d(feedback_flux(kernel, phi_p, tau_p, tau_d))

    # the signal flips with the initialization and survives the
    # half-difference exactly; only the drift residue is accumulated here
    residue = np.zeros_like(signal)
    wall = 0.0
    for i, s in enumerate(grid):
        for _ in range(s.repeats):
            first = _drift(noise, phase, wall + s.cycle)
            second = _drift(noise, phase, wall + 2 * s.cycle)
            wall += 2 * s.cycle
            residue[i] += 0.5 * s.prep_sign * (first - second)
        residue[i] /= s.repeats
    values = signal + residue if noise.drift_amplitude > 0 else signal.copy()

    if noise.gaussian_sigma > 0:
        values = values + rng.normal(0.0, noise.gaussian_sigma, size=values.shape)
        sigma = noise.gaussian_sigma
    else:
        sigma = _NOMINAL_SIGMA

    t = tau_p if mode is Mode.POLARIZATION else tau_d
    fixed = float(tau_d[0] if mode is Mode.POLARIZATION else tau_p[0])
    order = np.argsort(t, kind="stable")
    return ExperimentTrace(mode, fixed, t[order], values[order], np.full(t.shape, sigma),
                           temperature=temperature, device_id=device_id, seed=noise.seed)


def trace_model(trace, kernel, phi_p):
    """Noiseless model prediction at the trace's protocol times."""
    tau_p, tau_d = trace.protocol_times()
    return np.atleast_1d(feedback_flux(kernel, phi_p, tau_p, tau_d))


def trace_residuals(trace, kernel, phi_p):
    """Standardized residuals (data - model) / sigma."""
    return (trace.phi_fb - trace_model(trace, kernel, phi_p)) / trace.sigma


def write_trace(trace, dest=None):
    """Write a trace as CSV with ``#key=value`` metadata lines.

    ``dest`` may be a path or a text stream; with None the CSV is returned
    as a string. Floats use shortest round-trip formatting.
    """
    lines = [f"#mode={trace.mode.value}", f"#fixed_time_us={trace.fixed_time!r}"]
    if trace.temperature is not None:
        lines.append(f"#temperature_mK={trace.temperature!r}")
    lines.append(f"#device_id={trace.device_id}")
    if trace.seed is not None:
        lines.append(f"#seed={trace.seed}")
    lines.append(",".join(TRACE_COLUMNS))
    lines += [f"{t!r},{p!r},{s!r}" for t, p, s in zip(trace.t.tolist(), trace.phi_fb.tolist(), trace.sigma.tolist())]
    text = "\n".join(lines) + "\n"
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)
    return None


def read_trace(source):
    """Parse a trace CSV from a path, stream or string containing newlines.

    Raises
    ------
    TraceParseError
        With the offending line number.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as fh:
            text = fh.read()

    meta, rows, header_seen, lineno = {}, [], False, 0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise TraceParseError(f"metadata line without '=': {line!r}", lineno=lineno)
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if tuple(c.strip() for c in line.split(",")) != TRACE_COLUMNS:
                raise TraceParseError(f"expected header {','.join(TRACE_COLUMNS)}", lineno=lineno)
            header_seen = True
            continue
        cells = line.split(",")
        if len(cells) != 3:
            raise TraceParseError(f"expected 3 columns, found {len(cells)}", lineno=lineno)
        try:
            row = tuple(float(c) for c in cells)
        except ValueError:
            raise TraceParseError(f"non-numeric value in {line!r}", lineno=lineno) from None
        if not all(map(math.isfinite, row)):
            raise TraceParseError("non-finite value", lineno=lineno)
        if row[2] <= 0:
            raise TraceParseError("sigma must be positive", lineno=lineno)
        if rows and row[0] < rows[-1][0]:
            raise TraceParseError("times must be sorted", lineno=lineno)
        rows.append(row)

    if not header_seen or not rows:
        raise TraceParseError("no data rows", lineno=lineno)
    try:
        mode = Mode(meta.get("mode", "polarization"))
        fixed = float(meta.get("fixed_time_us", "0"))
        temperature = float(meta["temperature_mK"]) if "temperature_mK" in meta else None
        seed = int(meta["seed"]) if meta.get("seed") not in (None, "", "None") else None
    except ValueError as exc:
        raise TraceParseError(f"bad metadata: {exc}") from None
    t, phi, sigma = map(np.array, zip(*rows))
    extra = {k: v for k, v in meta.items() if k not in {"mode", "fixed_time_us", "temperature_mK", "device_id", "seed"}}
    return ExperimentTrace(mode, fixed, t, phi, sigma, temperature=temperature,
                           device_id=meta.get("device_id", ""), seed=seed, meta=extra)
