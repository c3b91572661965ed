import io
import math

import numpy as np
import pytest
from scipy import integrate

from fluxspin.errors import DomainError, TraceParseError
from fluxspin.kernels import CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion
from fluxspin.protocol import (ExperimentTrace, Mode, NoiseSpec, ProtocolSchedule, depolarization_grid,
                               feedback_flux, polarization_grid, read_trace, synth_trace, trace_residuals,
                               write_trace)
from fluxspin.spectrum import ModeSet

from conftest import PUB_ALPHA, PUB_PHI_P, PUB_TAU_MAX, PUB_TAU_MIN


def test_zero_polarization_gives_zero(any_kernel):
    assert feedback_flux(any_kernel, 34.8, 0.0, 3.0) == 0.0
    assert feedback_flux(any_kernel, 34.8, 0.0, 0.0) == 0.0


def test_full_polarization_gives_phi_p(any_kernel):
    assert feedback_flux(any_kernel, 34.8, math.inf, 0.0) == pytest.approx(34.8, rel=1e-12)


def test_published_example_against_superposition(published_cutoff):
    k = published_cutoff
    # Phi_p int p(tau) e^{-tau_d/tau} (1 - e^{-tau_p/tau}) dtau in log tau
    fn = lambda u: float(k.density(math.exp(u))) * math.exp(u) * math.exp(-1.0 / math.exp(u)) * -math.expm1(
        -2000.0 / math.exp(u))
    ref, _ = integrate.quad(fn, math.log(k.tau_min), math.log(k.tau_max), epsabs=0, epsrel=1e-13, limit=200)
    assert feedback_flux(k, PUB_PHI_P, 2000.0, 1.0) == pytest.approx(PUB_PHI_P * ref, rel=1e-9)


@pytest.mark.parametrize("t", [0.3, 12.0, 900.0, 4e4])
def test_consistency_with_kernel(any_kernel, t):
    assert abs(feedback_flux(any_kernel, 2.0, t, 0.0) - 2.0 * (1 - any_kernel.f(t))) < 1e-10
    assert abs(feedback_flux(any_kernel, 2.0, math.inf, t) - 2.0 * any_kernel.f(t)) < 1e-10


def test_single_exponential_footnote():
    g = 0.37
    m = ModeSet.from_weights([1.0], [1 / g])
    tp, td = np.meshgrid(np.geomspace(0.01, 30, 9), np.geomspace(0.01, 30, 9))
    expected = 5.0 * (1 - np.exp(-g * tp)) * np.exp(-g * td)
    assert np.allclose(feedback_flux(m, 5.0, tp, td), expected, rtol=1e-12, atol=1e-15)


def test_non_negative(any_kernel, rng):
    tp, td = 10 ** rng.uniform(-3, 5, 200), 10 ** rng.uniform(-3, 5, 200)
    assert np.all(feedback_flux(any_kernel, 1.0, tp, td) >= 0)


def test_feedback_domain_errors(any_kernel):
    with pytest.raises(DomainError):
        feedback_flux(any_kernel, 1.0, -1.0, 0.0)
    with pytest.raises(DomainError):
        feedback_flux(any_kernel, math.nan, 1.0, 0.0)


def test_schedule_validation():
    with pytest.raises(DomainError):
        ProtocolSchedule(tau_p=-1, tau_d=0)
    with pytest.raises(DomainError):
        ProtocolSchedule(tau_p=1, tau_d=0, prep_sign=0)
    with pytest.raises(DomainError):
        ProtocolSchedule(tau_p=1, tau_d=0, repeats=0)
    s = ProtocolSchedule(tau_p=100, tau_d=1, tau_a=5, tau_r=7)
    assert s.cycle == 113 and s.well_separated
    assert not ProtocolSchedule(tau_p=10, tau_d=5).well_separated


def test_noise_validation():
    with pytest.raises(DomainError):
        NoiseSpec(gaussian_sigma=-1)
    with pytest.raises(DomainError):
        NoiseSpec(drift_amplitude=1, drift_timescale=0)


def test_trace_validation():
    with pytest.raises(DomainError):
        ExperimentTrace("polarization", 0.0, [2.0, 1.0], [0.0, 0.0], 1.0)
    with pytest.raises(DomainError):
        ExperimentTrace("polarization", 0.0, [1.0, 2.0], [0.0, np.nan], 1.0)
    with pytest.raises(DomainError):
        ExperimentTrace("polarization", 0.0, [1.0, 2.0], [0.0, 0.0], 0.0)


def test_noiseless_synth_is_exact(published_cutoff):
    times = np.geomspace(5, 5000, 50)
    trace = synth_trace(published_cutoff, PUB_PHI_P, polarization_grid(times, 1.0))
    assert trace.mode is Mode.POLARIZATION and trace.fixed_time == 1.0
    assert np.array_equal(trace.phi_fb, np.atleast_1d(feedback_flux(published_cutoff, PUB_PHI_P, times, 1.0)))
    assert np.all(trace_residuals(trace, published_cutoff, PUB_PHI_P) == 0)


def test_depolarization_uses_fixed_tau_p(published_cutoff):
    times = np.geomspace(1, 1e4, 20)
    trace = synth_trace(published_cutoff, PUB_PHI_P, depolarization_grid(times, 2000.0))
    assert trace.mode is Mode.DEPOLARIZATION
    tau_p, tau_d = trace.protocol_times()
    assert np.all(tau_p == 2000.0) and np.array_equal(tau_d, times)
    assert np.array_equal(trace.phi_fb, feedback_flux(published_cutoff, PUB_PHI_P, 2000.0, times))


def test_inconsistent_grid_rejected(published_cutoff):
    grid = [ProtocolSchedule(10, 1), ProtocolSchedule(20, 2)]
    with pytest.raises(DomainError):
        synth_trace(published_cutoff, 1.0, grid)
    with pytest.raises(DomainError):
        synth_trace(published_cutoff, 1.0, [])


def test_single_point_depolarization_needs_mode(published_cutoff):
    tr = synth_trace(published_cutoff, 1.0, [ProtocolSchedule(2000, 50)], mode="depolarization")
    assert tr.mode is Mode.DEPOLARIZATION and tr.fixed_time == 2000


def test_seeded_synth_is_bit_identical(published_cutoff):
    grid = polarization_grid(np.geomspace(5, 5000, 30), 1.0, tau_a=100, repeats=3)
    noise = NoiseSpec(gaussian_sigma=0.5, drift_amplitude=2.0, drift_timescale=1e6, seed=42)
    a = synth_trace(published_cutoff, PUB_PHI_P, grid, noise)
    b = synth_trace(published_cutoff, PUB_PHI_P, grid, noise)
    assert np.array_equal(a.phi_fb, b.phi_fb)
    c = synth_trace(published_cutoff, PUB_PHI_P, grid, NoiseSpec(0.5, 2.0, 1e6, seed=43))
    assert not np.array_equal(a.phi_fb, c.phi_fb)


def two_branch(kernel, phi_p, grid, amp, timescale, seed):
    """Explicit interleaved measurement: both initializations see the same drift."""
    phase = np.random.default_rng(seed).uniform(0, 2 * math.pi)
    drift = lambda w: amp * math.sin(w / timescale + phase)
    out, wall = [], 0.0
    for s in grid:
        sig = feedback_flux(kernel, phi_p, s.tau_p, s.tau_d)
        acc = 0.0
        for _ in range(s.repeats):
            wall += s.cycle
            up = s.prep_sign * sig + drift(wall)
            wall += s.cycle
            down = -s.prep_sign * sig + drift(wall)
            acc += s.prep_sign * (up - down) / 2
        out.append(acc / s.repeats)
    return np.array(out)


@pytest.mark.parametrize("sign", [1, -1])
def test_drift_cancels_to_first_order(published_cutoff, sign):
    times = np.geomspace(5, 5000, 25)
    grid = polarization_grid(times, 1.0, tau_a=50, prep_sign=sign, repeats=2)
    amp, ts = 3.0, 2e5
    trace = synth_trace(published_cutoff, PUB_PHI_P, grid, NoiseSpec(0, amp, ts, seed=5))
    clean = np.atleast_1d(feedback_flux(published_cutoff, PUB_PHI_P, times, 1.0))
    cycles = np.array([s.cycle for s in grid])
    assert np.all(np.abs(trace.phi_fb - clean) <= amp * cycles / ts)
    assert np.allclose(trace.phi_fb, two_branch(published_cutoff, PUB_PHI_P, grid, amp, ts, 5), rtol=0, atol=1e-12)


def test_drift_contamination_scaling(published_cutoff):
    times = np.geomspace(5, 500, 10)
    grid = polarization_grid(times, 1.0)
    clean = np.atleast_1d(feedback_flux(published_cutoff, PUB_PHI_P, times, 1.0))
    # total wall time is ~2e3 us, far below every drift timescale used here

    def contamination(amp, ts):
        tr = synth_trace(published_cutoff, PUB_PHI_P, grid, NoiseSpec(0, amp, ts, seed=1))
        return np.max(np.abs(tr.phi_fb - clean))

    base = contamination(1.0, 1e6)
    for factor in (2.0, 5.0, 10.0):
        assert contamination(factor, 1e6) == pytest.approx(factor * base, rel=1e-6)
        assert contamination(1.0, factor * 1e6) == pytest.approx(base / factor, rel=0.02)


def test_residual_variance(published_cutoff):
    n = 400
    grid = polarization_grid(np.geomspace(5, 5000, n), 1.0)
    tr = synth_trace(published_cutoff, PUB_PHI_P, grid, NoiseSpec(gaussian_sigma=0.5, seed=11))
    r = trace_residuals(tr, published_cutoff, PUB_PHI_P)
    assert abs(np.var(r, ddof=1) - 1) < 3 / math.sqrt(n)


def test_mismatched_kernel_residuals():
    n = 60
    true = HomogeneousDiffusion(0.01)
    grid = polarization_grid(np.geomspace(1, 1000, n), 0.0)
    tr = synth_trace(true, 30.0, grid, NoiseSpec(gaussian_sigma=0.5, seed=3))
    r = trace_residuals(tr, HomogeneousDiffusion(0.1), 30.0)
    assert abs(np.mean(r)) > 3 / math.sqrt(n)


def test_csv_round_trip_is_bit_exact(published_cutoff, tmp_path):
    grid = polarization_grid(np.geomspace(5, 5000, 50), 1.0)
    tr = synth_trace(published_cutoff, PUB_PHI_P, grid, NoiseSpec(gaussian_sigma=0.5, seed=9), temperature=40.0,
                     device_id="qubit-7")
    path = tmp_path / "trace.csv"
    write_trace(tr, path)
    back = read_trace(path)
    for name in ("t", "phi_fb", "sigma"):
        assert np.array_equal(getattr(back, name), getattr(tr, name))
    assert (back.mode, back.fixed_time, back.temperature, back.device_id, back.seed) == (
        tr.mode, tr.fixed_time, 40.0, "qubit-7", 9)
    assert read_trace(write_trace(tr)).phi_fb.tolist() == tr.phi_fb.tolist()
    buf = io.StringIO()
    write_trace(tr, buf)
    buf.seek(0)
    assert np.array_equal(read_trace(buf).t, tr.t)


GOOD = "#mode=polarization\n#fixed_time_us=1.0\nt_us,phi_fb_uPhi0,sigma_uPhi0\n1.0,2.0,0.5\n2.0,3.0,0.5\n"


@pytest.mark.parametrize("text,line", [
    (GOOD.replace("1.0,2.0,0.5", "1.0,abc,0.5"), 4),
    (GOOD.replace("2.0,3.0,0.5", "2.0,3.0"), 5),
    (GOOD.replace("2.0,3.0,0.5", "0.5,3.0,0.5"), 5),
    (GOOD.replace("2.0,3.0,0.5", "2.0,3.0,0.0"), 5),
    (GOOD.replace("2.0,3.0,0.5", "2.0,nan,0.5"), 5),
    (GOOD.replace("t_us,", "time,"), 3),
    (GOOD.replace("#fixed_time_us=1.0", "#oops"), 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(TraceParseError) as info:
        read_trace(text)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}:")


def test_parse_rejects_empty_and_bad_metadata():
    with pytest.raises(TraceParseError):
        read_trace("#mode=polarization\nt_us,phi_fb_uPhi0,sigma_uPhi0\n")
    with pytest.raises(TraceParseError):
        read_trace(GOOD.replace("polarization", "sideways"))


def test_extra_metadata_is_kept():
    tr = read_trace("#operator=me\n" + GOOD)
    assert tr.meta == {"operator": "me"} and len(tr) == 2
