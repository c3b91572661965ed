import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxspin.errors import DomainError, NumericalError, UnsupportedVariantError
from fluxspin.kernels import CutoffOneOverF, HomogeneousDiffusion, InhomogeneousDiffusion
from fluxspin.spectrum import (ModeSet, SpectrumResult, compute_spectrum, cutoff_frequencies, psd_closed,
                               psd_from_kernel, psd_mode_sum, sine_transform, spectral_slope)

PI = math.pi


def test_single_mode_lorentzian():
    m = ModeSet.from_weights([1.0], [3.0], epsilon_p=2.0, temperature=0.5)
    w = np.array([0.0, 0.1, 1.0, 10.0])
    assert np.allclose(psd_mode_sum(m, w, 2.0), 0.25 * 3.0 / (9 * w ** 2 + 1), rtol=1e-15)
    assert psd_mode_sum(m, 0.0, 1.0) == pytest.approx(3.0, rel=1e-15)


def test_two_modes_by_hand():
    tau = 2.0
    m = ModeSet.from_weights([0.5, 0.5], [tau, 2 * tau])
    # 0.5 tau / 2 + 0.5 (2 tau) / 5
    assert psd_mode_sum(m, 1 / tau, 1.0) == pytest.approx(tau / 4 + tau / 5, rel=1e-15)


def test_lorentzian_tail():
    m = ModeSet.from_weights([0.2, 0.3, 0.5], [1.0, 4.0, 0.1], epsilon_p=3.0, temperature=2.0)
    w = 1e7
    assert psd_mode_sum(m, w, 1.5) * w * w == pytest.approx(6.0 / 2.25 * np.sum(m.p / m.tau), rel=1e-10)


def test_zero_frequency_is_mean_time():
    m = ModeSet.from_weights([0.25, 0.75], [1.0, 5.0])
    assert psd_mode_sum(m, 0.0, 1.0) == pytest.approx(0.25 + 3.75)


@pytest.mark.parametrize("kw", [
    dict(p=[], tau=[]),
    dict(p=[0.5, 0.4], tau=[1.0, 2.0]),
    dict(p=[1.2, -0.2], tau=[1.0, 2.0]),
    dict(p=[1.0], tau=[0.0]),
    dict(p=[0.5, 0.5], tau=[1.0]),
])
def test_modeset_validation(kw):
    with pytest.raises(DomainError):
        ModeSet(np.array(kw["p"], float), np.array(kw["tau"], float))


def test_modeset_from_form_factors():
    m = ModeSet.from_form_factors([1.0, 2.0], [1.0, 0.5], chi=0.5, temperature=1.0)
    assert np.allclose(m.p, [0.2, 0.8]) and m.epsilon_p == pytest.approx(2 * 0.5 * 5.0)


def test_modeset_kernel_interface():
    m = ModeSet.from_weights([0.4, 0.6], [1.0, 3.0])
    t = np.array([0.0, 0.5, 2.0])
    assert np.allclose(m.f(t), 0.4 * np.exp(-t) + 0.6 * np.exp(-t / 3))
    assert np.allclose(m.rate(t), 0.4 * np.exp(-t) + 0.2 * np.exp(-t / 3))


def test_psd_domain_errors():
    m = ModeSet.from_weights([1.0], [1.0])
    with pytest.raises(DomainError):
        psd_mode_sum(m, -1.0, 1.0)
    with pytest.raises(DomainError):
        psd_mode_sum(m, 1.0, 0.0)
    with pytest.raises(DomainError):
        psd_from_kernel(m, 1, 1, 1, 0.0)
    with pytest.raises(DomainError):
        psd_from_kernel(m, 1, 1, 1, 1.0, method="bogus")
    with pytest.raises(UnsupportedVariantError):
        psd_closed(object(), 1.0)


def test_single_exponential_quadrature_matches_lorentzian():
    m = ModeSet.from_weights([1.0], [2.0])
    w = np.geomspace(1e-2, 1e2, 30) / 2.0
    quad = psd_from_kernel(m, 1.0, 1.0, 1.0, w, method="quadrature")
    assert np.allclose(quad, psd_mode_sum(m, w, 1.0), rtol=1e-6, atol=0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(-2.0, 2.0)), min_size=1, max_size=12))
def test_fdt_consistency_random_modesets(entries):
    w, lt = map(np.array, zip(*entries))
    m = ModeSet.from_weights(w / w.sum(), 10.0 ** lt)
    omega = np.geomspace(1e-2, 1e2, 30) / np.exp(np.mean(np.log(m.tau)))
    quad = psd_from_kernel(m, 1.0, 1.0, 1.0, omega, method="quadrature")
    assert np.all(np.abs(quad / psd_mode_sum(m, omega, 1.0) - 1) < 1e-6)


@pytest.mark.parametrize("kernel", [HomogeneousDiffusion(1.0), InhomogeneousDiffusion(1.0),
                                    CutoffOneOverF(0.98, 11.6, 8560.0)], ids=["hom", "inh", "cut"])
def test_dual_path_agreement(kernel):
    rate = 1.0 / max(kernel.timescales()) if isinstance(kernel, CutoffOneOverF) else 1.0
    span = (1e-2, 1e5) if isinstance(kernel, CutoffOneOverF) else (1e-2, 1e2)
    w = np.geomspace(*span, 12) * rate
    quad = psd_from_kernel(kernel, 1.0, 1.0, 1.0, w, method="quadrature")
    closed = psd_from_kernel(kernel, 1.0, 1.0, 1.0, w, method="closed")
    assert np.all(np.abs(quad / closed - 1) < 1e-6)


@pytest.mark.parametrize("r", [0.01, 1.0, 30.0])
def test_inhomogeneous_closed_form_against_mpmath(r):
    # double form with the displayed prefactor 4 T eps_p / (Omega pi^2 I_p^2)
    mp.mp.dps = 25
    fn = lambda v: mp.coth(v) / mp.sinh(v) ** 2 * v / (r ** 2 + v ** -4)
    ref = 4 / mp.pi ** 2 * mp.quad(fn, [0, 0.5, 1, 5, 40])
    assert psd_closed(InhomogeneousDiffusion(1.0), r) == pytest.approx(float(ref), rel=1e-9)


def test_homogeneous_closed_form_against_mpmath():
    mp.mp.dps = 25
    for r in (0.1, 10.0, 1e3):
        ref = 6 / mp.pi ** 2 * mp.nsum(lambda n: 4 / (16 * n ** 4 + r ** 2), [1, mp.inf])
        assert psd_closed(HomogeneousDiffusion(1.0), r) == pytest.approx(float(ref), rel=1e-10)


def test_prefactors_scale():
    k = InhomogeneousDiffusion(2.0)
    base = psd_from_kernel(k, 1.0, 1.0, 1.0, 3.0, method="closed")
    assert psd_from_kernel(k, 3.0, 0.5, 2.0, 3.0, method="closed") == pytest.approx(base * 1.5 / 4)


def test_exact_power_law_slope():
    w = np.geomspace(0.3, 4e3, 17)
    assert spectral_slope(SpectrumResult(w, w ** -1.5, "power"), (0.3, 4e3)) == pytest.approx(-1.5, abs=1e-12)


def test_slope_needs_eight_points():
    w = np.geomspace(1, 10, 20)
    with pytest.raises(DomainError):
        spectral_slope(SpectrumResult(w, w ** -1, "x"), (1.0, 1.5))


def test_spectrum_result_validation():
    with pytest.raises(DomainError):
        SpectrumResult(np.array([1.0, 1.0]), np.array([1.0, 2.0]), "x")
    with pytest.raises(DomainError):
        SpectrumResult(np.array([1.0, 2.0]), np.array([1.0]), "x")


@pytest.mark.parametrize("alpha", [0.5, 0.98, 1.0, 1.4])
def test_cutoff_slope_mid_band(alpha):
    tmin, tmax = 1.0, 1e6
    spec = compute_spectrum(CutoffOneOverF(alpha, tmin, tmax), np.geomspace(10 / tmax, 0.1 / tmin, 40))
    assert spectral_slope(spec, (10 / tmax, 0.1 / tmin)) == pytest.approx(-alpha, abs=0.05)


def test_cutoff_alpha_one_fitted_band():
    tmin, tmax = 11.6, 8560.0
    spec = compute_spectrum(CutoffOneOverF(1.0, tmin, tmax), np.geomspace(10 / tmax, 0.1 / tmin, 30))
    assert spectral_slope(spec, (10 / tmax, 0.1 / tmin)) == pytest.approx(-1.0, abs=0.05)


@pytest.mark.parametrize("cls", [HomogeneousDiffusion, InhomogeneousDiffusion])
def test_diffusion_high_frequency_slope(cls):
    spec = compute_spectrum(cls(1.0), np.geomspace(10, 1000, 30))
    assert spectral_slope(spec, (10, 1000)) == pytest.approx(-1.5, abs=0.05)


def test_homogeneous_slope_approaches_three_halves():
    # the local slope is -3/2 + O(sqrt(Omega/omega)), so far bands get closer
    slopes = []
    for lo in (10, 1e3, 1e5, 1e7):
        spec = compute_spectrum(HomogeneousDiffusion(1.0), np.geomspace(lo, 100 * lo, 20))
        slopes.append(spectral_slope(spec, (lo, 100 * lo)))
    dev = np.abs(np.array(slopes) + 1.5)
    assert np.all(np.diff(dev) < 0) and dev[-1] < 0.005


@pytest.mark.parametrize("cls", [HomogeneousDiffusion, InhomogeneousDiffusion])
def test_diffusion_plateau(cls):
    spec = compute_spectrum(cls(1.0), np.geomspace(1e-3, 1e-2, 12))
    assert spectral_slope(spec, (1e-3, 1e-2)) == pytest.approx(0.0, abs=0.05)


def test_positivity(any_kernel):
    rate = 1.0 / min(any_kernel.timescales())
    w = np.geomspace(1e-4, 1e4, 25) * rate
    assert np.all(psd_from_kernel(any_kernel, 1.0, 1.0, 1.0, w, method="closed") > 0)


def test_quantum_flag():
    m = ModeSet.from_weights([1.0], [1.0])
    w = np.array([0.01, 1.0, 10.0])
    classical = psd_from_kernel(m, 1.0, 0.5, 1.0, w)
    quantum = psd_from_kernel(m, 1.0, 0.5, 1.0, w, quantum=True)
    assert np.allclose(quantum / classical, w / np.tanh(w))


def test_sine_transform_known_integral():
    # int_0^inf sin(w t) e^{-t} dt = w / (1 + w^2)
    for w in (0.01, 1.0, 300.0):
        assert sine_transform(lambda t: math.exp(-t), w, (1.0,)) == pytest.approx(w / (1 + w * w), rel=1e-9)


def test_sine_transform_reports_error():
    with pytest.raises(NumericalError) as info:
        sine_transform(lambda t: math.exp(-t), 1.0, (1.0,), target=1e-30)
    assert info.value.estimate == pytest.approx(0.5, rel=1e-8)
    assert info.value.error > 0


def test_cutoff_frequencies():
    lo, hi = cutoff_frequencies(10e-6, 4e-3)
    assert lo == pytest.approx(1 / (2 * PI * 4e-3)) and hi == pytest.approx(1 / (2 * PI * 10e-6))


def test_published_cutoff_frequencies_published():
    # published band edges 40 Hz and 20 kHz from tau_max ~ 4 ms and tau_min ~ 10 us
    lo, hi = cutoff_frequencies(10e-6, 4e-3)
    assert lo == pytest.approx(40.0, rel=0.2)
    assert hi == pytest.approx(20e3, rel=0.2)
