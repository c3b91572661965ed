import math

import numpy as np
import pytest

from fluxspin.constants import K_B, MU_0, MU_B, PHI_0
from fluxspin.errors import DomainError, InfeasibleError, UnsupportedVariantError
from fluxspin.inference import curie_weiss, fit_curie_weiss
from fluxspin.oracles import LangevinConfig, diffusion_modes, langevin_run
from fluxspin.physics import (DevicePhysics, coherence_factor, estimate_surface_density, omega_of_filling,
                              reorganization_energy, solve_cluster_parameters, surface_density_from_amplitude)

DEVICE = DevicePhysics(i_p=2e-6, loop_length=0.7e-3, wire_width=1e-6)
T, T_C = 12.5e-3, 5.7e-3


def published_density():
    n_s, _ = estimate_surface_density(DEVICE, phi_p=34.8, temperature=12.5, t_c=5.7)
    return n_s


def test_surface_density_by_hand():
    # Phi_p = 2 (mu0 muB)^2 n_s I_p L / (W k_B (T - T_c)) inverted by hand
    phi = 34.8e-6 * PHI_0
    expected = phi * K_B * (T - T_C) * DEVICE.wire_width / (2 * (MU_0 * MU_B) ** 2 * DEVICE.i_p * DEVICE.loop_length)
    assert published_density() == pytest.approx(expected, rel=1e-12)


def test_surface_density_published_scale():
    assert 0.5 <= published_density() / 1.2e16 <= 2.0


def test_surface_density_linear_and_vanishing():
    n1, _ = estimate_surface_density(DEVICE, phi_p=34.8, temperature=12.5, t_c=5.7)
    n2, _ = estimate_surface_density(DEVICE, phi_p=69.6, temperature=12.5, t_c=5.7)
    assert n2 == pytest.approx(2 * n1, rel=1e-14)
    near = [estimate_surface_density(DEVICE, phi_p=34.8, temperature=5.7 + d, t_c=5.7)[0] for d in (1e-1, 1e-3, 1e-6)]
    assert near[0] > near[1] > near[2] and near[2] < 1e-6 * n1


def test_surface_density_from_fit_propagates_error():
    temps = np.linspace(12.5, 21.0, 6)
    y = curie_weiss(temps, 34.8 * 6.8, 5.7) * (1 + 0.03 * np.random.default_rng(4).standard_normal(6))
    fit = fit_curie_weiss(temps, y, 0.03 * y)
    n_s, err = estimate_surface_density(DEVICE, fit)
    assert n_s == pytest.approx(surface_density_from_amplitude(DEVICE, fit["amplitude"] * 1e-9 * PHI_0))
    assert err / n_s == pytest.approx(fit.uncertainties["amplitude"] / fit["amplitude"])


def test_general_spin_is_opt_in():
    spin1 = DevicePhysics(2e-6, 0.7e-3, 1e-6, spin=1.0)
    with pytest.raises(UnsupportedVariantError):
        surface_density_from_amplitude(spin1, 1e-20)
    half = surface_density_from_amplitude(DEVICE, 1e-20)
    # S(S+1) grows from 3/4 to 2
    assert surface_density_from_amplitude(spin1, 1e-20, general_spin=True) == pytest.approx(half * 0.75 / 2)


def test_estimate_domain_errors():
    with pytest.raises(DomainError):
        estimate_surface_density(DEVICE)
    with pytest.raises(DomainError):
        estimate_surface_density(DEVICE, phi_p=1.0, temperature=5.0, t_c=5.7)
    with pytest.raises(DomainError):
        DevicePhysics(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        surface_density_from_amplitude(DEVICE, -1.0)


def test_thin_wire_flag():
    assert DEVICE.thin_wire is None
    assert DevicePhysics(2e-6, 0.7e-3, 1e-6, wire_height=0.1e-6).thin_wire
    assert not DevicePhysics(2e-6, 0.7e-3, 1e-6, wire_height=0.5e-6).thin_wire


def test_coherence_factor():
    assert coherence_factor(12.5, 5.7) == pytest.approx(math.sqrt(math.pi) * 6.8 / 25.0)
    with pytest.raises(DomainError):
        coherence_factor(5.0, 5.7)


def test_cluster_parameters_published_scale():
    cp = solve_cluster_parameters(100.0, published_density(), T, T_C)
    assert 0.1e-6 <= cp.mean_width <= 2.5e-6
    assert 3e-13 <= cp.diffusion_coeff <= 3e-11
    assert 0 < cp.x_f < 1


def test_cluster_relations():
    n_s = published_density()
    cp = solve_cluster_parameters(100.0, n_s, T, T_C)
    assert cp.a == pytest.approx(math.sqrt(cp.x_f / n_s))
    assert cp.mean_width == pytest.approx(1 / (math.sqrt(n_s) * (1 - math.sqrt(cp.x_f))))
    assert cp.j_coupling == pytest.approx(MU_0 * MU_B ** 2 / (4 * math.pi * cp.a ** 3))
    assert cp.omega_c == pytest.approx(math.pi ** 2 * cp.diffusion_coeff / cp.mean_width ** 2)


def test_cluster_round_trip():
    n_s = published_density()
    for omega in (1.0, 100.0, 1e4):
        cp = solve_cluster_parameters(omega, n_s, T, T_C)
        assert omega_of_filling(cp.x_f, n_s, T, T_C) == pytest.approx(omega, rel=1e-10)


def test_omega_scaling_by_four():
    n_s = published_density()
    a = solve_cluster_parameters(100.0, n_s, T, T_C)
    b = solve_cluster_parameters(400.0, n_s, T, T_C)
    ratio = (b.diffusion_coeff / b.mean_width ** 2) / (a.diffusion_coeff / a.mean_width ** 2)
    assert ratio == pytest.approx(4.0, rel=1e-10)


def test_low_filling_width_limit():
    n_s = published_density()
    x = 1e-10
    from fluxspin.physics import _cluster
    cp = _cluster(x, n_s, coherence_factor(T, T_C), T_C)
    assert cp.mean_width == pytest.approx(n_s ** -0.5, rel=2e-5)


def test_unreachable_omega_is_infeasible():
    with pytest.raises(InfeasibleError):
        solve_cluster_parameters(1e40, published_density(), T, T_C)
    with pytest.raises(DomainError):
        solve_cluster_parameters(-1.0, published_density(), T, T_C)


def test_reorganization_energy():
    eps, phi = reorganization_energy(DEVICE, 2.0, 3.0, 1e-6)
    assert eps == pytest.approx(0.7e-3 * 2.0 * 9.0 * 1e-18 / 6)
    assert phi == pytest.approx(eps / 4e-6)
    assert reorganization_energy(DEVICE, 2.0, 3.0, 2e-6)[0] == pytest.approx(8 * eps)
    assert reorganization_energy(DEVICE, 0.0, 3.0, 1e-6)[0] == 0.0
    with pytest.raises(DomainError):
        reorganization_energy(DEVICE, -1.0, 3.0, 1e-6)


def test_reorganization_energy_matches_langevin_saturation():
    w, chi, grad = 1.0, 0.8, 1.5
    b, tau = diffusion_modes(w, 1.0, grad, 4000)
    cfg = LangevinConfig(b, tau, chi, 0.0, dt=tau[-1] / 20, ensemble_size=100)
    res = langevin_run(cfg, [60 * tau[0]])
    unit = DevicePhysics(i_p=0.5, loop_length=1.0, wire_width=1.0)
    eps, phi = reorganization_energy(unit, chi, grad, w)
    # truncated mode sum misses ~ 1 / n_modes of the weight
    assert res.mean[0] == pytest.approx(eps, rel=1e-3)
    assert res.mean[0] / (2 * unit.i_p) == pytest.approx(phi, rel=1e-3)
