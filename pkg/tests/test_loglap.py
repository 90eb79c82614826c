import math

import numpy as np
import pytest

from superholder.cloud import ParticleCloud
from superholder.errors import ConfigurationError, CoverageError, InputError, RefinementError
from superholder.loglap import (
    FieldState,
    kernel_tail_mass,
    laplace_functional_compare,
    recommended_half_width,
    resolution_gap,
    smooth_bump,
    solve_loglap,
    wrap_mass,
)
from superholder.params import ModelParams
from superholder.stable_kernel import KernelConfig, density_pt


def constant(value, half_width=8.0, n=64):
    return FieldState(half_width, np.full(n, value))


def test_heat_kernel_convolution():
    phi = FieldState.from_function(lambda x: np.exp(-x**2), 32.0, 4096)
    u = solve_loglap(ModelParams(2.0, 0.5, b=0.0), phi, 0.5, 0.01)
    # exp(-x^2) convolved with the variance-1 Gaussian kernel
    np.testing.assert_allclose(u.values, np.exp(-phi.grid**2 / 3) / math.sqrt(3), atol=1e-6)


def test_constant_initial_value_solves_the_ode():
    u = solve_loglap(ModelParams(1.8, 0.5), constant(1.0), 1.0, 0.01)
    np.testing.assert_allclose(u.values, 4 / 9, rtol=1e-12)


def test_linear_growth():
    u = solve_loglap(ModelParams(1.8, 0.5, a=0.5, b=0.0), constant(1.0), 1.0, 0.01)
    np.testing.assert_allclose(u.values, math.exp(0.5), rtol=1e-12)


@pytest.mark.parametrize("a", [0.0, 0.7, -0.4])
def test_constant_field_with_growth(a):
    # u' = a u - u**1.5 has the closed form u = (e^{-a t/2} (u0^{-1/2} - 1/a) + 1/a)^{-2} for a != 0
    p = ModelParams(1.5, 0.5, a=a)
    u = solve_loglap(p, constant(2.0), 0.8, 0.002).values[0]
    if a == 0:
        exact = (2.0**-0.5 + 0.5 * 0.8) ** -2
    else:
        exact = (math.exp(-a * 0.8 / 2) * (2.0**-0.5 - 1 / a) + 1 / a) ** -2
    assert u == pytest.approx(exact, rel=1e-6)


def test_stable_semigroup_without_branching():
    p = ModelParams(1.5, 0.5, b=0.0)
    phi = FieldState.from_function(smooth_bump, 256.0, 1 << 15)
    u = solve_loglap(p, phi, 0.3, 0.3, check_wrap=False)
    cfg = KernelConfig(1.5)
    z = np.linspace(-1, 1, 4001)
    for x in (0.0, 1.5):
        expect = np.trapezoid(smooth_bump(z) * density_pt(cfg, 0.3, x - z), z)
        assert u.evaluate([x])[0] == pytest.approx(expect, abs=1e-6)


def test_mass_conserved_in_linear_case():
    p = ModelParams(1.8, 0.5, b=0.0)
    phi = FieldState.from_function(smooth_bump, 64.0, 4096)
    u = solve_loglap(p, phi, 0.5, 0.05, check_wrap=False)
    assert u.integral() == pytest.approx(phi.integral(), rel=1e-12)


def test_comparison_principle():
    p = ModelParams(1.8, 0.5)
    lo = FieldState.from_function(lambda x: 0.5 * smooth_bump(x), 64.0, 4096)
    hi = FieldState.from_function(smooth_bump, 64.0, 4096)
    u_lo = solve_loglap(p, lo, 0.5, 0.01, check_wrap=False)
    u_hi = solve_loglap(p, hi, 0.5, 0.01, check_wrap=False)
    assert np.all(u_lo.values <= u_hi.values + 1e-14)


def test_zero_field_stays_zero():
    u = solve_loglap(ModelParams(1.8, 0.5), constant(0.0), 1.0, 0.1)
    assert np.all(u.values == 0.0)


def test_resolution_gap_small():
    p = ModelParams(1.8, 0.5)
    assert resolution_gap(p, smooth_bump, 64.0, 1 << 13, 0.5, 0.01, check_wrap=False) < 1e-5


def test_negative_phi_rejected():
    with pytest.raises(InputError):
        solve_loglap(ModelParams(1.8, 0.5), FieldState(4.0, -np.ones(16)), 1.0, 0.1)


def test_coarse_step_flagged():
    phi = FieldState.from_function(lambda x: 50 * smooth_bump(x), 64.0, 4096)
    with pytest.raises(RefinementError):
        solve_loglap(ModelParams(1.8, 0.5), phi, 0.5, 0.25, check_wrap=False)


def test_wrap_guard():
    phi = FieldState.from_function(smooth_bump, 4.0, 512)
    with pytest.raises(CoverageError):
        solve_loglap(ModelParams(1.8, 0.5), phi, 0.5, 0.01)
    half = recommended_half_width(ModelParams(1.8, 0.5), 0.5, 1.0, 1.21)
    big = FieldState.from_function(smooth_bump, half, 1 << 12)
    assert wrap_mass(ModelParams(1.8, 0.5), big, 0.5) <= 1e-6


def test_tail_mass_gaussian_and_stable():
    assert kernel_tail_mass(2.0, 1.0, 0.0) == 1.0
    assert kernel_tail_mass(2.0, 0.25, 3.0) == pytest.approx(math.erfc(3.0), rel=1e-12)
    assert kernel_tail_mass(1.5, 1.0, 1e3) < 1e-4


def test_grid_and_interpolation():
    with pytest.raises(InputError):
        FieldState(1.0, np.ones(100))
    f = FieldState.from_function(lambda x: np.cos(np.pi * x / 4) ** 2, 4.0, 64)
    assert f.evaluate([0.123])[0] == pytest.approx(math.cos(math.pi * 0.123 / 4) ** 2, abs=1e-12)
    cloud = ParticleCloud(0.0, np.array([0.0, 0.123]), 0.5)
    assert f.pairing(cloud) == pytest.approx(0.5 * (1 + math.cos(math.pi * 0.123 / 4) ** 2), abs=1e-12)


def test_compare_zero_test_function():
    p = ModelParams(1.8, 0.5)
    phi = FieldState(512.0, np.zeros(1 << 12))
    res = laplace_functional_compare(p, ParticleCloud.point_mass(scale_n=1000), phi, 0.2, 200, 1, scale_n=1000)
    assert res["mc_mean"] == 1.0 and res["pde_target"] == 1.0


def test_compare_guards():
    phi = FieldState.from_function(smooth_bump, 8.0, 1024)
    with pytest.raises(ConfigurationError):
        laplace_functional_compare(ModelParams(0.4, 0.5), ParticleCloud.point_mass(), phi, 0.5, 200, 0)
    with pytest.raises(InputError):
        laplace_functional_compare(ModelParams(1.8, 0.5), ParticleCloud.point_mass(), phi, 0.5, 10, 0)
    with pytest.raises(CoverageError):
        laplace_functional_compare(ModelParams(1.8, 0.5), ParticleCloud.point_mass(x=20.0), phi, 0.5, 200, 0)
