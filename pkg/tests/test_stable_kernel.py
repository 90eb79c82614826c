import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from superholder.cloud import ParticleCloud
from superholder.errors import InputError, UnsupportedError
from superholder.stable_kernel import (
    KernelConfig,
    density_p1,
    density_pt,
    increment_bound_check,
    kernel_table,
    semigroup_apply,
    tail_constant,
    tail_constant_scan,
)


def quad_oracle(alpha, x):
    """Independent evaluation of the inverse Fourier integral with QUADPACK's cosine weight."""
    val, _ = integrate.quad(lambda xi: math.exp(-(xi**alpha)), 0, np.inf, weight="cos", wvar=x, limlst=200)
    return val / math.pi if x != 0 else integrate.quad(lambda xi: math.exp(-(xi**alpha)), 0, np.inf)[0] / math.pi


XS = np.linspace(-10, 10, 2001)


def test_gaussian_closed_form():
    err = np.max(np.abs(density_p1(KernelConfig(2.0), XS) - np.exp(-XS**2 / 4) / math.sqrt(4 * math.pi)))
    assert err <= 1e-8


def test_cauchy_closed_form():
    err = np.max(np.abs(density_p1(KernelConfig(1.0), XS) - 1 / (math.pi * (1 + XS**2))))
    assert err <= 1e-8


@pytest.mark.parametrize("alpha", [0.6, 1.2, 1.5, 1.8, 1.95])
@pytest.mark.parametrize("x", [0.3, 1.0, 2.7, 7.5])
def test_against_quadpack(alpha, x):
    assert density_p1(KernelConfig(alpha), x) == pytest.approx(quad_oracle(alpha, x), abs=1e-10)


@pytest.mark.parametrize("alpha", [0.7, 1.3, 1.8])
def test_value_at_origin(alpha):
    assert density_p1(KernelConfig(alpha), 0.0) == pytest.approx(math.gamma(1 + 1 / alpha) / math.pi, rel=1e-12)


@pytest.mark.parametrize("alpha", [1.3, 1.8])
def test_scaling_identity(alpha):
    cfg = KernelConfig(alpha)
    for t in (0.1, 0.5, 3.0):
        s = t ** (-1 / alpha)
        np.testing.assert_allclose(density_pt(cfg, t, XS), s * density_p1(cfg, s * XS), atol=1e-10, rtol=0)


@pytest.mark.parametrize("alpha", [1.2, 1.8])
def test_normalisation_with_tail(alpha):
    cfg = KernelConfig(alpha)
    y = 200.0
    inner = integrate.quad(lambda x: density_p1(cfg, x), 0, y, limit=400)[0]
    tail = tail_constant(alpha) * y ** (-alpha) / alpha
    assert 2 * (inner + tail) == pytest.approx(1.0, abs=1e-5)


def test_chapman_kolmogorov():
    cfg = KernelConfig(1.5)
    z = np.linspace(-60, 60, 24001)
    dz = z[1] - z[0]
    p1 = density_pt(cfg, 0.3, z)
    for x in (0.0, 0.8, 2.5):
        conv = np.trapezoid(p1 * density_pt(cfg, 0.7, x - z), dx=dz)
        assert conv == pytest.approx(density_pt(cfg, 1.0, x), abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(-50, 50))
def test_symmetric_positive_and_peaked(alpha, x):
    cfg = KernelConfig(alpha)
    v = density_p1(cfg, x)
    assert v > 0
    assert v == pytest.approx(density_p1(cfg, -x), rel=1e-12)
    assert v <= density_p1(cfg, 0.0) * (1 + 1e-12)


def test_tail_constant_scan_approaches_limit():
    cfg = KernelConfig(1.5)
    assert tail_constant_scan(cfg, 100.0) == pytest.approx(tail_constant(1.5), rel=0.01)


def test_tail_scan_rejects_gaussian():
    with pytest.raises(UnsupportedError):
        tail_constant_scan(KernelConfig(2.0), 10.0)


def test_semigroup_apply_groups_atoms():
    cfg = KernelConfig(1.8)
    cloud = ParticleCloud(0.0, np.array([0.0, 0.0, 1.0]), 0.5)
    x = np.array([-0.5, 0.2, 3.0])
    expect = density_pt(cfg, 0.4, x) + 0.5 * density_pt(cfg, 0.4, x - 1.0)
    np.testing.assert_allclose(semigroup_apply(cfg, cloud, 0.4, x), expect, rtol=1e-13)


def test_increment_bound_check():
    cfg = KernelConfig(1.8)
    assert increment_bound_check(cfg, 0.5, [(1.0, 1.0, 1.0)]) == {"max_ratio": None, "n_samples": 0}
    rep = increment_bound_check(cfg, 1.0, [(t, x, x + 0.1) for t in (0.1, 1.0) for x in np.linspace(-5, 5, 11)])
    assert rep["n_samples"] == 22 and 0 < rep["max_ratio"] < 10


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_rejects_non_finite(bad):
    with pytest.raises(InputError):
        density_p1(KernelConfig(1.5), bad)


def test_rejects_bad_time_and_config():
    with pytest.raises(InputError):
        density_pt(KernelConfig(1.5), 0.0, 1.0)
    with pytest.raises(InputError):
        KernelConfig(2.5)
    with pytest.raises(InputError):
        KernelConfig(1.5, quad_cutoff=2.0)


def test_kernel_table_shape():
    tab = kernel_table(KernelConfig(2.0), [0.0, 1.0])
    assert tab.shape == (2, 2)
    assert tab[0, 1] == pytest.approx(1 / math.sqrt(4 * math.pi))
