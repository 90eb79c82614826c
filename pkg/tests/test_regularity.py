import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superholder.cloud import ParticleCloud
from superholder.density import DensityGrid, z1_component
from superholder.errors import ConfigurationError, InputError, InsufficientSampleError
from superholder.params import ModelParams
from superholder.regularity import (
    compute_targets,
    default_radii,
    exponent_experiment,
    local_holder,
    ordering_test,
    pointwise_holder,
)

X = np.linspace(-1, 1, 4001)
H = (X[1] - X[0]) / 2
RADII = default_radii(H, 0.25, 8)


def grid_of(values):
    return DensityGrid((-1.0, 1.0), values, H, 0, 1.0)


def midpoint_brownian(seed, levels=16):
    rng = np.random.default_rng(seed)
    n = 2**levels
    f = np.zeros(n + 1)
    f[-1] = rng.normal()
    step, sd = n, 1.0
    while step > 1:
        half = step // 2
        sd /= np.sqrt(2)
        f[half::step] = 0.5 * (f[0:-1:step] + f[step::step]) + rng.normal(0, sd / np.sqrt(2), f[half::step].size)
        step = half
    return np.linspace(-1, 1, n + 1), f


@pytest.mark.parametrize("eta", [0.2, 0.3, 0.5, 0.8])
def test_cusp_calibration(eta):
    est = pointwise_holder(grid_of(np.abs(X - 0.1) ** eta), 0.1, RADII)
    assert est.exponent == pytest.approx(eta, abs=0.02)
    assert est.ci_low <= est.exponent <= est.ci_high


def test_linear_is_lipschitz():
    assert pointwise_holder(grid_of(X.copy()), 0.0, RADII).exponent == pytest.approx(1.0, abs=0.02)


def test_brownian_trace():
    # a single trace scatters by about 0.05; the median over realisations is the calibration target
    ests = []
    for seed in range(5):
        x, f = midpoint_brownian(seed)
        g = DensityGrid((-1.0, 1.0), f, (x[1] - x[0]) / 2, 0, 1.0)
        ests.append(pointwise_holder(g, 0.123, default_radii(x[1] - x[0], 0.25, 10)).exponent)
    assert np.median(ests) == pytest.approx(0.5, abs=0.1)


def test_two_cusps_local_minimum():
    g = grid_of(np.minimum(np.abs(X) ** 0.3, np.abs(X - 0.5) ** 0.7))
    assert local_holder(g, (-0.75, 0.75), RADII).exponent == pytest.approx(0.3, abs=0.02)


def test_constant_is_degenerate():
    est = local_holder(grid_of(np.ones_like(X)), (-0.5, 0.5), RADII)
    assert est.degenerate and est.clamped and est.exponent == 1.5


def test_smooth_clamps_near_lipschitz():
    est = local_holder(grid_of(np.sin(3 * X)), (-0.5, 0.5), RADII)
    assert 0.9 <= est.exponent <= 1.05


@settings(max_examples=20, deadline=None)
@given(st.floats(0.15, 0.9))
def test_dropping_an_end_radius_is_stable(eta):
    g = grid_of(np.abs(X - 0.2) ** eta)
    full = pointwise_holder(g, 0.2, RADII).exponent
    assert abs(pointwise_holder(g, 0.2, RADII[1:]).exponent - full) < 0.05
    assert abs(pointwise_holder(g, 0.2, RADII[:-1]).exponent - full) < 0.05


def test_radius_preconditions():
    g = grid_of(X.copy())
    with pytest.raises(InputError, match="at least 5"):
        pointwise_holder(g, 0.0, RADII[:4])
    with pytest.raises(InputError, match="decades"):
        pointwise_holder(g, 0.0, np.geomspace(0.25, 0.05, 6))
    with pytest.raises(InputError, match="bandwidth"):
        pointwise_holder(DensityGrid((-1.0, 1.0), X.copy(), 0.01, 0, 1.0), 0.0, RADII)
    with pytest.raises(InputError, match="window"):
        pointwise_holder(g, 0.9, RADII)


@pytest.mark.parametrize("alpha, beta, eta_c, eta_bar_c, opt", [
    (1.8, 0.5, 0.2, 2.8 / 1.5 - 1, True),
    (1.9, 0.25, 1.9 / 1.25 - 1, 1.0, False),
    (2.0, 0.999, 2 / 1.999 - 1, 3 / 1.999 - 1, True),
])
def test_targets(alpha, beta, eta_c, eta_bar_c, opt):
    tg = compute_targets(ModelParams(alpha, beta))
    assert tg.eta_c == pytest.approx(eta_c) and tg.eta_bar_c == pytest.approx(eta_bar_c)
    assert tg.optimality_applies is opt


@settings(max_examples=200)
@given(st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_target_invariants_over_region(beta, frac):
    alpha = 1 + beta + frac * (1 - beta)
    if alpha <= 1 + beta or alpha > 2:
        return
    tg = compute_targets(ModelParams(alpha, beta))
    assert 0 < tg.eta_c < 1
    assert tg.eta_c < tg.eta_bar_c <= 1
    assert (tg.eta_bar_c == 1) == (beta <= (alpha - 1) / 2)


def test_targets_regime_gate():
    with pytest.raises(ConfigurationError, match="requires α > 1\\+β"):
        compute_targets(ModelParams(1.4, 0.5))


def test_ordering_test_detects_shift(rng):
    hi = rng.normal(0.8, 0.1, 60)
    lo = rng.normal(0.3, 0.1, 60)
    assert ordering_test(hi, lo, 1)["significant"]
    assert not ordering_test(lo, hi, 1)["significant"]


def test_pure_motion_density_is_smooth():
    # without branching the density is mu * p_t exactly
    mu = ParticleCloud(0.0, np.array([0.0]), 1.0)
    g = grid_of(z1_component(mu, ModelParams(1.8, 0.5, b=0.0), 1.0, X))
    assert local_holder(g, (-0.5, 0.5), RADII).exponent > 0.95
    assert pointwise_holder(g, 0.3, RADII).exponent > 0.95


def test_experiment_mechanics():
    rep = exponent_experiment(ModelParams(1.8, 0.5, b=0.0), 1.0, 0.0, 10_000, 3, 3, min_retained=3)
    assert rep.n_retained == 3 and rep.n_run == 3
    assert rep.floor == pytest.approx(0.1 * np.mean([row[1] for row in rep.rows]))
    assert len(list(rep.csv_rows())) == 4
    assert set(rep.to_dict()) >= {"params", "targets", "pointwise", "local", "n_retained"}


def test_experiment_needs_retained_replicates():
    with pytest.raises(InsufficientSampleError):
        exponent_experiment(ModelParams(1.8, 0.5, b=0.0), 1.0, 0.0, 1000, 2, 3)
    with pytest.raises(ConfigurationError):
        exponent_experiment(ModelParams(1.9, 0.25), 1.0, 0.0, 1000, 2, 3)
