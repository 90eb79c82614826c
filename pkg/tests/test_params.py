import math
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from superholder.errors import ConfigurationError, InputError
from superholder.params import CONTINUITY, DENSITY, OPTIMALITY, ModelParams
from superholder.seeding import hash64, replicate_rng


def test_rho_constant_half():
    assert ModelParams(1.8, 0.5).rho_const == pytest.approx(0.75 / math.sqrt(math.pi), rel=1e-14)
    assert ModelParams(1.8, 0.5).rho_const == pytest.approx(0.42314, abs=5e-6)


def test_exponents_reference_pair():
    p = ModelParams(1.8, 0.5)
    assert p.eta_c == pytest.approx(0.2)
    assert p.eta_bar_c == pytest.approx(2.8 / 1.5 - 1)


@pytest.mark.parametrize("kwargs, message", [
    ({"alpha": 0.0, "beta": 0.5}, "alpha must be in (0,2]"),
    ({"alpha": 2.1, "beta": 0.5}, "alpha must be in (0,2]"),
    ({"alpha": 1.5, "beta": 1.5}, "beta must be in (0,1)"),
    ({"alpha": 1.5, "beta": 0.0}, "beta must be in (0,1)"),
    ({"alpha": 1.5, "beta": 0.5, "b": -1.0}, "b must be >= 0"),
    ({"alpha": 1.5, "beta": 0.5, "d": 2}, "d = 1"),
])
def test_invalid_parameters(kwargs, message):
    with pytest.raises(InputError, match=re.escape(message)):
        ModelParams(**kwargs)


def test_regime_messages_name_the_inequality():
    with pytest.raises(ConfigurationError, match="requires α > 1\\+β"):
        ModelParams(1.4, 0.5).require(CONTINUITY)
    with pytest.raises(ConfigurationError, match="requires β > \\(α-1\\)/2"):
        ModelParams(1.9, 0.25).require(OPTIMALITY)
    ModelParams(1.8, 0.5).require(DENSITY, CONTINUITY, OPTIMALITY)


@given(st.floats(0.05, 2.0), st.floats(0.01, 0.99))
def test_regime_flags_match_inequalities(alpha, beta):
    p = ModelParams(alpha, beta)
    assert p.has_density == (1 < alpha / beta)
    assert p.continuity_regime == (alpha > 1 + beta)
    assert p.optimality_regime == (beta > (alpha - 1) / 2)


def test_hash64_is_stable_and_separates_streams():
    assert hash64(42, "superprocess", 0) == hash64(42, "superprocess", 0)
    seeds = {hash64(42, m, i) for m in ("a", "b") for i in range(100)}
    assert len(seeds) == 200
    a = replicate_rng(1, "x", 3).random(4)
    b = replicate_rng(1, "x", 3).random(4)
    assert (a == b).all()
