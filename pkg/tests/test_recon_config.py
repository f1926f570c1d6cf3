"""Threshold derivation: defaults, clamps, and infeasibility."""

import math

import numpy as np
import pytest

from indeltree.evolution import ModelParams
from indeltree.recon import InfeasibleParametersError, ReconConfig, derive_config


def test_noiseless_binary_tree_thresholds():
    # theta = 1, beta = 0: the drift band is (0, 1/2), its midpoint 1/4,
    # and the anchor threshold (1 - 1/4) * 1 - 0 = 3/4.
    with pytest.warns(RuntimeWarning, match="clamped"):
        cfg = derive_config(ModelParams(arity=3, height=3, seq_len=1000), beta=0.0)
    assert cfg.island_len == 10
    assert cfg.anchor_len == 9
    assert cfg.delta == pytest.approx(0.25)
    assert cfg.gamma == pytest.approx(0.75)


def test_theorem_scale_thresholds():
    with pytest.warns(RuntimeWarning, match="clamped"):
        cfg = derive_config(
            ModelParams(arity=5, height=2, seq_len=3375, p_sub=0.05), beta=0.0
        )
    assert cfg.island_len == 15
    # ceil(8 ln 25) = 26 would not fit, so the anchor clamps to 14.
    assert cfg.anchor_len == 14
    assert cfg.delta == pytest.approx(0.22375690607734808)
    assert cfg.gamma == pytest.approx(0.628756906077348)


def test_island_is_ceil_cube_root():
    for k, ell in ((27, 3), (28, 4), (64, 4), (1000, 10), (1001, 11), (3375, 15)):
        cfg = derive_config(
            ModelParams(arity=3, height=0, seq_len=k), beta=0.0
        )
        assert cfg.island_len == ell, k
    # Exactness far beyond float cube roots.
    big = derive_config(ModelParams(arity=3, height=0, seq_len=10**15), beta=0.0)
    assert big.island_len == 10**5
    bigger = derive_config(ModelParams(arity=3, height=0, seq_len=10**15 + 1), beta=0.0)
    assert bigger.island_len == 10**5 + 1


def test_anchor_grows_with_leaf_count():
    cfg = derive_config(
        ModelParams(arity=5, height=4, seq_len=10**6, p_sub=0.05), beta=0.0
    )
    assert cfg.island_len == 100
    assert cfg.anchor_len == math.ceil(8 * math.log(5**4))
    assert cfg.anchor_len < cfg.island_len


def test_even_or_tiny_arity_is_infeasible():
    with pytest.raises(InfeasibleParametersError):
        derive_config(ModelParams(arity=4, height=1, seq_len=1000), beta=0.0)
    with pytest.raises(InfeasibleParametersError):
        derive_config(ModelParams(arity=1, height=1, seq_len=1000), beta=0.0)


def test_too_much_substitution_noise_is_infeasible():
    with pytest.raises(InfeasibleParametersError, match="drift threshold"):
        derive_config(ModelParams(arity=5, height=1, seq_len=1000, p_sub=0.5), beta=0.0)
    # Generous beta eats the whole band even at zero noise: 16 beta > 1.
    with pytest.raises(InfeasibleParametersError, match="drift threshold"):
        derive_config(ModelParams(arity=5, height=1, seq_len=1000))


def test_short_sequences_cannot_anchor():
    with pytest.raises(InfeasibleParametersError, match="too short"):
        derive_config(ModelParams(arity=3, height=1, seq_len=8), beta=0.0)


def test_explicit_delta_bypasses_the_band_with_a_warning():
    params = ModelParams(arity=9, height=1, seq_len=2000, p_sub=0.1)
    with pytest.warns(RuntimeWarning) as caught:
        cfg = derive_config(params, beta=1.0 / 9.0, delta=0.9)
    assert any("guarantee limit" in str(w.message) for w in caught)
    assert cfg.delta == 0.9
    theta_sq = (1.0 - 0.2) ** 2
    assert cfg.gamma == pytest.approx(0.1 * theta_sq - 4.0 / 9.0)
    with pytest.raises(ValueError):
        derive_config(params, beta=1.0 / 9.0, delta=1.5)


def test_config_validation_is_light():
    # The dataclass checks shapes, not the threshold inequalities: the
    # verifier suite deliberately builds configs outside the bands.
    cfg = ReconConfig(
        arity=5,
        height=1,
        seq_len=10**6,
        island_len=100,
        anchor_len=400,
        gamma=0.6,
        delta=0.3,
        beta=0.0,
    )
    assert cfg.anchor_len > cfg.island_len
    assert cfg.leaves == 5
    with pytest.raises(ValueError):
        ReconConfig(
            arity=5, height=1, seq_len=0, island_len=10, anchor_len=5,
            gamma=0.5, delta=0.3, beta=0.0,
        )


def test_beta_default_is_one_over_arity():
    with pytest.warns(RuntimeWarning, match="clamped"):
        cfg = derive_config(ModelParams(arity=33, height=1, seq_len=1000, p_sub=0.01))
    assert cfg.beta == pytest.approx(1.0 / 33.0)
