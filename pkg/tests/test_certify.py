"""Stage-by-stage behavior of the good-event certificate.

Each fixture is built so exactly one stage fails, or none. Offsets are
left empty in the all-pass fixtures so that no misaligned window is
sampled; misaligned behavior has its own failing fixture.
"""

from __future__ import annotations

import math

import numpy as np

from helpers import build_tree, edit_map, make_config, random_bits
from indeltree.evolution import ModelParams, evolve_tree, flat_index
from indeltree.oracle import certify_event_E

CFG1 = make_config(
    arity=5, height=1, seq_len=48, island_len=8, anchor_len=4,
    gamma=0.6, delta=0.3, beta=0.02,
)
CFG2 = make_config(
    arity=5, height=2, seq_len=48, island_len=8, anchor_len=4,
    gamma=0.6, delta=0.3, beta=0.02,
)


def test_infeasible_config_stops_before_looking_at_the_tree():
    tree = build_tree(ModelParams(arity=5, height=1, seq_len=48), random_bits(48, 12))
    cfg = make_config(arity=5, height=1, seq_len=48, gamma=0.5, delta=0.5, beta=0.0)
    cert = certify_event_E(tree, cfg, seed=0)
    assert not cert.holds
    assert not cert.feasible
    assert cert.first_failure == "feasibility"
    assert cert.length_ok is None
    assert cert.stable_ok is None


def test_heavy_deletion_fails_the_length_stage():
    params = ModelParams(arity=3, height=1, seq_len=100, p_del=0.5)
    cert = certify_event_E(evolve_tree(params, 0), CFG1, seed=0)
    assert cert.first_failure == "length"
    assert cert.length_ok is False
    assert cert.stable_ok is None


def test_anchor_indel_fails_the_stability_stage():
    tree = build_tree(
        ModelParams(arity=5, height=1, seq_len=48),
        random_bits(48, 12),
        {(1, 0): edit_map(48, deletions=(8,))},
    )
    cert = certify_event_E(tree, CFG1, seed=0)
    assert cert.first_failure == "stable_subtree"
    assert cert.length_ok is True
    assert cert.stable_ok is False
    assert cert.subtree is None


def test_constant_sequence_fails_the_anchor_stage():
    tree = build_tree(ModelParams(arity=5, height=1, seq_len=48), np.ones(48, np.uint8))
    cert = certify_event_E(tree, CFG1, seed=0, offsets=(1, 2))
    assert cert.first_failure == "anchors"
    assert cert.anchors_ok is False
    assert cert.anchor_failures > 0
    assert cert.min_aligned == 1.0
    assert cert.max_misaligned == 1.0  # shifted copies of all-ones agree fully
    assert cert.bias_ok is None


def test_clean_one_level_tree_certifies():
    tree = build_tree(ModelParams(arity=5, height=1, seq_len=48), random_bits(48, 12))
    cert = certify_event_E(tree, CFG1, seed=0, offsets=())
    assert cert.holds
    assert cert.first_failure is None
    assert (cert.feasible, cert.length_ok, cert.stable_ok) == (True, True, True)
    assert (cert.anchors_ok, cert.bias_ok) == (True, True)
    # 10 child pairs, rounds 1..7 of which 5 fit inside length 48
    assert cert.anchor_checks == 50
    assert cert.anchor_vacuous == 20
    assert cert.min_aligned == 1.0
    assert math.isnan(cert.max_misaligned)
    assert cert.bias_checks == 450
    assert cert.bias_vacuous == 180
    assert cert.max_bias_residual == 0.0
    assert cert.beta_prime_max == 0.0


def test_clean_two_level_tree_certifies():
    tree = build_tree(ModelParams(arity=5, height=2, seq_len=48), random_bits(48, 12))
    cert = certify_event_E(tree, CFG2, seed=0, offsets=())
    assert cert.holds
    # root plus four kept level-1 parents, each with 10 pairs and 5 rounds
    assert cert.anchor_checks == 250
    assert cert.anchor_vacuous == 100
    assert cert.bias_checks == 2250
    assert cert.max_bias_residual == 0.0


def test_slack_deletion_still_certifies_through_true_shifts():
    tree = build_tree(
        ModelParams(arity=5, height=1, seq_len=48),
        random_bits(48, 12),
        {(1, 1): edit_map(48, deletions=(12,))},
    )
    cert = certify_event_E(tree, CFG1, seed=0, offsets=())
    assert cert.holds
    assert cert.min_aligned == 1.0  # windows line up again once shifted


def test_wrong_reconstruction_fails_the_bias_stage():
    # one leaf bit flipped just left of the first anchor window: anchors
    # never see site 7, but the reconstruction of that leaf's parent is
    # wrong there, so its agreement window is no fair coin. Seed 6 keeps
    # the flipped leaf in the trim at that site.
    bits = random_bits(48, 12)
    tree = build_tree(ModelParams(arity=5, height=2, seq_len=48), bits)
    tree.nodes[flat_index(5, 2, 2)].bits[7] ^= 1
    cert = certify_event_E(tree, CFG2, seed=6, offsets=())
    assert not cert.holds
    assert cert.first_failure == "bias"
    assert cert.anchors_ok is True
    assert cert.bias_ok is False
    assert cert.bias_failures > 0
    # the one wrong site gives the pooled rate 0.5 * 1/48 exactly
    assert cert.beta_prime_max == 1.0 / 96.0
    assert cert.max_bias_residual == (47.0 / 48.0) ** 2 - 0.5
