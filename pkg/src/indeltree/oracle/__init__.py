"""Ground-truth oracles: classifiers and checkers that read the true
evolved tree (which the reconstruction engine never sees) and decide
whether each guarantee actually held on a given run."""

from .adversary import (
    GatewayMasks,
    GatewaySubtree,
    adversarial_reconstruct,
    compute_gateways,
    gateway_masks,
    simulate_adversarial_majority,
)
from .events import (
    AnchorStats,
    BiasCheck,
    BiasScan,
    CorrelationBoundCheck,
    EventCertificate,
    anchor_correlation_stats,
    bias_window_events,
    certify_event_E,
    true_shifts,
    verify_bias_concentration,
    verify_correlation_bound,
)
from .stability import (
    NodeStability,
    StabilityReport,
    StableSubtree,
    classify_stability,
    extract_stable_subtree,
    stable_subtree_bound,
)

__all__ = [
    "AnchorStats",
    "BiasCheck",
    "BiasScan",
    "CorrelationBoundCheck",
    "EventCertificate",
    "GatewayMasks",
    "GatewaySubtree",
    "NodeStability",
    "StabilityReport",
    "StableSubtree",
    "adversarial_reconstruct",
    "anchor_correlation_stats",
    "bias_window_events",
    "certify_event_E",
    "classify_stability",
    "compute_gateways",
    "extract_stable_subtree",
    "gateway_masks",
    "simulate_adversarial_majority",
    "stable_subtree_bound",
    "true_shifts",
    "verify_bias_concentration",
    "verify_correlation_bound",
]
