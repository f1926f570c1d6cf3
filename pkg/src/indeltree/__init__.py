"""Broadcast binary sequences down a noisy tree and rebuild the root.

The evolution module simulates the channel (substitutions, deletions,
insertions per edge per site), recon implements the anchor-and-island
reconstruction engine, oracle grades runs against the true tree, and
harness batches trials into reports and per-guarantee verifiers.
"""

from .evolution import (
    DELETED,
    EvolvedTree,
    LengthStats,
    ModelParams,
    Sequence,
    SiteMap,
    compose_maps,
    evolve_tree,
    flat_index,
    length_stats,
    mutate_edge,
    sample_root,
)
from .recon import (
    GAP,
    InfeasibleParametersError,
    NodeResult,
    ReconConfig,
    ReconstructionResult,
    correlation,
    derive_config,
    majority_vote,
    reconstruct_root,
    recursive_step,
)

__version__ = "0.1.0"

__all__ = [
    "DELETED",
    "EvolvedTree",
    "GAP",
    "InfeasibleParametersError",
    "LengthStats",
    "ModelParams",
    "NodeResult",
    "ReconConfig",
    "ReconstructionResult",
    "Sequence",
    "SiteMap",
    "__version__",
    "compose_maps",
    "correlation",
    "derive_config",
    "evolve_tree",
    "flat_index",
    "length_stats",
    "majority_vote",
    "mutate_edge",
    "reconstruct_root",
    "recursive_step",
    "sample_root",
]
