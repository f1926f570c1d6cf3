"""The adversarial benchmark process.

Given the true evolved tree, a stable subtree, and the reconstruction
grid, each root site t induces a set of gateway nodes: subtree nodes u
where site t survived (its position in u is not deleted) and no node on
the path below the root placed t inside a corrupted island. Gateway
children are trimmed to exactly d-2 per node, chosen by a hash keyed on
(node, local position of t) so the choice is reproducible and agrees
between runs rooted at different ancestors.

The adversarial reconstruction then lets every kept gateway leaf vote
the true descendant bit of t while every other leaf of the full d-ary
tree votes the flipped root bit, and takes d-wise recursive majority.
Since every leaf votes an actual bit and d is odd, no ties can occur.
This estimator is the benchmark the real algorithm is measured against:
a site it gets right should also be gotten right by the algorithm.

simulate_adversarial_majority draws the matching stylized game: a
(d - adversaries)-ary tree of honest substitution states, completed to
arity d by adversary nodes that always vote 1 against root state 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..evolution import DELETED, EvolvedTree, flat_index
from ..rng import TAG_GAME, TAG_GATEWAY_TRIM, mix, splitmix64_array, substream
from .stability import StabilityReport, StableSubtree


@dataclass
class GatewayMasks:
    """Per-site gateway and trim decisions for one run root, vectorized.

    F[u][t] is the position of root site t in node u (or -1 once
    deleted); gate[u][t] says u is a gateway for t; kept[u][t] says u
    survived the (d-2)-ary trim of every ancestor. Only subtree nodes
    below the run root appear as keys.
    """

    root_level: int
    root_index: int
    root_flat: int
    seq_len: int
    F: dict[int, np.ndarray]
    gate: dict[int, np.ndarray]
    kept: dict[int, np.ndarray]


def gateway_masks(
    tree: EvolvedTree,
    report: StabilityReport,
    subtree: StableSubtree,
    seed: int,
    level: int = 0,
    index: int = 0,
) -> GatewayMasks:
    """Compute gateway and trim masks for all sites of one run root."""
    d, h = tree.params.arity, tree.params.height
    ell = report.island_len
    root_flat = flat_index(d, level, index)
    if not subtree.node_mask[root_flat]:
        raise ValueError("run root is not part of the stable subtree")
    k0 = len(tree.nodes[root_flat])
    F = {root_flat: np.arange(k0, dtype=np.int64)}
    ok = {root_flat: np.ones(k0, dtype=bool)}
    gate = {root_flat: np.ones(k0, dtype=bool)}
    kept = {root_flat: np.ones(k0, dtype=bool)}
    for lv in range(level, h):
        span = d ** (lv - level)
        for ix in range(index * span, (index + 1) * span):
            flat = flat_index(d, lv, ix)
            if flat not in F or not subtree.node_mask[flat]:
                continue
            Fp = F[flat]
            alive = Fp >= 0
            isl_idx = np.where(alive, Fp // ell, 0)
            # which child owns the single indel of each island, -1 if none
            par_len = len(tree.nodes[flat])
            owner = np.full(par_len // ell + 1, -1, dtype=np.int64)
            for isl, c in report.per_node[flat].corrupted.items():
                if isl < owner.shape[0]:
                    owner[isl] = c
            slots = subtree.kept_children(lv, ix)
            gates = []
            for c in slots:
                child_flat = flat_index(d, lv + 1, ix * d + c)
                m = tree.maps[child_flat]
                assert m is not None
                Fc = np.full(k0, DELETED, dtype=np.int64)
                Fc[alive] = m.to_child[Fp[alive]]
                F[child_flat] = Fc
                corrupt_here = alive & (owner[isl_idx] == c)
                ok[child_flat] = ok[flat] & ~corrupt_here
                gate[child_flat] = ok[child_flat] & (Fc >= 0)
                gates.append(gate[child_flat])
            G = np.stack(gates).astype(np.int64)
            cnt = G.sum(axis=0)
            rank = np.cumsum(G, axis=0) - G
            # rotate which gateway children survive, keyed by (node, local site)
            base = np.uint64(mix(seed, TAG_GATEWAY_TRIM, flat))
            local = np.where(alive, Fp, 0).astype(np.uint64)
            rot = (splitmix64_array(local ^ base) % np.maximum(cnt, 1).astype(np.uint64)).astype(
                np.int64
            )
            sel = (rank - rot[None, :]) % np.maximum(cnt, 1)[None, :] < d - 2
            for row, c in enumerate(slots):
                child_flat = flat_index(d, lv + 1, ix * d + c)
                kept[child_flat] = kept[flat] & gate[child_flat] & sel[row]
    return GatewayMasks(
        root_level=level,
        root_index=index,
        root_flat=root_flat,
        seq_len=k0,
        F=F,
        gate=gate,
        kept=kept,
    )


@dataclass
class GatewaySubtree:
    """Gateway picture for a single site: spec-level convenience view."""

    site: int
    members: list[int]
    kept: list[int]


def compute_gateways(
    tree: EvolvedTree,
    report: StabilityReport,
    stable: StableSubtree,
    site: int,
    seed: int,
) -> GatewaySubtree:
    """Gateway nodes (and the trimmed survivors) for one root site.

    This recomputes the full vectorized masks; callers that need many
    sites should use gateway_masks directly.
    """
    masks = gateway_masks(tree, report, stable, seed)
    if not 0 <= site < masks.seq_len:
        raise ValueError(f"site {site} out of range for root length {masks.seq_len}")
    members = sorted(flat for flat, g in masks.gate.items() if g[site])
    kept = sorted(flat for flat, m in masks.kept.items() if m[site])
    return GatewaySubtree(site=site, members=members, kept=kept)


def adversarial_reconstruct(
    tree: EvolvedTree, masks: GatewayMasks, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Run the benchmark estimator for the run root of masks.

    Returns (estimate, agreement): the d-wise recursive majority over
    leaf votes, and its sitewise agreement with the run root's true
    sequence. seed is reserved for even arities; with odd arity every
    leaf votes a bit and no tie coin is ever consulted.
    """
    d, h = tree.params.arity, tree.params.height
    level, index = masks.root_level, masks.root_index
    x0 = tree.nodes[masks.root_flat].bits
    k0 = masks.seq_len
    adversary = (1 - x0).astype(np.uint8)
    span = d ** (h - level)
    vals: list[np.ndarray] = []
    for li in range(index * span, (index + 1) * span):
        leaf_flat = flat_index(d, h, li)
        kept = masks.kept.get(leaf_flat)
        if kept is None:
            vals.append(adversary.copy())
            continue
        v = adversary.copy()
        Fl = masks.F[leaf_flat]
        v[kept] = tree.nodes[leaf_flat].bits[Fl[kept]]
        vals.append(v)
    while len(vals) > 1:
        folded = []
        for i in range(0, len(vals), d):
            spins = (np.stack(vals[i : i + d]).astype(np.int32) << 1) - 1
            folded.append((spins.sum(axis=0) > 0).astype(np.uint8))
        vals = folded
    estimate = vals[0]
    agreement = (estimate == x0).astype(np.uint8)
    return estimate, agreement


def simulate_adversarial_majority(
    arity: int,
    height: int,
    p_sub: float,
    rng,
    adversaries: int = 2,
    draws: int = 1,
) -> np.ndarray:
    """Sample the stylized majority game; True marks a correct root call.

    Honest nodes form an (arity - adversaries)-ary tree of substitution
    states started at 0; every node also hears `adversaries` votes of 1.
    rng may be a numpy Generator or an integer seed.
    """
    honest = arity - adversaries
    if honest < 1:
        raise ValueError("need at least one honest child per node")
    if not 0.0 <= p_sub <= 1.0:
        raise ValueError("p_sub must lie in [0, 1]")
    if isinstance(rng, (int, np.integer)):
        rng = substream(int(rng), TAG_GAME)
    states = np.zeros((1, draws), dtype=np.uint8)
    levels = [states]
    for _ in range(height):
        parent = levels[-1]
        n = parent.shape[0]
        flips = (rng.random((n, honest, draws)) < p_sub).astype(np.uint8)
        levels.append((parent[:, None, :] ^ flips).reshape(n * honest, draws))
    vals = levels[-1].astype(np.int64)
    for _ in range(height):
        n = vals.shape[0]
        ones = vals.reshape(n // honest, honest, draws).sum(axis=1) + adversaries
        vals = (2 * ones > arity).astype(np.int64)
    return vals[0] == 0
