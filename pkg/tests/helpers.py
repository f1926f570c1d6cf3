"""Shared test utilities: tiny hand configs, an independent majority,
and a builder for trees whose edge maps are written out by hand.

Nothing here imports from the reconstruction internals; the point is to
have second routes to the same answers.
"""

from __future__ import annotations

import numpy as np

from indeltree.evolution import (
    DELETED,
    EvolvedTree,
    ModelParams,
    Sequence,
    SiteMap,
    flat_index,
)
from indeltree.recon import ReconConfig


def make_config(
    arity: int = 5,
    height: int = 1,
    seq_len: int = 64,
    island_len: int = 4,
    anchor_len: int = 3,
    gamma: float = 0.5,
    delta: float = 0.9,
    beta: float = 0.0,
) -> ReconConfig:
    return ReconConfig(
        arity=arity,
        height=height,
        seq_len=seq_len,
        island_len=island_len,
        anchor_len=anchor_len,
        gamma=gamma,
        delta=delta,
        beta=beta,
    )


def column_majority(rows) -> np.ndarray:
    """Columnwise majority of equal-length 0/1 rows; ties are a test bug."""
    stack = np.stack([np.asarray(r, dtype=np.int32) for r in rows])
    ssum = (2 * stack - 1).sum(axis=0)
    assert not (ssum == 0).any(), "tie in reference majority"
    return (ssum > 0).astype(np.uint8)


def majority_tree(leaves, arity: int) -> np.ndarray:
    """Bottom-up plain majority with no alignment machinery at all.

    Groups of arity children are truncated to their shortest member and
    voted columnwise, level by level.
    """
    level = [np.asarray(x, dtype=np.uint8) for x in leaves]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), arity):
            group = level[i : i + arity]
            m = min(g.shape[0] for g in group)
            nxt.append(column_majority([g[:m] for g in group]))
        level = nxt
    return level[0]


def random_bits(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, size=n, dtype=np.uint8)


def edit_map(parent_len: int, deletions=(), insertions=()) -> SiteMap:
    """Site map of one edge that deletes and inserts at the given parent
    sites and copies everything else straight through."""
    keep = np.ones(parent_len, dtype=bool)
    keep[list(deletions)] = False
    ins = np.zeros(parent_len, dtype=bool)
    ins[list(insertions)] = True
    contrib = keep.astype(np.int64) + ins.astype(np.int64)
    ends = np.cumsum(contrib)
    starts = ends - contrib
    to_child = np.where(keep, starts, np.int64(DELETED))
    child_len = int(ends[-1]) if parent_len else 0
    return SiteMap(to_child=to_child, ins_after=ins, child_len=child_len)


def apply_map(parent: Sequence, m: SiteMap, lineage_start: int) -> Sequence:
    """Child sequence implied by a site map, with no substitutions and
    zero bits at inserted sites."""
    keep = m.to_child >= 0
    contrib = keep.astype(np.int64) + m.ins_after.astype(np.int64)
    starts = np.cumsum(contrib) - contrib
    bits = np.zeros(m.child_len, dtype=np.uint8)
    lineage = np.zeros(m.child_len, dtype=np.int64)
    bits[m.to_child[keep]] = parent.bits[keep]
    lineage[m.to_child[keep]] = parent.lineage[keep]
    ins_pos = (starts + keep)[m.ins_after]
    lineage[ins_pos] = lineage_start + np.arange(ins_pos.shape[0], dtype=np.int64)
    return Sequence(bits=bits, lineage=lineage)


def build_tree(params: ModelParams, root_bits, edits=None, seed: int = 0) -> EvolvedTree:
    """Tree whose channel is the identity except where edits says otherwise.

    edits maps (level, index) of a child node to the SiteMap of its
    incoming edge.
    """
    d, h = params.arity, params.height
    root_bits = np.asarray(root_bits, dtype=np.uint8)
    root = Sequence(
        bits=root_bits,
        lineage=np.arange(1, root_bits.shape[0] + 1, dtype=np.int64),
    )
    nodes = [root]
    maps: list[SiteMap | None] = [None]
    counter = root_bits.shape[0] + 1
    for level in range(h):
        for index in range(d**level):
            parent = nodes[flat_index(d, level, index)]
            for c in range(d):
                m = (edits or {}).get((level + 1, index * d + c))
                if m is None:
                    m = edit_map(len(parent))
                assert m.parent_len == len(parent), "edit does not fit its parent"
                nodes.append(apply_map(parent, m, counter))
                maps.append(m)
                counter += m.insert_count
    return EvolvedTree(params=params, seed=seed, nodes=nodes, maps=maps, next_lineage=counter)
