"""Indel-structure classification and stable-subtree extraction.

A parent node is radioactive when its outgoing edges put indels where
the alignment logic cannot absorb them:

* anchor_indel: some edge fired an indel operation at a parent site
  that lies inside an anchor window (site p with p >= l and p mod l < a);
* multi_edge_island: two different edges each fired an indel inside the
  same island of the parent;
* double_indel_island: one edge fired two or more indels inside one
  island.

Otherwise the node is stable, and every island of a stable parent holds
at most one indel across all its edges; the islands that hold exactly
one are recorded as corrupted, attributed to the child whose edge fired.
Leaves are stable by definition.

A stable subtree hangs off the root with branching d-1 and only stable
nodes. Qualification is decided bottom-up (a node qualifies when it is
stable and at least d-1 children qualify) and the extraction trims each
kept node to exactly d-1 children, choosing the dropped child by a
keyed hash so that extraction is reproducible and order-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..evolution import EvolvedTree, flat_index
from ..recon import ReconConfig
from ..rng import TAG_SUBTREE_TRIM, mix, splitmix64

TRIGGER_ANCHOR = "anchor_indel"
TRIGGER_MULTI_EDGE = "multi_edge_island"
TRIGGER_DOUBLE = "double_indel_island"


@dataclass
class NodeStability:
    """Verdict for one node in its role as a parent."""

    radioactive: bool
    trigger: str | None
    corrupted: dict[int, int]


@dataclass
class StabilityReport:
    arity: int
    height: int
    island_len: int
    anchor_len: int
    per_node: list[NodeStability]

    @property
    def internal_count(self) -> int:
        if self.arity == 1:
            return self.height
        return (self.arity**self.height - 1) // (self.arity - 1)

    @property
    def radioactive_internal(self) -> int:
        return sum(ns.radioactive for ns in self.per_node[: self.internal_count])

    @property
    def alpha_hat(self) -> float:
        """Observed per-parent radioactivity rate."""
        n = self.internal_count
        return self.radioactive_internal / n if n else 0.0

    def stable(self, flat: int) -> bool:
        return not self.per_node[flat].radioactive


def classify_stability(tree: EvolvedTree, config: ReconConfig) -> StabilityReport:
    """Classify every node of the tree against the island/anchor grid."""
    d, h = tree.params.arity, tree.params.height
    ell, a = config.island_len, config.anchor_len
    per_node: list[NodeStability] = []
    for level in range(h + 1):
        for index in range(d**level):
            if level == h:
                per_node.append(NodeStability(radioactive=False, trigger=None, corrupted={}))
                continue
            anchored = False
            doubled = False
            island_children: dict[int, set[int]] = {}
            for c in range(d):
                m = tree.edge_map(level + 1, index * d + c)
                pos = m.indel_positions()
                if not pos.size:
                    continue
                if ((pos >= ell) & (pos % ell < a)).any():
                    anchored = True
                islands, counts = np.unique(pos // ell, return_counts=True)
                if (counts >= 2).any():
                    doubled = True
                for isl in islands:
                    island_children.setdefault(int(isl), set()).add(c)
            crowded = any(len(owners) >= 2 for owners in island_children.values())
            if anchored:
                trigger = TRIGGER_ANCHOR
            elif crowded:
                trigger = TRIGGER_MULTI_EDGE
            elif doubled:
                trigger = TRIGGER_DOUBLE
            else:
                trigger = None
            corrupted = {}
            if trigger is None:
                # stable: every touched island has exactly one indel, one owner
                corrupted = {isl: owners.pop() for isl, owners in island_children.items()}
            per_node.append(
                NodeStability(radioactive=trigger is not None, trigger=trigger, corrupted=corrupted)
            )
    return StabilityReport(
        arity=d, height=h, island_len=ell, anchor_len=a, per_node=per_node
    )


@dataclass
class StableSubtree:
    """A (d-1)-ary all-stable subtree rooted at the root of the tree."""

    arity: int
    height: int
    node_mask: np.ndarray
    dropped: dict[int, int]

    def contains(self, flat: int) -> bool:
        return bool(self.node_mask[flat])

    def kept_children(self, level: int, index: int) -> list[int]:
        """Child slots (0..d-1) of node (level, index) kept in the subtree."""
        d = self.arity
        return [
            c
            for c in range(d)
            if self.node_mask[flat_index(d, level + 1, index * d + c)]
        ]

    def internal_nodes(self):
        """Yield (level, index, flat) for every kept non-leaf node."""
        d = self.arity
        for level in range(self.height):
            for index in range(d**level):
                flat = flat_index(d, level, index)
                if self.node_mask[flat]:
                    yield level, index, flat


def extract_stable_subtree(report: StabilityReport, seed: int) -> StableSubtree | None:
    """Find a (d-1)-ary stable subtree under the root, or None.

    Every kept node with d qualifying children drops one of them, picked
    by a hash keyed on (seed, node), so repeated extractions agree.
    """
    d, h = report.arity, report.height
    total = len(report.per_node)
    qual = np.zeros(total, dtype=bool)
    leaf_start = flat_index(d, h, 0)
    qual[leaf_start:] = True
    for level in range(h - 1, -1, -1):
        for index in range(d**level):
            flat = flat_index(d, level, index)
            if report.per_node[flat].radioactive:
                continue
            kids = sum(
                qual[flat_index(d, level + 1, index * d + c)] for c in range(d)
            )
            qual[flat] = kids >= d - 1
    if not qual[0]:
        return None
    keep = np.zeros(total, dtype=bool)
    keep[0] = True
    dropped: dict[int, int] = {}
    for level in range(h):
        for index in range(d**level):
            flat = flat_index(d, level, index)
            if not keep[flat]:
                continue
            slots = [
                c for c in range(d) if qual[flat_index(d, level + 1, index * d + c)]
            ]
            if len(slots) > d - 1:
                victim = slots[splitmix64(mix(seed, TAG_SUBTREE_TRIM, flat)) % len(slots)]
                slots.remove(victim)
                dropped[flat] = victim
            for c in slots:
                keep[flat_index(d, level + 1, index * d + c)] = True
    return StableSubtree(arity=d, height=h, node_mask=keep, dropped=dropped)


def stable_subtree_bound(alpha: float, arity: int, height: int) -> float:
    """Lower bound on the probability that a height-h node roots a
    (d-1)-ary stable subtree, when each node is radioactive with
    probability at most alpha independently.

    nu_0 = 1 and nu_r = (1 - alpha) * (d * nu^(d-1) - (d-1) * nu^d) with
    nu = nu_(r-1): the node must be stable and at least d-1 of its d
    children must themselves qualify.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if arity < 1:
        raise ValueError("arity must be at least 1")
    if height < 0:
        raise ValueError("height must be nonnegative")
    d = arity
    nu = 1.0
    for _ in range(height):
        nu = (1.0 - alpha) * (d * nu ** (d - 1) - (d - 1) * nu**d)
    return nu
