"""Sequence evolution down a d-ary tree with substitutions and indels.

The root carries a uniform random bit sequence. Along every edge, each
site of the parent independently suffers a deletion (probability p_del),
a substitution (p_sub), and an insertion of a fresh uniform bit
immediately to its right (p_ins). A deletion makes any substitution at
the same site moot; an insertion is honored even when its host site was
deleted. Inserted sites are not themselves mutated on the edge that
created them.

Every site carries a lineage id, unique within a tree, so tests and
oracles can track the true fate of each position without re-deriving
alignments. Site maps record, per edge, where each parent position landed
in the child (or that it was deleted) and after which parent positions a
new site was inserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import TAG_EDGE, TAG_ROOT, substream

DELETED = -1


@dataclass(frozen=True)
class ModelParams:
    """Shape of the tree and the per-site channel probabilities."""

    arity: int
    height: int
    seq_len: int
    p_sub: float = 0.0
    p_del: float = 0.0
    p_ins: float = 0.0

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError("arity must be at least 1")
        if self.height < 0:
            raise ValueError("height must be nonnegative")
        if self.seq_len < 1:
            raise ValueError("seq_len must be at least 1")
        for name in ("p_sub", "p_del", "p_ins"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    @property
    def p_indel(self) -> float:
        return self.p_del + self.p_ins

    @property
    def theta(self) -> float:
        """Signal retained by the substitution channel, 1 - 2*p_sub."""
        return 1.0 - 2.0 * self.p_sub

    @property
    def leaves(self) -> int:
        return self.arity**self.height

    @property
    def node_count(self) -> int:
        if self.arity == 1:
            return self.height + 1
        return (self.arity ** (self.height + 1) - 1) // (self.arity - 1)


@dataclass
class Sequence:
    """A bit sequence plus the lineage id of every site."""

    bits: np.ndarray
    lineage: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        self.lineage = np.asarray(self.lineage, dtype=np.int64)
        if self.bits.shape != self.lineage.shape:
            raise ValueError("bits and lineage must have matching shapes")

    def __len__(self) -> int:
        return int(self.bits.shape[0])


@dataclass
class SiteMap:
    """Where each parent site went on one edge.

    to_child[p] is the child position of parent site p, or DELETED.
    ins_after[p] is True when a fresh site was inserted immediately to
    the right of parent site p.
    """

    to_child: np.ndarray
    ins_after: np.ndarray
    child_len: int

    def __post_init__(self) -> None:
        self.to_child = np.asarray(self.to_child, dtype=np.int64)
        self.ins_after = np.asarray(self.ins_after, dtype=bool)
        if self.to_child.shape != self.ins_after.shape:
            raise ValueError("to_child and ins_after must have matching shapes")

    @property
    def parent_len(self) -> int:
        return int(self.to_child.shape[0])

    @property
    def insert_count(self) -> int:
        return int(np.count_nonzero(self.ins_after))

    def indel_positions(self) -> np.ndarray:
        """Sorted parent positions at which an indel operation fired."""
        hit = (self.to_child == DELETED) | self.ins_after
        return np.flatnonzero(hit)


def flat_index(arity: int, level: int, index: int) -> int:
    """Position of node (level, index) in level order."""
    if not 0 <= index < arity**level:
        raise ValueError(f"index {index} out of range for level {level}")
    if arity == 1:
        return level
    return (arity**level - 1) // (arity - 1) + index


@dataclass
class EvolvedTree:
    """All node sequences of one run, in level order, plus the edge maps."""

    params: ModelParams
    seed: int
    nodes: list[Sequence] = field(repr=False)
    maps: list[SiteMap | None] = field(repr=False)
    next_lineage: int

    @property
    def root(self) -> Sequence:
        return self.nodes[0]

    def node(self, level: int, index: int) -> Sequence:
        return self.nodes[flat_index(self.params.arity, level, index)]

    def edge_map(self, level: int, index: int) -> SiteMap:
        """Map of the edge entering node (level, index) from its parent."""
        if level == 0:
            raise ValueError("the root has no incoming edge")
        m = self.maps[flat_index(self.params.arity, level, index)]
        assert m is not None
        return m

    def leaves(self) -> list[Sequence]:
        d, h = self.params.arity, self.params.height
        start = flat_index(d, h, 0)
        return self.nodes[start : start + d**h]

    def lengths(self) -> np.ndarray:
        return np.array([len(s) for s in self.nodes], dtype=np.int64)


def sample_root(seq_len: int, rng: np.random.Generator) -> Sequence:
    """Uniform bit sequence of length seq_len, lineage ids 1..seq_len."""
    if seq_len < 1:
        raise ValueError("seq_len must be at least 1")
    bits = rng.integers(0, 2, size=seq_len, dtype=np.uint8)
    return Sequence(bits=bits, lineage=np.arange(1, seq_len + 1, dtype=np.int64))


def mutate_edge(
    parent: Sequence,
    params: ModelParams,
    rng: np.random.Generator,
    lineage_start: int | None = None,
) -> tuple[Sequence, SiteMap]:
    """Run one edge of the channel and return (child, site map).

    Four coin arrays are drawn in a fixed order (delete, substitute,
    insert, inserted bits) regardless of which coins end up mattering,
    so a given generator state always yields the same edge. Inserted
    sites receive lineage ids lineage_start, lineage_start + 1, ... in
    left-to-right order; the default continues after the parent's ids.
    """
    m = len(parent)
    del_mask = rng.random(m) < params.p_del
    sub_mask = rng.random(m) < params.p_sub
    ins_mask = rng.random(m) < params.p_ins
    ins_bits = rng.integers(0, 2, size=m, dtype=np.uint8)

    keep = ~del_mask
    contrib = keep.astype(np.int64) + ins_mask.astype(np.int64)
    ends = np.cumsum(contrib)
    starts = ends - contrib
    child_len = int(ends[-1]) if m else 0

    to_child = np.where(keep, starts, np.int64(DELETED))
    child_bits = np.zeros(child_len, dtype=np.uint8)
    child_lineage = np.zeros(child_len, dtype=np.int64)

    kept_pos = starts[keep]
    child_bits[kept_pos] = parent.bits[keep] ^ sub_mask[keep].astype(np.uint8)
    child_lineage[kept_pos] = parent.lineage[keep]

    if lineage_start is None:
        lineage_start = int(parent.lineage.max()) + 1 if m else 1
    ins_pos = (starts + keep)[ins_mask]
    child_bits[ins_pos] = ins_bits[ins_mask]
    n_ins = int(ins_pos.shape[0])
    child_lineage[ins_pos] = lineage_start + np.arange(n_ins, dtype=np.int64)

    child = Sequence(bits=child_bits, lineage=child_lineage)
    site_map = SiteMap(to_child=to_child, ins_after=ins_mask, child_len=child_len)
    return child, site_map


def evolve_tree(params: ModelParams, seed: int, max_nodes: int = 1_000_000) -> EvolvedTree:
    """Evolve a full tree from a fresh root, level by level.

    Each edge consumes its own substream keyed by the child's level-order
    position, so any single edge can be replayed without the others.
    """
    if params.node_count > max_nodes:
        raise ValueError(
            f"tree would have {params.node_count} nodes, exceeding max_nodes={max_nodes}"
        )
    root = sample_root(params.seq_len, substream(seed, TAG_ROOT))
    nodes = [root]
    maps: list[SiteMap | None] = [None]
    counter = params.seq_len + 1
    for level in range(params.height):
        for index in range(params.arity**level):
            parent = nodes[flat_index(params.arity, level, index)]
            for c in range(params.arity):
                child_flat = flat_index(params.arity, level + 1, index * params.arity + c)
                rng = substream(seed, TAG_EDGE, child_flat)
                child, site_map = mutate_edge(parent, params, rng, lineage_start=counter)
                counter += site_map.insert_count
                nodes.append(child)
                maps.append(site_map)
    return EvolvedTree(params=params, seed=seed, nodes=nodes, maps=maps, next_lineage=counter)


def compose_maps(tree: EvolvedTree, level: int, index: int) -> SiteMap:
    """Chained site map from the root down to node (level, index).

    to_child[t] is the position of root site t in that node, or DELETED
    if the site died anywhere along the path. Composition tracks the
    fate of root sites only, so ins_after is all False here; per-edge
    insertion positions live in the individual edge maps.
    """
    d = tree.params.arity
    k0 = len(tree.root)
    cur = np.arange(k0, dtype=np.int64)
    for lv in range(1, level + 1):
        ix = index // d ** (level - lv)
        m = tree.edge_map(lv, ix)
        nxt = np.full(k0, DELETED, dtype=np.int64)
        alive = cur >= 0
        nxt[alive] = m.to_child[cur[alive]]
        cur = nxt
    node_len = len(tree.node(level, index))
    return SiteMap(to_child=cur, ins_after=np.zeros(k0, dtype=bool), child_len=node_len)


@dataclass(frozen=True)
class LengthStats:
    """Observed length range of a tree against the tolerated band."""

    within_bounds: bool
    min_len: int
    max_len: int
    lower: float
    upper: float


def length_stats(tree: EvolvedTree, zeta: float) -> LengthStats:
    """Check every node length against [(1-zeta)*k, (1+zeta)*k]."""
    if not 0.0 < zeta < 1.0:
        raise ValueError("zeta must lie strictly between 0 and 1")
    k = tree.params.seq_len
    lens = tree.lengths()
    lower = (1.0 - zeta) * k
    upper = (1.0 + zeta) * k
    lo, hi = int(lens.min()), int(lens.max())
    return LengthStats(
        within_bounds=bool(lower <= lo and hi <= upper),
        min_len=lo,
        max_len=hi,
        lower=lower,
        upper=upper,
    )
