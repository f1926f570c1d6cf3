"""Root reconstruction from leaf sequences by anchored recursive majority.

A parent sequence is rebuilt from its d reconstructed children in rounds.
Round r claims the island of positions [l*(r-1), l*r). Before voting, the
children are aligned: each child i carries a running shift estimate s_i,
and the anchor window of length a starting at l*r + s_i is compared
against the other children's anchors. Children whose anchors correlate
with at least d-2 of the others (self included) form the trusted set for
the round; the island is their sitewise majority. A child that falls out
is probed one position to the left and to the right: if exactly one probe
matches at least d-2 of the other anchors, the child's shift absorbed an
indel and is corrected for the following rounds. If neither or both
probes match, or if fewer than d-2 children remain trusted, the parent is
declared radioactive and inherits its first child's sequence verbatim,
flagged. When some child can no longer supply an anchor the loop stops
and the remaining positions are filled by plain majority over all d
children, truncated to the shortest.

Sitewise majority ties are resolved by coins keyed on (node, position),
so any two computations of the same vote agree regardless of order.

The round loop is batched: as long as every child has a full-length
anchor, whole blocks of rounds are tested with one pairwise-correlation
pass and the clean prefix is emitted in bulk; the first round that needs
drift handling falls back to the scalar path. Both paths decide every
comparison through the same integer agreement-sum predicate, so batching
never changes a verdict.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .evolution import ModelParams, flat_index
from .rng import tie_coins

GAP = 2

_BLOCK = 4096  # rounds per batched correlation block


class InfeasibleParametersError(ValueError):
    """The model leaves no admissible reconstruction thresholds."""


@dataclass(frozen=True)
class ReconConfig:
    """Everything the reconstruction pass needs to know."""

    arity: int
    height: int
    seq_len: int
    island_len: int
    anchor_len: int
    gamma: float
    delta: float
    beta: float
    anchor_scale: float = 8.0

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError("arity must be at least 1")
        if self.height < 0:
            raise ValueError("height must be nonnegative")
        if self.seq_len < 1:
            raise ValueError("seq_len must be at least 1")
        if self.island_len < 1:
            raise ValueError("island_len must be at least 1")
        if self.anchor_len < 1:
            raise ValueError("anchor_len must be at least 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def leaves(self) -> int:
        return self.arity**self.height


def _ceil_cbrt(n: int) -> int:
    """Smallest integer r with r**3 >= n, computed exactly."""
    r = int(round(n ** (1.0 / 3.0)))
    while r**3 < n:
        r += 1
    while r > 1 and (r - 1) ** 3 >= n:
        r -= 1
    return r


def derive_config(
    params: ModelParams,
    anchor_scale: float = 8.0,
    beta: float | None = None,
    delta: float | None = None,
) -> ReconConfig:
    """Thresholds and window sizes for a given model.

    beta defaults to 1/arity, the per-node error budget of the majority
    game. The drift threshold delta defaults to the midpoint of its
    admissible range (0, (theta^2 - 16*beta) / (1 + theta^2)); passing an
    explicit value outside that range is allowed but warns, since the
    separation between aligned and misaligned anchors is no longer
    guaranteed. The anchor correlation threshold is then
    gamma = (1 - delta) * theta^2 - 4*beta. Note gamma may well be
    negative for generous beta; anchor tests just become permissive.

    Islands are the cube root of the sequence length, rounded up; anchors
    are anchor_scale * ln(number of leaves), rounded up, clamped (with a
    warning) to one less than the island length.
    """
    d = params.arity
    if d < 3 or d % 2 == 0:
        raise InfeasibleParametersError("reconstruction needs an odd arity of at least 3")
    if beta is None:
        beta = 1.0 / d
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    theta_sq = params.theta * params.theta
    delta_max = (theta_sq - 16.0 * beta) / (1.0 + theta_sq)
    if delta is None:
        if delta_max <= 0:
            raise InfeasibleParametersError(
                f"no admissible drift threshold: theta^2={theta_sq:.6g} "
                f"does not exceed 16*beta={16.0 * beta:.6g}"
            )
        delta = delta_max / 2.0
    else:
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie strictly between 0 and 1")
        if delta >= delta_max:
            warnings.warn(
                f"delta={delta:.6g} is at or above the guarantee limit "
                f"{delta_max:.6g}; proceeding without the usual margins",
                RuntimeWarning,
                stacklevel=2,
            )
    gamma = (1.0 - delta) * theta_sq - 4.0 * beta
    ell = _ceil_cbrt(params.seq_len)
    if ell <= 2:
        raise InfeasibleParametersError(
            f"seq_len={params.seq_len} leaves islands of length {ell}, too short to anchor"
        )
    a = max(1, math.ceil(anchor_scale * math.log(params.leaves))) if params.leaves > 1 else 1
    if a >= ell:
        warnings.warn(
            f"anchor length {a} clamped to {ell - 1} to fit inside islands of length {ell}",
            RuntimeWarning,
            stacklevel=2,
        )
        a = ell - 1
    return ReconConfig(
        arity=d,
        height=params.height,
        seq_len=params.seq_len,
        island_len=ell,
        anchor_len=a,
        gamma=gamma,
        delta=delta,
        beta=beta,
        anchor_scale=anchor_scale,
    )


def correlation(y, z) -> float:
    """Empirical spin correlation of two equal-length bit windows.

    Equals (matches - mismatches) / length, computed in exact integers
    before the single final division.
    """
    y = np.asarray(y)
    z = np.asarray(z)
    if y.ndim != 1 or z.ndim != 1:
        raise ValueError("correlation expects one-dimensional windows")
    if y.shape[0] != z.shape[0]:
        raise ValueError(f"window lengths differ: {y.shape[0]} vs {z.shape[0]}")
    m = y.shape[0]
    if m == 0:
        raise ValueError("empty windows have no correlation")
    diff = int(np.count_nonzero(y != z))
    return (m - 2 * diff) / m


def _sum_passes(agree, m, gamma):
    """Threshold test on an integer agreement sum: correlation >= gamma.

    agree is matches - mismatches over m sites (an integer or an integer
    array with m > 0). Scalar and batched anchor tests both come through
    here, so the two paths cannot disagree.
    """
    return agree >= gamma * m


def majority_vote(values, tie_rng) -> int:
    """Majority over 0/1 votes, ignoring GAP and None entries.

    Ties (including the empty vote) fall to tie_rng, either a
    numpy Generator or a zero-argument callable returning an int.
    """
    ones = zeros = 0
    for v in values:
        if v is None or v == GAP:
            continue
        if v:
            ones += 1
        else:
            zeros += 1
    if ones != zeros:
        return 1 if ones > zeros else 0
    if isinstance(tie_rng, np.random.Generator):
        return int(tie_rng.integers(0, 2))
    return int(tie_rng()) & 1


@dataclass
class NodeResult:
    """Reconstruction output for one node.

    shift_history[r] holds the d shift estimates after round r (entry 0
    is the all-zero start); g_sets[r-1] lists the trusted children of
    round r. On abort both stop at the last completed round.
    """

    bits: np.ndarray
    radioactive: bool
    shift_history: tuple
    g_sets: tuple
    abort_round: int | None


def _spin_majority(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columnwise majority of a (voters, width) bit stack.

    Returns (bits, tie_mask); tied columns come back as 0 and must be
    patched by the caller if coins are wanted.
    """
    spins = (stack.astype(np.int32) << 1) - 1
    ssum = spins.sum(axis=0)
    return (ssum > 0).astype(np.uint8), ssum == 0


def _scalar_round(seqs, lens, shifts, r, config, seed, node, chunks, g_sets, shift_history):
    """Handle one round the slow, fully general way.

    Returns True when the round completed, False on abort. Mutates
    shifts in place and appends the island, trusted set, and shift
    snapshot on success.
    """
    d = config.arity
    ell, a, gamma = config.island_len, config.anchor_len, config.gamma
    T = ell * r
    anchors = []
    for i in range(d):
        s = int(T + shifts[i])
        anchors.append(seqs[i][s : min(s + a, int(lens[i]))])

    passes = np.eye(d, dtype=bool)
    for i in range(d):
        for j in range(i + 1, d):
            m = min(anchors[i].shape[0], anchors[j].shape[0])
            agree = m - 2 * int(np.count_nonzero(anchors[i][:m] != anchors[j][:m]))
            passes[i, j] = passes[j, i] = bool(_sum_passes(agree, m, gamma))
    good_counts = passes.sum(axis=1)
    members = [i for i in range(d) if good_counts[i] >= d - 2]
    if len(members) < d - 2:
        return False

    for i in range(d):
        if good_counts[i] >= d - 2:
            continue
        hits = []
        for delta_s in (-1, 1):
            s = int(T + shifts[i] + delta_s)
            if s < 0 or s >= lens[i]:
                continue  # probe window is empty: this side fails
            probe = seqs[i][s : min(s + a, int(lens[i]))]
            votes = 0
            for j in range(d):
                if j == i:
                    continue
                m = min(probe.shape[0], anchors[j].shape[0])
                if m == 0:
                    continue
                agree = m - 2 * int(np.count_nonzero(probe[:m] != anchors[j][:m]))
                if _sum_passes(agree, m, gamma):
                    votes += 1
            if votes >= d - 2:
                hits.append(delta_s)
        if len(hits) != 1:
            return False  # neither or both probes matched: no consistent shift
        shifts[i] += hits[0]

    # Island r, voted by the trusted children at their unchanged shifts.
    # Their anchors sit beyond the island, so the reads are in bounds.
    isl = np.empty((len(members), ell), dtype=np.uint8)
    for row, i in enumerate(members):
        base = ell * (r - 1) + int(shifts[i])
        isl[row] = seqs[i][base : base + ell]
    out, ties = _spin_majority(isl)
    if ties.any():
        pos = ell * (r - 1) + np.flatnonzero(ties)
        out[ties] = tie_coins(seed, node, pos)
    chunks.append(out)
    g_sets.append(tuple(members))
    shift_history.append(tuple(int(s) for s in shifts))
    return True


def recursive_step(children, config: ReconConfig, seed: int, node: int = 0) -> NodeResult:
    """Rebuild one parent from its d children's reconstructions.

    children may be NodeResults, Sequences, or plain bit arrays; only
    their bits are consulted. node keys this parent's tie coins.
    """
    d = config.arity
    if len(children) != d:
        raise ValueError(f"expected {d} children, got {len(children)}")
    ell, a, gamma = config.island_len, config.anchor_len, config.gamma
    seqs = [np.ascontiguousarray(getattr(c, "bits", c), dtype=np.uint8) for c in children]
    lens = np.array([s.shape[0] for s in seqs], dtype=np.int64)
    shifts = np.zeros(d, dtype=np.int64)
    chunks: list[np.ndarray] = []
    shift_history: list[tuple] = [tuple(int(s) for s in shifts)]
    g_sets: list[tuple] = []
    full_g = tuple(range(d))
    r = 1
    radioactive = False
    abort_round = None

    while True:
        if np.any(ell * r + shifts < 0):
            # Alignment drifted past the sequence start; there is no
            # window to read, so give up on this node.
            radioactive = True
            abort_round = r
            break
        if np.any(ell * r + shifts >= lens):
            break  # some anchor window is empty: emit the tail and stop
        r_full = int(((lens - shifts - a) // ell).min())
        if r_full >= r:
            hi = min(r_full, r + _BLOCK - 1)
            nr = hi - r + 1
            wins = np.empty((d, nr, a), dtype=np.uint8)
            for i in range(d):
                base = ell * r + int(shifts[i])
                idx = base + ell * np.arange(nr)[:, None] + np.arange(a)[None, :]
                wins[i] = seqs[i][idx]
            spins = (wins.astype(np.int32) << 1) - 1
            agree = np.einsum("ira,jra->ijr", spins, spins, dtype=np.int64)
            passes = _sum_passes(agree, a, gamma) | np.eye(d, dtype=bool)[:, :, None]
            clean = (passes.sum(axis=1) >= d - 2).all(axis=0)
            n_clean = nr if clean.all() else int(np.argmin(clean))
            if n_clean:
                isl = np.empty((d, n_clean * ell), dtype=np.uint8)
                for i in range(d):
                    base = ell * (r - 1) + int(shifts[i])
                    isl[i] = seqs[i][base : base + n_clean * ell]
                out, _ = _spin_majority(isl)  # all d vote and d is odd: no ties
                chunks.append(out)
                snapshot = tuple(int(s) for s in shifts)
                for _ in range(n_clean):
                    g_sets.append(full_g)
                    shift_history.append(snapshot)
                r += n_clean
                continue
        if not _scalar_round(
            seqs, lens, shifts, r, config, seed, node, chunks, g_sets, shift_history
        ):
            radioactive = True
            abort_round = r
            break
        r += 1

    if not radioactive and np.any(ell * (r - 1) + shifts < 0):
        radioactive = True  # tail start underflows some child
        abort_round = r
    if radioactive:
        bits = seqs[0].copy()
    else:
        tail_start = ell * (r - 1)
        limit = int((lens - shifts).min())
        if limit > tail_start:
            width = limit - tail_start
            tl = np.empty((d, width), dtype=np.uint8)
            for i in range(d):
                base = tail_start + int(shifts[i])
                tl[i] = seqs[i][base : base + width]
            out, _ = _spin_majority(tl)  # all d vote and d is odd: no ties
            chunks.append(out)
        bits = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)

    return NodeResult(
        bits=bits,
        radioactive=radioactive,
        shift_history=tuple(shift_history),
        g_sets=tuple(g_sets),
        abort_round=abort_round,
    )


@dataclass
class ReconstructionResult:
    """Root estimate normalized to the model length, plus bookkeeping."""

    bits: np.ndarray
    raw_len: int
    padded: int
    truncated: int
    root_radioactive: bool
    radioactive_count: int
    node_results: dict[int, NodeResult] | None = None


def reconstruct_root(
    leaves, config: ReconConfig, seed: int, keep_nodes: bool = False
) -> ReconstructionResult:
    """Run the full bottom-up reconstruction from the leaf sequences.

    The output is truncated or zero-padded to exactly config.seq_len,
    with the adjustment counts reported. A radioactive root yields the
    flagged all-zeros sequence of that length. keep_nodes retains every
    internal NodeResult, keyed by level-order position.
    """
    d, h, k = config.arity, config.height, config.seq_len
    if len(leaves) != d**h:
        raise ValueError(f"expected {d**h} leaves, got {len(leaves)}")
    level_results = []
    node_results: dict[int, NodeResult] = {}
    for li, leaf in enumerate(leaves):
        bits = np.asarray(getattr(leaf, "bits", leaf), dtype=np.uint8)
        nr = NodeResult(
            bits=bits, radioactive=False, shift_history=(), g_sets=(), abort_round=None
        )
        level_results.append(nr)
        if keep_nodes:
            node_results[flat_index(d, h, li)] = nr
    radioactive_count = 0
    for level in range(h - 1, -1, -1):
        next_results = []
        for index in range(d**level):
            node_flat = flat_index(d, level, index)
            res = recursive_step(
                level_results[index * d : (index + 1) * d], config, seed, node=node_flat
            )
            radioactive_count += res.radioactive
            next_results.append(res)
            if keep_nodes:
                node_results[node_flat] = res
        level_results = next_results
    root = level_results[0]
    raw_len = len(root.bits)
    if root.radioactive:
        bits = np.zeros(k, dtype=np.uint8)
        padded = truncated = 0
    else:
        truncated = max(0, raw_len - k)
        padded = max(0, k - raw_len)
        bits = root.bits[:k]
        if padded:
            bits = np.concatenate([bits, np.zeros(padded, dtype=np.uint8)])
    return ReconstructionResult(
        bits=bits,
        raw_len=raw_len,
        padded=padded,
        truncated=truncated,
        root_radioactive=root.radioactive,
        radioactive_count=radioactive_count,
        node_results=node_results if keep_nodes else None,
    )
