"""Pathwise checks behind the reconstruction guarantee.

The guarantee rests on a nested good event. Working outward from the
config: the thresholds must separate (gamma > delta + 12*beta); all
sequence lengths must stay within (1 +- zeta) of the root length; a
(d-1)-ary stable subtree must hang off the root; at every internal node
of that subtree the true anchor windows must correlate above
gamma + 4*beta when aligned and below delta at every misaligned offset;
and the agreement vectors of the children's adversarial reconstructions
must look like independent coins of the advertised rate on every anchor
window. certify_event_E walks these stages in order on one evolved tree
and reports the first one that fails.

verify_bias_concentration and verify_correlation_bound are the two
primitive inequalities, exposed separately; the correlation bound is
decided in exact integer arithmetic so a pass is never a rounding
artifact. anchor_correlation_stats collects the raw aligned and
misaligned correlations for margin studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..evolution import EvolvedTree, flat_index, length_stats
from ..recon import ReconConfig
from .adversary import adversarial_reconstruct, gateway_masks
from .stability import (
    StabilityReport,
    StableSubtree,
    classify_stability,
    extract_stable_subtree,
)


@dataclass(frozen=True)
class BiasCheck:
    """Agreement windows against the advertised coin rate."""

    product_residual: float
    first_residual: float
    second_residual: float
    tolerance: float
    holds: bool


def verify_bias_concentration(lam, theta, beta: float, beta_prime: float) -> BiasCheck:
    """Check two agreement windows against rate beta_prime.

    The product of their spins must average to (1 - 2*beta_prime)^2 and
    each window's disagreement frequency must match beta_prime, all
    within beta/2.
    """
    lam = np.asarray(lam, dtype=np.int64)
    theta = np.asarray(theta, dtype=np.int64)
    if lam.ndim != 1 or theta.ndim != 1 or lam.shape != theta.shape:
        raise ValueError("expected two equal-length one-dimensional windows")
    if lam.shape[0] == 0:
        raise ValueError("empty windows")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    target = (1.0 - 2.0 * beta_prime) ** 2
    product_residual = abs(float(np.mean((2 * lam - 1) * (2 * theta - 1))) - target)
    first_residual = abs(float(np.mean(lam == 0)) - beta_prime)
    second_residual = abs(float(np.mean(theta == 0)) - beta_prime)
    tol = beta / 2.0
    holds = product_residual <= tol and first_residual <= tol and second_residual <= tol
    return BiasCheck(
        product_residual=product_residual,
        first_residual=first_residual,
        second_residual=second_residual,
        tolerance=tol,
        holds=holds,
    )


@dataclass(frozen=True)
class CorrelationBoundCheck:
    """One application of the correlation transfer inequality."""

    lhs: float
    rhs: float
    holds: bool


def verify_correlation_bound(x, y, x_hat, y_hat, lam, theta) -> CorrelationBoundCheck:
    """Check |cor(x, y) - cor(x_hat, y_hat)| against the agreement bound.

    The right-hand side is 1 - mean(<lam><theta> - 1{lam=0} - 1{theta=0}).
    Both sides are compared as exact integer numerators over the common
    length, so the verdict carries no floating-point slack.
    """
    arrs = [np.asarray(v, dtype=np.int64) for v in (x, y, x_hat, y_hat, lam, theta)]
    m = arrs[0].shape[0]
    for v in arrs:
        if v.ndim != 1 or v.shape[0] != m:
            raise ValueError("expected six equal-length one-dimensional windows")
    if m == 0:
        raise ValueError("empty windows")
    x, y, x_hat, y_hat, lam, theta = arrs
    prod_true = (2 * x - 1) * (2 * y - 1)
    prod_hat = (2 * x_hat - 1) * (2 * y_hat - 1)
    lhs_num = abs(int((prod_true - prod_hat).sum()))
    coupling = (2 * lam - 1) * (2 * theta - 1) - (1 - lam) - (1 - theta)
    rhs_num = m - int(coupling.sum())
    return CorrelationBoundCheck(lhs=lhs_num / m, rhs=rhs_num / m, holds=lhs_num <= rhs_num)


def _gather_windows(bits: np.ndarray, starts: np.ndarray, width: int):
    """Rows bits[starts[r] : starts[r] + width], plus an in-bounds mask."""
    valid = (starts >= 0) & (starts + width <= bits.shape[0])
    idx = np.where(valid, starts, 0)[:, None] + np.arange(width)[None, :]
    return bits[idx], valid


def true_shifts(tree: EvolvedTree, level: int, index: int, positions: np.ndarray):
    """Alignment shift of every child at the given parent positions.

    shift[c][r] = (child position of parent site positions[r]) - positions[r];
    valid[c][r] is False where the position is out of range or deleted.
    """
    d = tree.params.arity
    nr = positions.shape[0]
    shifts = np.zeros((d, nr), dtype=np.int64)
    valid = np.zeros((d, nr), dtype=bool)
    for c in range(d):
        m = tree.edge_map(level + 1, index * d + c)
        inb = positions < m.parent_len
        pos = np.where(inb, positions, 0)
        tc = m.to_child[pos]
        ok = inb & (tc >= 0)
        shifts[c] = np.where(ok, tc - positions, 0)
        valid[c] = ok
    return shifts, valid


def _spin_rows(w: np.ndarray) -> np.ndarray:
    return (w.astype(np.int8) << 1).astype(np.int8) - np.int8(1)


def _row_corr(wi: np.ndarray, wj: np.ndarray) -> np.ndarray:
    """Rowwise correlation of two (rows, width) spin matrices."""
    width = wi.shape[1]
    agree = np.einsum("ra,ra->r", wi, wj, dtype=np.int64)
    return agree / width


@dataclass
class AnchorStats:
    """Raw anchor-window correlations on the true sequences of one tree."""

    aligned_threshold: float
    misaligned_threshold: float
    aligned: np.ndarray
    misaligned: np.ndarray
    aligned_failures: int
    misaligned_failures: int
    vacuous: int

    @property
    def checks(self) -> int:
        return int(self.aligned.shape[0] + self.misaligned.shape[0])

    @property
    def min_aligned(self) -> float:
        return float(self.aligned.min()) if self.aligned.size else math.nan

    @property
    def max_misaligned(self) -> float:
        return float(self.misaligned.max()) if self.misaligned.size else math.nan


def _scan_anchor_events(
    tree: EvolvedTree,
    config: ReconConfig,
    level: int,
    index: int,
    r_vec: np.ndarray,
    offsets: tuple[int, ...],
):
    """Aligned/misaligned correlations for all child pairs of one parent.

    Yields (kind, correlations) where kind is "aligned" or "misaligned";
    the trailing element is the number of vacuous (out-of-range) checks.
    """
    d = tree.params.arity
    ell, a = config.island_len, config.anchor_len
    positions = ell * r_vec
    par_len = len(tree.node(level, index))
    parent_ok = positions + a <= par_len
    shifts, shift_ok = true_shifts(tree, level, index, positions)
    offs = sorted({0} | {s * e for e in offsets for s in (1, -1)})
    W: dict[tuple[int, int], np.ndarray] = {}
    V: dict[tuple[int, int], np.ndarray] = {}
    for c in range(d):
        bits = tree.node(level + 1, index * d + c).bits
        for o in offs:
            w, ok = _gather_windows(bits, positions + shifts[c] + o, a)
            W[c, o] = _spin_rows(w)
            V[c, o] = ok & shift_ok[c] & parent_ok
    vacuous = 0
    aligned: list[np.ndarray] = []
    misaligned: list[np.ndarray] = []
    for i, j in combinations(range(d), 2):
        both = V[i, 0] & V[j, 0]
        vacuous += int((~both).sum())
        if both.any():
            aligned.append(_row_corr(W[i, 0], W[j, 0])[both])
        for e in offsets:
            for o in (e, -e):
                for wi, wj, ok in (
                    (W[i, o], W[j, 0], V[i, o] & V[j, 0]),
                    (W[i, 0], W[j, o], V[i, 0] & V[j, o]),
                ):
                    vacuous += int((~ok).sum())
                    if ok.any():
                        misaligned.append(_row_corr(wi, wj)[ok])
    def cat(parts):
        return np.concatenate(parts) if parts else np.zeros(0)

    return cat(aligned), cat(misaligned), vacuous


def anchor_correlation_stats(
    tree: EvolvedTree,
    config: ReconConfig,
    rounds: int | None = None,
    offsets: tuple[int, ...] = (1, 2),
    report: StabilityReport | None = None,
) -> AnchorStats:
    """Collect anchor correlations across all internal nodes of a tree.

    For every parent, child pair, and round r, the aligned windows (both
    children read length-a windows at their true shifts for position
    l*r) must correlate above gamma + 4*beta, and each window shifted by
    +-1 or +-2 sites against the other's aligned window must correlate
    below delta. Out-of-range windows are skipped and counted as
    vacuous. rounds caps the number of rounds per parent. When a
    stability report is given, only stable parents are sampled.
    """
    ell = config.island_len
    aligned_parts: list[np.ndarray] = []
    misaligned_parts: list[np.ndarray] = []
    vacuous = 0
    d, h = tree.params.arity, tree.params.height
    for level in range(h):
        for index in range(d**level):
            if report is not None and not report.stable(flat_index(d, level, index)):
                continue
            r_hi = len(tree.node(level, index)) // ell + 1
            if rounds is not None:
                r_hi = min(r_hi, rounds)
            if r_hi < 1:
                continue
            r_vec = np.arange(1, r_hi + 1, dtype=np.int64)
            al, mis, vac = _scan_anchor_events(tree, config, level, index, r_vec, offsets)
            aligned_parts.append(al)
            misaligned_parts.append(mis)
            vacuous += vac
    aligned = np.concatenate(aligned_parts) if aligned_parts else np.zeros(0)
    misaligned = np.concatenate(misaligned_parts) if misaligned_parts else np.zeros(0)
    aligned_thr = config.gamma + 4.0 * config.beta
    return AnchorStats(
        aligned_threshold=aligned_thr,
        misaligned_threshold=config.delta,
        aligned=aligned,
        misaligned=misaligned,
        aligned_failures=int((aligned <= aligned_thr).sum()),
        misaligned_failures=int((misaligned >= config.delta).sum()),
        vacuous=vacuous,
    )


@dataclass
class BiasScan:
    """Tally of the agreement-window checks across one tree."""

    checks: int = 0
    failures: int = 0
    vacuous: int = 0
    max_residual: float = -math.inf
    beta_prime_max: float = -math.inf


def bias_window_events(
    tree: EvolvedTree,
    config: ReconConfig,
    report: StabilityReport,
    subtree: StableSubtree,
    seed: int,
    r_vec: np.ndarray,
) -> BiasScan:
    """Check agreement windows of kept-children pairs across the subtree.

    For every internal subtree node, every pair of its kept children,
    and every round, the three windows of each child's agreement vector
    (starting one left of, at, and one right of the child's true anchor
    position) must satisfy the coin-rate inequalities within beta/2,
    with the rate plugged in as the pooled disagreement frequency of
    the pair's full agreement vectors.
    """
    d = tree.params.arity
    ell, a = config.island_len, config.anchor_len
    tol = config.beta / 2.0
    scan = BiasScan()
    lam_cache: dict[int, np.ndarray] = {}
    positions = ell * r_vec
    for level, index, flat in subtree.internal_nodes():
        shifts, shift_ok = true_shifts(tree, level, index, positions)
        parent_ok = positions + a <= len(tree.node(level, index))
        slots = subtree.kept_children(level, index)
        lam_w: dict[tuple[int, int], np.ndarray] = {}
        lam_v: dict[tuple[int, int], np.ndarray] = {}
        lam_full: dict[int, np.ndarray] = {}
        for c in slots:
            child_flat = flat_index(d, level + 1, index * d + c)
            if child_flat not in lam_cache:
                lam_cache[child_flat] = _agreement_vector(
                    tree, report, subtree, seed, level + 1, index * d + c
                )
            lam_full[c] = lam_cache[child_flat]
            for o in (-1, 0, 1):
                w, ok = _gather_windows(lam_full[c], positions + shifts[c] + o, a)
                lam_w[c, o] = w
                lam_v[c, o] = ok & shift_ok[c] & parent_ok
        for ci, cj in combinations(slots, 2):
            bp = 0.5 * (
                float(np.mean(lam_full[ci] == 0)) + float(np.mean(lam_full[cj] == 0))
            )
            scan.beta_prime_max = max(scan.beta_prime_max, bp)
            target = (1.0 - 2.0 * bp) ** 2
            for c in (ci, cj):
                for o in (-1, 0, 1):
                    ok = lam_v[c, o]
                    scan.vacuous += int((~ok).sum())
                    if not ok.any():
                        continue
                    res = np.abs((1.0 - lam_w[c, o].mean(axis=1))[ok] - bp)
                    scan.checks += int(ok.sum())
                    scan.failures += int((res > tol).sum())
                    scan.max_residual = max(scan.max_residual, float(res.max()))
            for oi in (-1, 0, 1):
                for oj in (-1, 0, 1):
                    ok = lam_v[ci, oi] & lam_v[cj, oj]
                    scan.vacuous += int((~ok).sum())
                    if not ok.any():
                        continue
                    spins_i = _spin_rows(lam_w[ci, oi])
                    spins_j = _spin_rows(lam_w[cj, oj])
                    pm = np.einsum("ra,ra->r", spins_i, spins_j, dtype=np.int64)[ok] / a
                    res = np.abs(pm - target)
                    scan.checks += int(ok.sum())
                    scan.failures += int((res > tol).sum())
                    scan.max_residual = max(scan.max_residual, float(res.max()))
    return scan


@dataclass
class EventCertificate:
    """Stage-by-stage verdict of the good event on one evolved tree."""

    holds: bool
    first_failure: str | None
    feasible: bool
    length_ok: bool | None = None
    stable_ok: bool | None = None
    anchors_ok: bool | None = None
    bias_ok: bool | None = None
    anchor_checks: int = 0
    anchor_failures: int = 0
    anchor_vacuous: int = 0
    min_aligned: float = math.nan
    max_misaligned: float = math.nan
    bias_checks: int = 0
    bias_failures: int = 0
    bias_vacuous: int = 0
    max_bias_residual: float = math.nan
    beta_prime_max: float = math.nan
    subtree: StableSubtree | None = field(default=None, repr=False)


def _agreement_vector(
    tree: EvolvedTree,
    report: StabilityReport,
    subtree: StableSubtree,
    seed: int,
    level: int,
    index: int,
) -> np.ndarray:
    """Sitewise agreement of the adversarial reconstruction rooted here."""
    if level == tree.params.height:
        return np.ones(len(tree.node(level, index)), dtype=np.uint8)
    masks = gateway_masks(tree, report, subtree, seed, level, index)
    _, lam = adversarial_reconstruct(tree, masks)
    return lam


def certify_event_E(
    tree: EvolvedTree,
    config: ReconConfig,
    seed: int,
    zeta: float = 0.1,
    offsets: tuple[int, ...] = (1, 2),
) -> EventCertificate:
    """Walk the nested good event on one tree, stopping at the first
    failing stage.

    Anchor events are checked for every pair among all d children of
    every internal subtree node (a superset of the subtree pairs, so a
    pass certifies that no anchor round can abort). Agreement windows
    are checked for pairs of kept subtree children, with the coin rate
    plugged in empirically as the pooled disagreement frequency of the
    pair's full agreement vectors.
    """
    cert = EventCertificate(
        holds=False,
        first_failure=None,
        feasible=config.gamma > config.delta + 12.0 * config.beta,
    )
    if not cert.feasible:
        cert.first_failure = "feasibility"
        return cert
    k = tree.params.seq_len
    cert.length_ok = length_stats(tree, zeta).within_bounds
    if not cert.length_ok:
        cert.first_failure = "length"
        return cert
    report = classify_stability(tree, config)
    subtree = extract_stable_subtree(report, seed)
    cert.stable_ok = subtree is not None
    cert.subtree = subtree
    if subtree is None:
        cert.first_failure = "stable_subtree"
        return cert

    d = tree.params.arity
    ell, a = config.island_len, config.anchor_len
    r_max = math.ceil((1.0 + zeta) * k / ell)
    r_vec = np.arange(1, r_max + 1, dtype=np.int64)
    aligned_thr = config.gamma + 4.0 * config.beta
    min_aligned = math.inf
    max_misaligned = -math.inf
    for level, index, _ in subtree.internal_nodes():
        al, mis, vac = _scan_anchor_events(tree, config, level, index, r_vec, offsets)
        cert.anchor_checks += al.shape[0] + mis.shape[0]
        cert.anchor_vacuous += vac
        cert.anchor_failures += int((al <= aligned_thr).sum())
        cert.anchor_failures += int((mis >= config.delta).sum())
        if al.size:
            min_aligned = min(min_aligned, float(al.min()))
        if mis.size:
            max_misaligned = max(max_misaligned, float(mis.max()))
    cert.min_aligned = min_aligned if math.isfinite(min_aligned) else math.nan
    cert.max_misaligned = max_misaligned if math.isfinite(max_misaligned) else math.nan
    cert.anchors_ok = cert.anchor_failures == 0
    if not cert.anchors_ok:
        cert.first_failure = "anchors"
        return cert

    scan = bias_window_events(tree, config, report, subtree, seed, r_vec)
    cert.bias_checks = scan.checks
    cert.bias_failures = scan.failures
    cert.bias_vacuous = scan.vacuous
    cert.max_bias_residual = scan.max_residual if math.isfinite(scan.max_residual) else math.nan
    cert.beta_prime_max = (
        scan.beta_prime_max if math.isfinite(scan.beta_prime_max) else math.nan
    )
    cert.bias_ok = cert.bias_failures == 0
    if not cert.bias_ok:
        cert.first_failure = "bias"
        return cert
    cert.holds = True
    return cert
