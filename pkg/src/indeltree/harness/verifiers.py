"""Per-guarantee verifiers: empirical frequencies against stated bounds.

Each verifier replays its cell's trials from the master seed (the same
derivation the experiment runner uses, so both see identical trees) and
returns a flat JSON-safe dict with a boolean "pass".
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.stats import binom

from ..evolution import evolve_tree, length_stats
from ..oracle import (
    anchor_correlation_stats,
    bias_window_events,
    classify_stability,
    extract_stable_subtree,
    simulate_adversarial_majority,
    stable_subtree_bound,
)
from ..recon import InfeasibleParametersError
from ..rng import TAG_GAME, string_tag, substream
from .experiment import CellSpec, ExperimentSpec, run_trial, trial_seed
from .report import wilson_ci

LEMMA_NAMES = (
    "length",
    "radioactivity",
    "stable",
    "anchors",
    "majority",
    "bias",
    "domination",
)


def verify_length(
    cell: CellSpec, seed: int, trials: int | None = None, min_freq: float = 0.99
) -> dict:
    """Every node's length inside the (1 +- zeta) band, almost always."""
    n = cell.trials if trials is None else trials
    params = cell.params()
    hits = 0
    for t in range(n):
        tree = evolve_tree(params, trial_seed(seed, cell.label, t))
        hits += length_stats(tree, cell.zeta).within_bounds
    freq = hits / n if n else 0.0
    return {
        "lemma": "length",
        "cell": cell.label,
        "trials": n,
        "freq": freq,
        "min_freq": min_freq,
        "pass": bool(n and freq >= min_freq),
    }


def verify_radioactivity(
    cell: CellSpec, seed: int, trials: int | None = None, alpha: float | None = None
) -> dict:
    """Per-node radioactivity rate within the alpha budget.

    Pass requires the z=3 Wilson upper bound on the pooled rate to sit
    at or below alpha, not just the point estimate.
    """
    n = cell.trials if trials is None else trials
    alpha = cell.alpha_budget() if alpha is None else alpha
    config = cell.config()
    params = cell.params()
    d, h = cell.arity, cell.height
    per_tree = (d**h - 1) // (d - 1) if h else 0
    radioactive = 0
    for t in range(n):
        tree = evolve_tree(params, trial_seed(seed, cell.label, t))
        radioactive += classify_stability(tree, config).radioactive_internal
    total = per_tree * n
    lo, hi = wilson_ci(radioactive, total, z=3.0)
    return {
        "lemma": "radioactivity",
        "cell": cell.label,
        "trials": n,
        "internal_nodes": total,
        "radioactive": radioactive,
        "alpha_hat": radioactive / total if total else 0.0,
        "wilson_upper": hi,
        "alpha": alpha,
        "pass": bool(total and hi <= alpha),
    }


def verify_stable(cell: CellSpec, seed: int, trials: int | None = None) -> dict:
    """Stable-subtree frequency against its recursion lower bound.

    The bound is evaluated at the z=3 Wilson upper estimate of the
    radioactivity rate (the bound decreases in alpha, so that choice is
    conservative) and slackened by three binomial sigmas of the
    frequency itself.
    """
    n = cell.trials if trials is None else trials
    config = cell.config()
    params = cell.params()
    d, h = cell.arity, cell.height
    per_tree = (d**h - 1) // (d - 1) if h else 0
    stable = 0
    radioactive = 0
    for t in range(n):
        s = trial_seed(seed, cell.label, t)
        tree = evolve_tree(params, s)
        report = classify_stability(tree, config)
        radioactive += report.radioactive_internal
        stable += extract_stable_subtree(report, s) is not None
    freq = stable / n if n else 0.0
    _, alpha_hi = wilson_ci(radioactive, per_tree * n, z=3.0)
    bound = stable_subtree_bound(alpha_hi, d, h) if h else 1.0
    sigma = math.sqrt(bound * (1.0 - bound) / n) if n else 0.0
    threshold = bound - 3.0 * sigma
    return {
        "lemma": "stable",
        "cell": cell.label,
        "trials": n,
        "stable": stable,
        "freq": freq,
        "alpha_upper": alpha_hi,
        "bound": bound,
        "threshold": threshold,
        "pass": bool(n and freq >= threshold),
    }


def verify_anchors(
    cell: CellSpec,
    seed: int,
    trials: int | None = None,
    rounds: int | None = None,
    offsets: tuple[int, ...] = (1, 2),
) -> dict:
    """Anchor separation on the true sequences: aligned windows above
    gamma + 4*beta, misaligned windows below delta, with zero exceptions."""
    n = cell.trials if trials is None else trials
    config = cell.config()
    params = cell.params()
    checks = vacuous = aligned_failures = misaligned_failures = 0
    aligned_count = misaligned_count = 0
    min_aligned: float | None = None
    max_misaligned: float | None = None
    indels = cell.p_del > 0 or cell.p_ins > 0
    for t in range(n):
        tree = evolve_tree(params, trial_seed(seed, cell.label, t))
        # The separation claim speaks about stable parents only.
        report = classify_stability(tree, config) if indels else None
        stats = anchor_correlation_stats(
            tree, config, rounds=rounds, offsets=offsets, report=report
        )
        checks += stats.checks
        vacuous += stats.vacuous
        aligned_failures += stats.aligned_failures
        misaligned_failures += stats.misaligned_failures
        aligned_count += int(stats.aligned.shape[0])
        misaligned_count += int(stats.misaligned.shape[0])
        if stats.aligned.size:
            v = stats.min_aligned
            min_aligned = v if min_aligned is None else min(min_aligned, v)
        if stats.misaligned.size:
            v = stats.max_misaligned
            max_misaligned = v if max_misaligned is None else max(max_misaligned, v)
    return {
        "lemma": "anchors",
        "cell": cell.label,
        "trials": n,
        "checks": checks,
        "aligned_count": aligned_count,
        "misaligned_count": misaligned_count,
        "vacuous": vacuous,
        "aligned_failures": aligned_failures,
        "misaligned_failures": misaligned_failures,
        "aligned_threshold": config.gamma + 4.0 * config.beta,
        "misaligned_threshold": config.delta,
        "min_aligned": min_aligned,
        "max_misaligned": max_misaligned,
        "pass": bool(checks and aligned_failures == 0 and misaligned_failures == 0),
    }


def exact_majority_game(
    arity: int, height: int, p_sub: float, adversaries: int = 2
) -> float:
    """Exact success probability of the stylized majority game.

    u_h(s) is the chance a height-h honest subtree whose own state is s
    evaluates to 1; each level mixes the children's states through the
    substitution channel and thresholds a binomial count against the
    majority line, with the adversary votes added for free.
    """
    honest = arity - adversaries
    if honest < 1:
        raise ValueError("need at least one honest child per node")
    need = (arity + 1) // 2 - adversaries
    u0, u1 = 0.0, 1.0
    for _ in range(height):
        q0 = (1.0 - p_sub) * u0 + p_sub * u1
        q1 = (1.0 - p_sub) * u1 + p_sub * u0
        u0 = float(binom.sf(need - 1, honest, q0))
        u1 = float(binom.sf(need - 1, honest, q1))
    return 1.0 - u0


def verify_majority(
    seed: int,
    arities: tuple[int, ...] = (5, 7, 9),
    p_subs: tuple[float, ...] = (0.05, 0.1, 0.2),
    draws: int = 100_000,
    height: int = 1,
    adversaries: int = 2,
) -> dict:
    """Simulated game win rate against the exact recursion, per combo.

    Each combo must land within three binomial sigmas of its exact
    value (exactly on it when the exact value is degenerate).
    """
    combos = []
    ok_all = True
    for d in arities:
        for p in p_subs:
            exact = exact_majority_game(d, height, p, adversaries)
            rng = substream(seed, TAG_GAME, string_tag(f"{d}:{p}:{height}"))
            wins = simulate_adversarial_majority(
                d, height, p, rng, adversaries=adversaries, draws=draws
            )
            emp = float(np.mean(wins))
            sigma = math.sqrt(exact * (1.0 - exact) / draws)
            ok = abs(emp - exact) <= 3.0 * sigma if sigma > 0 else emp == exact
            ok_all = ok_all and ok
            combos.append(
                {
                    "arity": d,
                    "p_sub": p,
                    "exact": exact,
                    "empirical": emp,
                    "sigma": sigma,
                    "pass": bool(ok),
                }
            )
    return {
        "lemma": "majority",
        "height": height,
        "draws": draws,
        "adversaries": adversaries,
        "combos": combos,
        "pass": bool(ok_all),
    }


def verify_bias(cell: CellSpec, seed: int, trials: int | None = None) -> dict:
    """Agreement-window coin statistics within beta/2 on stable trees."""
    n = cell.trials if trials is None else trials
    config = cell.config()
    params = cell.params()
    r_max = math.ceil((1.0 + cell.zeta) * cell.seq_len / config.island_len)
    r_vec = np.arange(1, r_max + 1, dtype=np.int64)
    checks = failures = vacuous = stable_trials = 0
    max_residual: float | None = None
    beta_prime_max: float | None = None
    for t in range(n):
        s = trial_seed(seed, cell.label, t)
        tree = evolve_tree(params, s)
        report = classify_stability(tree, config)
        subtree = extract_stable_subtree(report, s)
        if subtree is None:
            continue
        stable_trials += 1
        scan = bias_window_events(tree, config, report, subtree, s, r_vec)
        checks += scan.checks
        failures += scan.failures
        vacuous += scan.vacuous
        if math.isfinite(scan.max_residual):
            max_residual = (
                scan.max_residual
                if max_residual is None
                else max(max_residual, scan.max_residual)
            )
        if math.isfinite(scan.beta_prime_max):
            beta_prime_max = (
                scan.beta_prime_max
                if beta_prime_max is None
                else max(beta_prime_max, scan.beta_prime_max)
            )
    return {
        "lemma": "bias",
        "cell": cell.label,
        "trials": n,
        "stable_trials": stable_trials,
        "checks": checks,
        "failures": failures,
        "vacuous": vacuous,
        "max_residual": max_residual,
        "beta_prime_max": beta_prime_max,
        "tolerance": config.beta / 2.0,
        "pass": bool(checks and failures == 0),
    }


def verify_domination(cell: CellSpec, seed: int, trials: int | None = None) -> dict:
    """On trials where the good event holds, the engine is right at
    every site the adversarial benchmark gets right. Vacuously true
    when no trial lands in the event; the counts expose that."""
    n = cell.trials if trials is None else trials
    cell = replace(cell, certify=True, run_adversary=True)
    config = cell.config()
    event_trials = violations = 0
    for t in range(n):
        rec = run_trial(cell, config, t, trial_seed(seed, cell.label, t))
        if rec.event_ok:
            event_trials += 1
            if rec.domination_ok is False:
                violations += 1
    return {
        "lemma": "domination",
        "cell": cell.label,
        "trials": n,
        "event_trials": event_trials,
        "violations": violations,
        "vacuous": event_trials == 0,
        "pass": violations == 0,
    }


def _default_cell(spec: ExperimentSpec) -> CellSpec:
    for c in spec.cells:
        if c.p_del > 0 or c.p_ins > 0:
            return c
    return spec.cells[0]


def _wired_cell(spec: ExperimentSpec, name: str) -> CellSpec:
    label = spec.extras.get("verify_cells", {}).get(name)
    if label is not None:
        return spec.cell(label)
    if name == "domination":
        for c in spec.cells:
            if c.certify and c.run_adversary:
                return c
        raise ValueError(
            "domination needs a cell with certify and run_adversary, or an "
            "extras.verify_cells entry"
        )
    return _default_cell(spec)


def _anchor_args(spec: ExperimentSpec) -> tuple[CellSpec, int | None]:
    block = spec.extras.get("anchor_separation")
    if block is None:
        return _default_cell(spec), None
    data = dict(block)
    data.setdefault("label", "anchor_separation")
    rounds = data.get("rounds")
    return CellSpec.from_dict(data), None if rounds is None else int(rounds)


def verify_lemmas(
    spec: ExperimentSpec,
    lemma: str = "all",
    trials: int | None = None,
    seed: int | None = None,
) -> dict:
    """Run one verifier, or all of them, against an experiment spec.

    Cells are chosen via spec.extras["verify_cells"] when present, with
    sensible fallbacks otherwise. For the majority game, trials
    overrides the number of simulation draws.
    """
    if lemma != "all" and lemma not in LEMMA_NAMES:
        raise ValueError(f"unknown lemma {lemma!r}; pick from {LEMMA_NAMES} or 'all'")
    chosen = LEMMA_NAMES if lemma == "all" else (lemma,)
    master = spec.seed if seed is None else seed
    results: dict[str, dict] = {}
    overall = True
    for name in chosen:
        try:
            if name == "majority":
                block = spec.extras.get("majority_game", {})
                results[name] = verify_majority(
                    master,
                    arities=tuple(block.get("arities", (5, 7, 9))),
                    p_subs=tuple(block.get("p_subs", (0.05, 0.1, 0.2))),
                    draws=int(block.get("draws", 100_000)) if trials is None else trials,
                    height=int(block.get("height", 1)),
                    adversaries=int(block.get("adversaries", 2)),
                )
            elif name == "anchors":
                cell, rounds = _anchor_args(spec)
                results[name] = verify_anchors(cell, master, trials=trials, rounds=rounds)
            elif name == "length":
                results[name] = verify_length(_wired_cell(spec, name), master, trials=trials)
            elif name == "radioactivity":
                results[name] = verify_radioactivity(
                    _wired_cell(spec, name), master, trials=trials
                )
            elif name == "stable":
                results[name] = verify_stable(_wired_cell(spec, name), master, trials=trials)
            elif name == "bias":
                results[name] = verify_bias(_wired_cell(spec, name), master, trials=trials)
            else:
                results[name] = verify_domination(
                    _wired_cell(spec, name), master, trials=trials
                )
        except (InfeasibleParametersError, ValueError) as exc:
            results[name] = {"lemma": name, "error": str(exc), "pass": False}
        overall = overall and results[name]["pass"]
    return {"seed": master, "lemmas": results, "pass": overall}
