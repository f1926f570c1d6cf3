"""Experiment cells: evolve trees, reconstruct roots, collect records."""

from __future__ import annotations

import json
import time
from collections import Counter
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from ..evolution import ModelParams, evolve_tree, length_stats
from ..oracle import (
    adversarial_reconstruct,
    certify_event_E,
    classify_stability,
    extract_stable_subtree,
    gateway_masks,
    stable_subtree_bound,
    true_shifts,
)
from ..recon import (
    InfeasibleParametersError,
    ReconConfig,
    derive_config,
    reconstruct_root,
)
from ..rng import TAG_TRIAL, derive_seed, string_tag
from .report import wilson_ci


@dataclass
class CellSpec:
    """One parameter cell of an experiment grid.

    beta, delta, and anchor_len default to the derived values; setting
    them pins the reconstruction thresholds for that cell. alpha is the
    per-node radioactivity budget the cell is graded against (defaults
    to epsilon/arity) and zeta the relative length band, both used by
    verifiers and certificates rather than by the reconstruction itself.
    """

    label: str
    arity: int
    height: int
    seq_len: int
    p_sub: float = 0.0
    p_del: float = 0.0
    p_ins: float = 0.0
    trials: int = 1
    anchor_scale: float = 8.0
    beta: float | None = None
    delta: float | None = None
    anchor_len: int | None = None
    alpha: float | None = None
    epsilon: float = 0.5
    zeta: float = 0.1
    run_adversary: bool = False
    certify: bool = False
    max_seconds: float | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "CellSpec":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        if "p_id" in data and "p_del" not in data and "p_ins" not in data:
            kwargs["p_del"] = kwargs["p_ins"] = float(data["p_id"]) / 2.0
        return cls(**kwargs)

    def alpha_budget(self) -> float:
        return self.epsilon / self.arity if self.alpha is None else self.alpha

    def params(self) -> ModelParams:
        return ModelParams(
            arity=self.arity,
            height=self.height,
            seq_len=self.seq_len,
            p_sub=self.p_sub,
            p_del=self.p_del,
            p_ins=self.p_ins,
        )

    def config(self) -> ReconConfig:
        cfg = derive_config(
            self.params(),
            anchor_scale=self.anchor_scale,
            beta=self.beta,
            delta=self.delta,
        )
        if self.anchor_len is not None:
            cfg = replace(cfg, anchor_len=self.anchor_len)
        return cfg


@dataclass
class TrialRecord:
    """Flat, serializable outcome of one evolve-and-reconstruct trial.

    The optional fields stay None unless the cell asked for the
    corresponding extra work (certify, run_adversary).
    """

    cell: str
    trial: int
    seed: int
    length_ok: bool
    stable_ok: bool
    recon_agreement: float
    radioactive_oracle: int
    radioactive_algo: int
    root_radioactive: bool
    raw_len: int
    padded: int
    truncated: int
    event_ok: bool | None = None
    first_failure: str | None = None
    shifts_exact: bool | None = None
    adversary_agreement: float | None = None
    domination_ok: bool | None = None


def _shifts_exact(tree, config, result, subtree) -> bool:
    """Compare the engine's running shifts against the true alignment.

    For every internal subtree node, each completed round's post-round
    shift estimate must equal the child position of the round's anchor
    start minus the anchor start itself; rounds whose anchor start is
    deleted or out of range on some edge are skipped for that edge.
    """
    ell = config.island_len
    for level, index, flat in subtree.internal_nodes():
        nr = result.node_results[flat]
        completed = len(nr.shift_history) - 1
        if completed <= 0:
            continue
        r_vec = np.arange(1, completed + 1, dtype=np.int64)
        truth, valid = true_shifts(tree, level, index, ell * r_vec)
        est = np.array(nr.shift_history[1:], dtype=np.int64).T
        if np.any(valid & (est != truth)):
            return False
    return True


def run_trial(cell: CellSpec, config: ReconConfig, trial: int, seed: int) -> TrialRecord:
    """Evolve one tree, reconstruct its root, and grade the outcome."""
    tree = evolve_tree(cell.params(), seed)
    root_bits = tree.root.bits
    stats = length_stats(tree, cell.zeta)
    report = classify_stability(tree, config)
    subtree = extract_stable_subtree(report, seed)
    recon = reconstruct_root(tree.leaves(), config, seed, keep_nodes=cell.certify)
    rec = TrialRecord(
        cell=cell.label,
        trial=trial,
        seed=seed,
        length_ok=stats.within_bounds,
        stable_ok=subtree is not None,
        recon_agreement=float(np.mean(recon.bits == root_bits)),
        radioactive_oracle=report.radioactive_internal,
        radioactive_algo=recon.radioactive_count,
        root_radioactive=recon.root_radioactive,
        raw_len=recon.raw_len,
        padded=recon.padded,
        truncated=recon.truncated,
    )
    if cell.run_adversary and subtree is not None:
        masks = gateway_masks(tree, report, subtree, seed)
        _, lam = adversarial_reconstruct(tree, masks)
        rec.adversary_agreement = float(lam.mean())
        # Domination: wherever the benchmark got the site right, the
        # engine must have gotten it right too.
        correct = recon.bits == root_bits
        rec.domination_ok = bool(np.all(correct | (lam == 0)))
    if cell.certify:
        cert = certify_event_E(tree, config, seed, zeta=cell.zeta)
        rec.event_ok = cert.holds
        rec.first_failure = cert.first_failure
        if cert.holds:
            rec.shifts_exact = _shifts_exact(tree, config, recon, cert.subtree)
    return rec


@dataclass
class ExperimentSpec:
    """A named grid of cells driven from one master seed.

    extras carries verifier-only blocks (anchor statistics windows, the
    majority game grid, lemma-to-cell wiring) that are not cells.
    """

    name: str
    seed: int
    cells: list[CellSpec]
    threads: int = 1
    out_dir: str | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(
            name=str(data["name"]),
            seed=int(data["seed"]),
            cells=[CellSpec.from_dict(c) for c in data["cells"]],
            threads=int(data.get("threads", 1)),
            out_dir=data.get("out_dir"),
            extras=dict(data.get("extras", {})),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def cell(self, label: str) -> CellSpec:
        for c in self.cells:
            if c.label == label:
                return c
        raise KeyError(f"no cell labeled {label!r}")


@dataclass
class ExperimentResult:
    """Everything a run produced: records, wall times, and the summary."""

    spec: ExperimentSpec
    records: list[TrialRecord]
    timings: list[tuple[str, int, float]]
    summary: dict


def trial_seed(master_seed: int, label: str, trial: int) -> int:
    """The per-trial seed; verifiers reuse this to replay exact trees."""
    return derive_seed(master_seed, TAG_TRIAL, string_tag(label), trial)


def _timed_trial(cell, config, trial, seed):
    start = time.perf_counter()
    rec = run_trial(cell, config, trial, seed)
    return rec, time.perf_counter() - start


def _run_cell(cell, config, master_seed, workers):
    seeds = [trial_seed(master_seed, cell.label, t) for t in range(cell.trials)]
    records: list[TrialRecord] = []
    timings: list[tuple[str, int, float]] = []
    partial = False
    started = time.perf_counter()
    if workers <= 1:
        for t, s in enumerate(seeds):
            if (
                cell.max_seconds is not None
                and records
                and time.perf_counter() - started > cell.max_seconds
            ):
                partial = True
                break
            rec, secs = _timed_trial(cell, config, t, s)
            records.append(rec)
            timings.append((cell.label, t, secs))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pending = {
                pool.submit(_timed_trial, cell, config, t, s)
                for t, s in enumerate(seeds)
            }
            overdue = False
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    if fut.cancelled():
                        continue
                    rec, secs = fut.result()
                    records.append(rec)
                    timings.append((cell.label, rec.trial, secs))
                if (
                    not overdue
                    and cell.max_seconds is not None
                    and time.perf_counter() - started > cell.max_seconds
                ):
                    overdue = True
                    for fut in pending:
                        if fut.cancel():
                            partial = True
                    pending = {f for f in pending if not f.cancelled()}
    records.sort(key=lambda r: r.trial)
    timings.sort(key=lambda t: t[1])
    return records, timings, partial


def _freq(values) -> float | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return sum(1 for v in vals if v) / len(vals)


def _summarize_cell(cell: CellSpec, config: ReconConfig, records, partial: bool) -> dict:
    d, h = cell.arity, cell.height
    info: dict[str, Any] = {
        "feasible": True,
        "trials": len(records),
        "requested_trials": cell.trials,
        "partial": partial,
        "config": {
            "arity": config.arity,
            "height": config.height,
            "seq_len": config.seq_len,
            "island_len": config.island_len,
            "anchor_len": config.anchor_len,
            "gamma": config.gamma,
            "delta": config.delta,
            "beta": config.beta,
        },
    }
    if not records:
        return info
    n = len(records)
    info["length_freq"] = _freq(r.length_ok for r in records)
    stable_count = sum(1 for r in records if r.stable_ok)
    info["stable_freq"] = stable_count / n
    info["unstable_freq"] = 1.0 - stable_count / n
    lo, hi = wilson_ci(stable_count, n, z=3.0)
    info["stable_wilson_lower"] = lo
    info["stable_wilson_upper"] = hi
    info["event_freq"] = _freq(r.event_ok for r in records)
    failures = Counter(
        r.first_failure for r in records if r.first_failure is not None
    )
    info["first_failure_counts"] = dict(sorted(failures.items()))
    agreements = [r.recon_agreement for r in records]
    info["recon_agreement_mean"] = sum(agreements) / n
    info["recon_agreement_min"] = min(agreements)
    adv = [r.adversary_agreement for r in records if r.adversary_agreement is not None]
    info["adversary_agreement_mean"] = sum(adv) / len(adv) if adv else None
    dom = [r.domination_ok for r in records if r.domination_ok is not None]
    info["domination_checked"] = len(dom)
    info["domination_violations"] = sum(1 for v in dom if not v)
    info["shifts_exact_freq"] = _freq(
        r.shifts_exact for r in records if r.event_ok
    )
    internal_per_tree = (d**h - 1) // (d - 1) if h > 0 else 0
    internal_total = internal_per_tree * n
    radioactive_total = sum(r.radioactive_oracle for r in records)
    lo, hi = wilson_ci(radioactive_total, internal_total, z=3.0)
    alpha_hat = radioactive_total / internal_total if internal_total else 0.0
    info["radioactivity"] = {
        "internal_nodes": internal_total,
        "radioactive": radioactive_total,
        "alpha_hat": alpha_hat,
        "wilson_lower": lo,
        "wilson_upper": hi,
        "alpha_budget": cell.alpha_budget(),
    }
    info["stable_bound_alpha_hat"] = (
        stable_subtree_bound(alpha_hat, d, h) if h > 0 else 1.0
    )
    info["radioactive_algo_total"] = sum(r.radioactive_algo for r in records)
    info["root_radioactive_count"] = sum(1 for r in records if r.root_radioactive)
    info["padded_total"] = sum(r.padded for r in records)
    info["truncated_total"] = sum(r.truncated for r in records)
    return info


def run_experiment(spec: ExperimentSpec, threads: int | None = None) -> ExperimentResult:
    """Run every cell of the grid and assemble the summary.

    Infeasible cells (no positive bias budget survives the requested
    beta) are reported as such rather than raising. Thread count does
    not affect records or summary, only wall time; timings land in a
    separate sidecar so reports stay byte-stable across runs.
    """
    workers = spec.threads if threads is None else threads
    records: list[TrialRecord] = []
    timings: list[tuple[str, int, float]] = []
    cells: dict[str, dict] = {}
    for cell in spec.cells:
        try:
            config = cell.config()
        except InfeasibleParametersError as exc:
            cells[cell.label] = {
                "feasible": False,
                "reason": str(exc),
                "trials": 0,
                "requested_trials": cell.trials,
            }
            continue
        cell_records, cell_timings, partial = _run_cell(cell, config, spec.seed, workers)
        records.extend(cell_records)
        timings.extend(cell_timings)
        cells[cell.label] = _summarize_cell(cell, config, cell_records, partial)
    summary = {
        "schema_version": 1,
        "name": spec.name,
        "seed": spec.seed,
        "cells": cells,
    }
    return ExperimentResult(spec=spec, records=records, timings=timings, summary=summary)
