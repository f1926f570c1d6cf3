"""Batch experiment runner, report emission, and lemma verifiers."""

from .experiment import (
    CellSpec,
    ExperimentResult,
    ExperimentSpec,
    TrialRecord,
    run_experiment,
    run_trial,
    trial_seed,
)
from .report import (
    emit_report,
    read_records,
    records_csv_text,
    summary_json_text,
    timings_csv_text,
    wilson_ci,
)
from .verifiers import (
    LEMMA_NAMES,
    exact_majority_game,
    verify_anchors,
    verify_bias,
    verify_domination,
    verify_lemmas,
    verify_length,
    verify_majority,
    verify_radioactivity,
    verify_stable,
)

__all__ = [
    "CellSpec",
    "ExperimentResult",
    "ExperimentSpec",
    "LEMMA_NAMES",
    "TrialRecord",
    "emit_report",
    "exact_majority_game",
    "read_records",
    "records_csv_text",
    "run_experiment",
    "run_trial",
    "summary_json_text",
    "timings_csv_text",
    "trial_seed",
    "verify_anchors",
    "verify_bias",
    "verify_domination",
    "verify_lemmas",
    "verify_length",
    "verify_majority",
    "verify_radioactivity",
    "verify_stable",
    "wilson_ci",
]
