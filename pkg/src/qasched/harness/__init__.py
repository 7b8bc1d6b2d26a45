"""Experiment orchestration: dataset generation, training, evaluation,
schedule comparisons, and report/figure emission."""

from .experiments import (
    ExperimentSpec,
    compare_schedules,
    desk_spec,
    generate_dataset,
    generate_records,
    experiment_anneal_compare,
    experiment_extrapolate_chains,
    experiment_extrapolate_cliques,
    experiment_same_size,
    experiment_symmetry,
    model_predictor,
    oracle_predictor,
)
from .reports import Histogram, Report, emit_report, make_histogram, summary_stats

__all__ = [
    "ExperimentSpec",
    "Histogram",
    "Report",
    "compare_schedules",
    "desk_spec",
    "emit_report",
    "experiment_anneal_compare",
    "experiment_extrapolate_chains",
    "experiment_extrapolate_cliques",
    "experiment_same_size",
    "experiment_symmetry",
    "generate_dataset",
    "generate_records",
    "make_histogram",
    "model_predictor",
    "oracle_predictor",
    "summary_stats",
]
