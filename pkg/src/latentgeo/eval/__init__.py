"""Triplet-based evaluation of latent interpolation and the experiment harnesses built on it."""

from .harness import (
    CellResult,
    ExperimentConfig,
    label_budget_study,
    posterior_mean_sv_ratio,
    reports_of,
    run_cell,
    run_iat_experiment,
    sweep_rank_dim,
)
from .pipeline import (
    MetricReport,
    TripletResult,
    aggregate,
    evaluate_suite,
    evaluate_triplet,
    evaluate_triplets,
    median_over_seeds,
    sample_triplets,
)
from .report import export_report, load_report, read_raw, write_raw, write_reports
