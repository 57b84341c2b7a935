"""Accuracy metrics, similarity matrices, sweeps and reports.

Modules:
    acceptance  -- floor checks and tables for experiment runs
    metrics     -- accuracy, accuracy_from_logits, direct_ensemble_accuracy
    stats       -- AggregateStats
    reports     -- JSON report files, timestamp-free comparison, markdown tables
    similarity  -- SimilarityMatrix, similarity_matrix, heat images
    sweep       -- budget / position sweeps (import as ``evaluation.sweep``;
                   it runs the clone pipeline)
"""

from evaluation.acceptance import acceptance_table, check_floors, log_acceptance
from evaluation.metrics import accuracy, accuracy_from_logits, direct_ensemble_accuracy
from evaluation.reports import read_report, report_json, reports_match, strip_volatile, write_report
from evaluation.similarity import SimilarityMatrix, locality_matrices, similarity_matrix, write_heat_image
from evaluation.stats import AggregateStats

__all__ = [
    "AggregateStats",
    "SimilarityMatrix",
    "acceptance_table",
    "accuracy",
    "accuracy_from_logits",
    "check_floors",
    "direct_ensemble_accuracy",
    "locality_matrices",
    "log_acceptance",
    "read_report",
    "report_json",
    "reports_match",
    "similarity_matrix",
    "strip_volatile",
    "write_heat_image",
    "write_report",
]
