"""Experiment configuration, execution protocol, and reporting."""

from wattrec.harness.config import DatasetConfig, ExperimentConfig
from wattrec.harness.runner import ExperimentRecord, prepare_split, run_experiment, run_suite
from wattrec.harness.reports import load_records, report_comparison, report_efficiency

__all__ = [
    "DatasetConfig",
    "ExperimentConfig",
    "ExperimentRecord",
    "prepare_split",
    "run_experiment",
    "run_suite",
    "load_records",
    "report_comparison",
    "report_efficiency",
]
