"""Simulation harness: configs, replication loop, tables and CLI."""

from .config import ExperimentConfig, config_from_dict, load_config, preset
from .experiment import analyze, match_mfdr, run_experiment
from .tables import ResultsTable, render_table

__all__ = [
    "ExperimentConfig",
    "ResultsTable",
    "analyze",
    "config_from_dict",
    "load_config",
    "match_mfdr",
    "preset",
    "render_table",
    "run_experiment",
]
