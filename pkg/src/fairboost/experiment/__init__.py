"""Experiment grid: configuration, execution and reporting."""

from .config import DatasetConfig, ExperimentConfig, config_from_dict, load_config
from .report import FORMATS, ReportError, emit_report
from .runner import (
    CellResult,
    Pipeline,
    attach_comparisons,
    results_to_dict,
    run_cell,
    run_grid,
)

__all__ = [
    "CellResult", "DatasetConfig", "ExperimentConfig", "FORMATS", "Pipeline", "ReportError",
    "attach_comparisons", "config_from_dict", "emit_report", "load_config", "results_to_dict",
    "run_cell", "run_grid",
]
