"""Experiment harness: configuration, orchestration, reports and the CLI."""

from .cli import run_cli
from .config import ConfigError, ExperimentConfig
from .report import COLUMNS, ReportRow, emit_report

__all__ = ["COLUMNS", "ConfigError", "ExperimentConfig", "ReportRow", "emit_report", "run_cli"]
