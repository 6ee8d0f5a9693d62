"""Experiment catalog, config parsing, run persistence and the command line."""

from .catalog import catalog, catalog_names, lookup
from .checks import CheckResult, available_checks
from .config import ExperimentConfig, load_config
from .runner import RunRecord, VerifyReport, load_run, run, verify

__all__ = [
    "CheckResult",
    "ExperimentConfig",
    "RunRecord",
    "VerifyReport",
    "available_checks",
    "catalog",
    "catalog_names",
    "load_config",
    "load_run",
    "lookup",
    "run",
    "verify",
]
