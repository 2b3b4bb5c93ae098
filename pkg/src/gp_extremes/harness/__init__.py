"""Configuration, scenario runner, plotting and command line."""

from .config import ExperimentConfig, parse_config
from .runner import ReportSummary, run_scenario
from .svg import emit_svg

__all__ = ["ExperimentConfig", "parse_config", "ReportSummary", "run_scenario", "emit_svg"]
