"""Experiment configs, canned experiments, CSV output and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config, save_config
from .registry import NOISE_SWEEP_THRESHOLDS, get_experiment, list_experiments
from .runner import ExperimentResult, run_experiment
from .tables import emit_bound_tables, emit_bound_validation
