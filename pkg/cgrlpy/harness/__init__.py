"""Define the experiment harness: configuration, runs, metrics and exports."""
from .config import ExperimentConfig, load_config  # noqa
from .runner import run_eval, run_training  # noqa
