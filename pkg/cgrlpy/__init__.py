"""Define module-level imports."""
from .harness import ExperimentConfig, load_config, run_eval, run_training  # noqa
