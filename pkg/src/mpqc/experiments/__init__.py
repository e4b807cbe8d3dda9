"""Config-driven experiment harness: bundled configs, runner, logs and plots."""

from .config import ExperimentSpec, bundled_names, parse_spec, read_config
from .gradcheck import check_gradients
from .runner import (ExperimentResult, RunSummary, compare_qoc_vs_mpqc, evaluate_acceptance,
                     run_experiment)

__all__ = [
    "ExperimentResult", "ExperimentSpec", "RunSummary", "bundled_names", "check_gradients",
    "compare_qoc_vs_mpqc", "evaluate_acceptance", "parse_spec", "read_config", "run_experiment",
]
