"""
Experiment registry: name -> run function taking an ExperimentContext
"""
from typing import Callable, Dict

from margin_paths.experiments.base import (
    Check,
    ExperimentContext,
    ExperimentResult,
)
from margin_paths.experiments.ensembles import run_ensemble_discard, run_svm_bias
from margin_paths.experiments.gap import run_homog_rate, run_margin_gap
from margin_paths.experiments.lexicographic import run_lexicographic
from margin_paths.experiments.log_family import run_log_predictor, run_powerlog_predictor
from margin_paths.experiments.optimization import run_optimization_alignment
from margin_paths.experiments.regularization import run_pareto_check, run_regularization_link

REGISTRY: Dict[str, Callable[[ExperimentContext], ExperimentResult]] = {
    "margin_gap": run_margin_gap,
    "homog_rate": run_homog_rate,
    "log_predictor": run_log_predictor,
    "powerlog_predictor": run_powerlog_predictor,
    "ensemble_discard": run_ensemble_discard,
    "svm_bias": run_svm_bias,
    "lexicographic": run_lexicographic,
    "optimization_alignment": run_optimization_alignment,
    "regularization_link": run_regularization_link,
    "pareto_check": run_pareto_check,
}

__all__ = ["Check", "ExperimentContext", "ExperimentResult", "REGISTRY"]
