"""Adaptive sparse polynomial interpolation for parametric kinetic equations."""

from .drivers import RandomPoolDriver, SurplusGreedyDriver, ResidualGreedyDriver
from .fields import ParametricFieldSpec
from .harness import ExperimentConfig, best_n_oracle, mc_error, run_experiment, slope_fit
from .interp import HierarchicalInterpolant
from .leja import LejaSequence, UnivariateBasis, lebesgue_constant
from .multi_index import IndexSet, MultiIndex, is_downward_closed
from .vfp import PhaseField, PhaseGrid, VfpModel

__all__ = [
    "RandomPoolDriver", "SurplusGreedyDriver", "ResidualGreedyDriver",
    "ParametricFieldSpec",
    "ExperimentConfig", "best_n_oracle", "mc_error", "run_experiment", "slope_fit",
    "HierarchicalInterpolant",
    "LejaSequence", "UnivariateBasis", "lebesgue_constant",
    "IndexSet", "MultiIndex", "is_downward_closed",
    "PhaseField", "PhaseGrid", "VfpModel",
]

__version__ = "0.1.0"
