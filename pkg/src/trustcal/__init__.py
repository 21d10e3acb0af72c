"""Simulation-based calibration of confidence-set cutoffs.

Cutoffs for a test statistic are estimated locally in parameter space,
either within the leaves of a regression tree (TRUST) or within
proximity neighborhoods of a random forest (TRUST++). The package also
handles nuisance parameters, quantifies cutoff uncertainty, provides the
Monte Carlo, asymptotic and oracle reference cutoffs, and includes a
coverage-evaluation harness.
"""

from .calibration import (
    AdjustedEcdf,
    CalibratedCutoffs,
    ConfidenceReport,
    TrustCalibrator,
    adjusted_cdf,
    adjusted_quantile,
    confidence_set,
    intervals_1d,
    p_value,
    trust_cutoffs,
    trustpp_cutoffs,
)
from .forest import EmptyNeighborhood, Forest, ForestParams, TrustPPCalibrator, fit_forest, tune_m
from .models import MODEL_REGISTRY, ModelSpec, make_model
from .nuisance import NuisanceGrid, build_nuisance_grid, nuisance_cutoff
from .statistics import PosteriorEngine, StatisticSpec, make_statistic
from .tree import RegressionTree, TreeParams, fit_tree
from .uncertainty import InsufficientNeighborhood, quantile_ci, three_way

__version__ = "0.1.0"

__all__ = [
    "AdjustedEcdf",
    "CalibratedCutoffs",
    "ConfidenceReport",
    "EmptyNeighborhood",
    "Forest",
    "ForestParams",
    "InsufficientNeighborhood",
    "MODEL_REGISTRY",
    "ModelSpec",
    "NuisanceGrid",
    "PosteriorEngine",
    "RegressionTree",
    "StatisticSpec",
    "TreeParams",
    "TrustCalibrator",
    "TrustPPCalibrator",
    "adjusted_cdf",
    "adjusted_quantile",
    "build_nuisance_grid",
    "confidence_set",
    "fit_forest",
    "fit_tree",
    "intervals_1d",
    "make_model",
    "make_statistic",
    "nuisance_cutoff",
    "p_value",
    "quantile_ci",
    "three_way",
    "trust_cutoffs",
    "trustpp_cutoffs",
    "tune_m",
]
