"""Unimodal output distributions for ordinal classification."""

from .estimator import UnimodalOrdinalClassifier
from .methods import METHOD_NAMES, LossSpec
from .simplex import (
    is_unimodal,
    is_unimodal_with_mode,
    modes,
    unimodal_fraction,
    unimodal_fraction_exact,
)
from .transport import CostMatrix, project_unimodal, wasserstein_distance

__all__ = [
    "CostMatrix",
    "LossSpec",
    "METHOD_NAMES",
    "UnimodalOrdinalClassifier",
    "is_unimodal",
    "is_unimodal_with_mode",
    "modes",
    "project_unimodal",
    "unimodal_fraction",
    "unimodal_fraction_exact",
    "wasserstein_distance",
]

__version__ = "0.1.0"
