"""Joint hierarchical-decomposition priors for variance parameters.

Build a tree over the random effects of an additive model, put PC or
Dirichlet priors on the split weights and a total-variance prior on top,
and get one proper joint prior with calibrated hyperparameters, density
evaluation in both coordinate systems, reproducible sampling, and export
tables for external MCMC tooling.
"""

from .errors import (
    BracketingError,
    CalibrationError,
    HDPriorError,
    ImproperPriorError,
    NumericalError,
    RankDeficiencyError,
    ValidationError,
)
from .hd_model import HDPriorModel, assemble, log_density_variances, log_density_weights, marginal_report, sample
from .model_file import ModelFile, parse_model, parse_model_dict, serialize
from .numerics import RandomSource

__version__ = "1.0.0"

__all__ = [
    "BracketingError",
    "CalibrationError",
    "HDPriorError",
    "HDPriorModel",
    "ImproperPriorError",
    "ModelFile",
    "NumericalError",
    "RandomSource",
    "RankDeficiencyError",
    "ValidationError",
    "assemble",
    "log_density_variances",
    "log_density_weights",
    "marginal_report",
    "parse_model",
    "parse_model_dict",
    "sample",
    "serialize",
]
