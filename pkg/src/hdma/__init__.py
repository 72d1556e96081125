"""High-dimensional model averaging via J-fold cross-validation.

Modules
-------
data
    Datasets, CSV I/O, standardization and fold assignment.
loss
    Squared and logistic losses with derivatives.
solver
    Weighted-Lasso coordinate descent, IRLS, LLA for SCAD/MCP, lambda CV.
candidates
    Covariate ranking and the nested plus non-nested candidate set.
weights
    The CV criterion over the simplex, FGMA and GMA solvers.
pipeline
    End-to-end fitting (:func:`fit_hdma`).
inference
    CLIME, debiasing and multiplier-bootstrap simultaneous intervals.
sim
    Simulation designs and the replication harness.
"""

from ._kernels import BACKEND, BACKENDS, get_kernel, set_backend
from .data import Dataset, load_csv, make_folds, standardize
from .errors import ConfigError, ConvergenceWarning, DataError, HDMAError, NumericalError
from .inference import post_average_inference
from .loss import LossKind
from .pipeline import HDMAConfig, HDMAModel, fit_hdma
from .solver import LASSO, MCP, SCAD, PenaltyKind
from .weights import FgmaConfig, fgma_solve, gma_solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BACKENDS", "get_kernel", "set_backend",
    "Dataset", "load_csv", "make_folds", "standardize",
    "ConfigError", "ConvergenceWarning", "DataError", "HDMAError", "NumericalError",
    "post_average_inference", "LossKind", "HDMAConfig", "HDMAModel", "fit_hdma",
    "LASSO", "MCP", "SCAD", "PenaltyKind", "FgmaConfig", "fgma_solve", "gma_solve",
]
