"""Univariate Penalization for Testing (UPT) in sparse linear regression.

Screen predictors by their marginal statistics, split the survivors along the
thresholded Gram graph, and clean each small component with an exhaustive
L0-penalized search.  BH/BY baselines, an exact small-p oracle and a
simulation harness ship alongside.
"""

__version__ = "0.1.0"

from .baselines import bh, by, marginal_pvalues
from .core import clean_component, upt_decide
from .covmodel import CovarianceSpec, build_covariance, check_matrix_class, compute_eta, factorize
from .decisions import DecisionVector
from .gram_graph import marginal_stats, restricted_gram, screen
from .metrics import aggregate, confusion
from .tuning import TuningParams, data_driven_params, estimate_theta_r, ideal_params

__all__ = [
    "CovarianceSpec",
    "DecisionVector",
    "TuningParams",
    "aggregate",
    "bh",
    "build_covariance",
    "by",
    "check_matrix_class",
    "clean_component",
    "compute_eta",
    "confusion",
    "data_driven_params",
    "estimate_theta_r",
    "factorize",
    "ideal_params",
    "marginal_pvalues",
    "marginal_stats",
    "restricted_gram",
    "screen",
    "upt_decide",
]
