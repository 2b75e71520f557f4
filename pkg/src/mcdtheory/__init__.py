"""Minimum Covariance Determinant estimation and its asymptotic theory."""

__version__ = "0.1.0"

from .core import TangentVector, ThetaParams, commutation_matrix, kron, vec, unvec
from .elliptical import (EllipticalConstants, d_inv_map, d_map, elliptical_constants,
                         influence, influence_general)
from .errors import (BadBandwidth, BadFraction, BoundaryUndefined, DegenerateMatrix,
                     DegenerateSample, DegenerateSubset, McdError, QuadratureError,
                     SingularDerivative, TooLarge, UnknownModel)
from .estimator import McdFit, load_csv, mcd_cstep, mcd_exact
from .functional import (invert_map, lambda_prime_analytic, lambda_prime_fd, lambda_value,
                         nonsingularity_report, plug_in_lambda_prime, psi,
                         sandwich_covariance)
from .models import get_model, get_radial

__all__ = [
    "TangentVector", "ThetaParams", "commutation_matrix", "kron", "vec", "unvec",
    "EllipticalConstants", "d_inv_map", "d_map", "elliptical_constants", "influence",
    "influence_general",
    "BadBandwidth", "BadFraction", "BoundaryUndefined", "DegenerateMatrix", "DegenerateSample",
    "DegenerateSubset", "McdError", "QuadratureError", "SingularDerivative", "TooLarge",
    "UnknownModel",
    "McdFit", "load_csv", "mcd_cstep", "mcd_exact",
    "invert_map", "lambda_prime_analytic", "lambda_prime_fd", "lambda_value",
    "nonsingularity_report", "plug_in_lambda_prime", "psi", "sandwich_covariance",
    "get_model", "get_radial",
]
