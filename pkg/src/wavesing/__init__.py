"""Simulation of Riccati-type singularity formation in quasilinear wave equations."""

__version__ = "0.1.0"

from .weights import WeightFunction, certify_weight, eval_weight, eval_weight_derivative, make_weight  # noqa: E402
from .fields import Grid, ScalarField, laplacian, l2_norm, partial_derivative, seminorm_k, sup_norm  # noqa: E402
from .data import InitialData, DataSizeParams, homogeneous_data, make_bump_data, measure_parameters  # noqa: E402
from .evolve import (  # noqa: E402
    EvolveSettings,
    RenormalizedState,
    recover_phi,
    regularized_rhs,
    run_baseline,
    run_regularized,
    stable_inverse_weight_product,
    step_rk4,
)
from .shock1d import run_shock, shock_initial_data, shock_rhs  # noqa: E402

__all__ = [
    "WeightFunction", "certify_weight", "eval_weight", "eval_weight_derivative", "make_weight",
    "Grid", "ScalarField", "laplacian", "l2_norm", "partial_derivative", "seminorm_k", "sup_norm",
    "InitialData", "DataSizeParams", "homogeneous_data", "make_bump_data", "measure_parameters",
    "EvolveSettings", "RenormalizedState", "recover_phi", "regularized_rhs", "run_baseline",
    "run_regularized", "stable_inverse_weight_product", "step_rk4",
    "run_shock", "shock_initial_data", "shock_rhs",
]
