"""Strong-order integration of scalar-noise SDEs with a sign-randomised Heun scheme."""
from .convergence import ConvergenceReport, ExperimentConfig, fit_slope, run_experiment, strong_error
from .problems import (CatalogueEntry, Interpretation, Order, SdeProblem, catalogue, get_problem,
                       ito_residual, stratonovich_to_ito)
from .steppers import (SchemeId, SignMode, SignSequence, Trajectory, euler_maruyama_step,
                       integrate, milstein_step, rk_step)
from .wiener import TimeGrid, WienerPath, bridge_refine, coarsen, sample_path, value_at

__version__ = "0.1.0"

__all__ = [
    "CatalogueEntry", "ConvergenceReport", "ExperimentConfig", "Interpretation", "Order",
    "SchemeId", "SdeProblem", "SignMode", "SignSequence", "TimeGrid", "Trajectory", "WienerPath",
    "bridge_refine", "catalogue", "coarsen", "euler_maruyama_step", "fit_slope", "get_problem",
    "integrate", "ito_residual", "milstein_step", "rk_step", "run_experiment", "sample_path",
    "strong_error", "stratonovich_to_ito", "value_at",
]
