"""Two-grid forward-backward multigrid for dual total-variation imaging problems."""

from .coarse import CoarseDataTerm, CoarseModel, build_coarse_model, coarse_fb_iterate, prox_coarse
from .core import (
    BudgetedCount,
    EveryNth,
    FirstKIterations,
    GridShape,
    Never,
    SolverConfig,
    SolveTrace,
    TraceRecord,
    dual_objective,
    relative_error,
)
from .dataterm import DataTerm, SamplingMasks, SingularDataTermError, random_line_masks
from .estimator import MRIReconstructor, TVDenoiser
from .solver import fb_solve, fbmg_solve, line_search
from .transfer import GridTransfer
from .tv_ops import divergence_adjoint, gradient

__version__ = "0.1.0"

__all__ = [
    "BudgetedCount",
    "CoarseDataTerm",
    "CoarseModel",
    "DataTerm",
    "EveryNth",
    "FirstKIterations",
    "GridShape",
    "GridTransfer",
    "MRIReconstructor",
    "Never",
    "SamplingMasks",
    "SingularDataTermError",
    "SolveTrace",
    "SolverConfig",
    "TVDenoiser",
    "TraceRecord",
    "build_coarse_model",
    "coarse_fb_iterate",
    "divergence_adjoint",
    "dual_objective",
    "fb_solve",
    "fbmg_solve",
    "gradient",
    "line_search",
    "prox_coarse",
    "random_line_masks",
    "relative_error",
]
