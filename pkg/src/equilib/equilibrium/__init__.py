"""Forward dynamics, gradient estimators and contraction diagnostics."""

from .dynamics import (
    contraction_ratio,
    fixed_point_residual,
    fixed_point_solve,
    forward_unroll,
    spectral_norm_estimate,
)
from .gradients import (
    bptt_grads,
    cbptt_grads,
    compute_gradients,
    crbp_grads,
    lcp_penalty,
    neumann_adjoint,
    rbp_grads,
    tbptt_grads,
)
from .types import (
    ALGORITHM_KINDS,
    EquilibriumResult,
    GradAlgorithm,
    GradResult,
    LossSpec,
    NeumannResult,
)

__all__ = [
    "ALGORITHM_KINDS",
    "EquilibriumResult",
    "GradAlgorithm",
    "GradResult",
    "LossSpec",
    "NeumannResult",
    "bptt_grads",
    "cbptt_grads",
    "compute_gradients",
    "contraction_ratio",
    "crbp_grads",
    "fixed_point_residual",
    "fixed_point_solve",
    "forward_unroll",
    "lcp_penalty",
    "neumann_adjoint",
    "rbp_grads",
    "spectral_norm_estimate",
    "tbptt_grads",
]
