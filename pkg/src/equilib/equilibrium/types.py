from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from equilib.errors import EquilibConfigError
from equilib.tensor import Variable, binary_cross_entropy_with_logits

ALGORITHM_KINDS = ("bptt", "tbptt", "rbp", "crbp", "cbptt")
PENALIZED_KINDS = ("crbp", "cbptt")
IMPLICIT_KINDS = ("rbp", "crbp")

ParamGrads = dict[str, np.ndarray]


@dataclass(frozen=True, slots=True)
class EquilibriumResult:
    state: Variable
    residual: float
    steps_taken: int
    converged: bool
    trajectory: list[Variable] | None = None
    residuals: list[float] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class NeumannResult:
    value: np.ndarray
    terms_used: int
    converged: bool
    residual: float


@dataclass(frozen=True, slots=True)
class GradAlgorithm:
    """Which gradient estimator to run and its knobs."""

    kind: str = "crbp"
    steps: int = 20
    window: int = 3
    neumann_terms: int = 15
    neumann_tol: float = 1e-6
    solver_tol: float = 1e-6
    lam: float = 0.9
    penalty_weight: float = 1.0
    per_step_loss: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ALGORITHM_KINDS:
            raise EquilibConfigError(
                f"Unknown gradient algorithm: {self.kind}",
                hint=f"Choose one of {', '.join(ALGORITHM_KINDS)}.",
            )
        if self.steps < 1:
            raise EquilibConfigError(f"algorithm.steps must be >= 1, got {self.steps}")
        if self.window < 1:
            raise EquilibConfigError(f"algorithm.window must be >= 1, got {self.window}")
        if self.kind == "tbptt" and self.window > self.steps:
            raise EquilibConfigError(
                f"algorithm.window ({self.window}) exceeds algorithm.steps ({self.steps})"
            )
        if self.neumann_terms < 1:
            raise EquilibConfigError(
                f"algorithm.neumann_terms must be >= 1, got {self.neumann_terms}"
            )
        if not 0.0 <= self.lam < 1.0:
            raise EquilibConfigError(f"algorithm.lam must lie in [0, 1), got {self.lam}")
        if self.penalty_weight < 0:
            raise EquilibConfigError(
                f"algorithm.penalty_weight must be >= 0, got {self.penalty_weight}"
            )
        if self.per_step_loss and self.kind not in ("bptt", "cbptt"):
            raise EquilibConfigError(
                "algorithm.per_step_loss is only supported with bptt or cbptt",
                hint="Set per_step_loss = false or switch algorithm.kind.",
            )

    @property
    def penalized(self) -> bool:
        return self.kind in PENALIZED_KINDS

    @property
    def implicit(self) -> bool:
        return self.kind in IMPLICIT_KINDS

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any]) -> GradAlgorithm:
        return cls(
            kind=str(settings.get("kind", "crbp")),
            steps=int(settings.get("steps", 20)),
            window=int(settings.get("window", 3)),
            neumann_terms=int(settings.get("neumann_terms", 15)),
            neumann_tol=float(settings.get("neumann_tol", 1e-6)),
            solver_tol=float(settings.get("solver_tol", 1e-6)),
            lam=float(settings.get("lam", 0.9)),
            penalty_weight=float(settings.get("penalty_weight", 1.0)),
            per_step_loss=bool(settings.get("per_step_loss", False)),
        )


@dataclass(frozen=True, slots=True)
class LossSpec:
    """Scalar objective on a hidden-state trajectory.

    ``objective`` maps one state to a scalar. With ``per_step`` the objective is
    averaged over every state handed in, otherwise only the last one counts.
    """

    objective: Callable[[Variable], Variable]
    per_step: bool = False

    def evaluate(self, states: Sequence[Variable]) -> Variable:
        if not self.per_step:
            return self.objective(states[-1])
        total = self.objective(states[0])
        for state in states[1:]:
            total = total + self.objective(state)
        return total * (1.0 / len(states))

    @classmethod
    def pixel_cross_entropy(
        cls,
        readout: Callable[[Variable], Variable],
        mask: np.ndarray,
        per_step: bool = False,
    ) -> LossSpec:
        target = np.asarray(mask, dtype=np.float64)

        def objective(state: Variable) -> Variable:
            return binary_cross_entropy_with_logits(readout(state), target)

        return cls(objective=objective, per_step=per_step)


@dataclass(slots=True)
class GradResult:
    grads: ParamGrads
    loss: float
    penalty: float | None = None
    forward: EquilibriumResult | None = None
    neumann: NeumannResult | None = None
