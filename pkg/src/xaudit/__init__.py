"""Robustness audits for feature-attribution methods via local Lipschitz estimates."""

__version__ = "0.1.0"

from .explainers import Attribution, ExplainerConfig, explain, explanation_map  # noqa: E402
from .optim import BoxRegion, OptResult, ProbeBudget, maximize_in_box  # noqa: E402
from .robustness import (  # noqa: E402
    LipschitzEstimate,
    NeighborhoodSpec,
    build_neighborhood,
    dataset_robustness_summary,
    lipschitz_continuous,
    lipschitz_discrete,
    noise_probe,
    worst_pair,
)

__all__ = [
    "Attribution",
    "BoxRegion",
    "ExplainerConfig",
    "LipschitzEstimate",
    "NeighborhoodSpec",
    "OptResult",
    "ProbeBudget",
    "build_neighborhood",
    "dataset_robustness_summary",
    "explain",
    "explanation_map",
    "lipschitz_continuous",
    "lipschitz_discrete",
    "maximize_in_box",
    "noise_probe",
    "worst_pair",
]
