"""Bayesian selection models for longitudinal dyadic data with nonignorable dropout."""

from .diagnostics import (
    SensitivityGrid,
    conjugate_checks,
    effective_sample_size,
    geweke_z,
    getting_it_right,
    ig_prior_sensitivity,
    sensitivity_sweep,
)
from .gibbs import ChainOutput, GibbsSampler, SamplerConfig, SamplerError, run_chain
from .harness import ReplicateReport, fit_available_case, fit_complete_case, run_replicates
from .io import load_config, parse_panel, write_panel
from .model import (
    DropoutParams,
    DyadPanel,
    MeasurementParams,
    ModelError,
    ModelSpec,
    PriorSpec,
    RandomEffects,
    joint_loglik,
    transition_mean,
)
from .simulate import SimDesign, generate_dataset

__all__ = [
    "ChainOutput",
    "DropoutParams",
    "DyadPanel",
    "GibbsSampler",
    "MeasurementParams",
    "ModelError",
    "ModelSpec",
    "PriorSpec",
    "RandomEffects",
    "ReplicateReport",
    "SamplerConfig",
    "SamplerError",
    "SensitivityGrid",
    "SimDesign",
    "conjugate_checks",
    "effective_sample_size",
    "fit_available_case",
    "fit_complete_case",
    "generate_dataset",
    "geweke_z",
    "getting_it_right",
    "ig_prior_sensitivity",
    "joint_loglik",
    "load_config",
    "parse_panel",
    "run_chain",
    "run_replicates",
    "sensitivity_sweep",
    "transition_mean",
    "write_panel",
]
