"""Nonparametric Bayesian estimation for linear inverse problems observed at design points."""

__version__ = "0.1.0"

from .svd_operators import (
    OperatorSpec,
    SignalCoefficients,
    catalog_signal,
    conjugate_basis_eval,
    eigenbasis_eval,
    forward_apply,
    singular_value,
    sobolev_norm,
)
from .sequence_transform import (
    DesignGrid,
    Observations,
    SequenceData,
    discrete_inner,
    make_grid,
    measured_remainder,
    project,
    remainder_bound,
)
from .prior_posterior import (
    Posterior,
    PriorSpec,
    make_prior,
    posterior_risk,
    posterior_sample,
    posterior_update,
)
from .credible import CredibleBall, band_draws, covers, credible_radius
from .experiments import (
    ExperimentConfig,
    band_replication,
    contraction_study,
    coverage_study,
    generate_observations,
    rate_prediction,
)
