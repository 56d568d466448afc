"""contraq: a numerical laboratory for posterior contraction in ill-posed
linear inverse problems.

Conjugate Gaussian sequence models, spline and Gaussian-mixture regression
posteriors, tail-set and modulus-of-continuity diagnostics, and replicated
log-log rate experiments with a CLI front end.
"""

__version__ = "0.1.0"

from .seq_model import (  # noqa: F401
    CoefficientSequence,
    DiagonalGaussianPosterior,
    GaussianProductPrior,
    IllPosedSpec,
    SequenceObservation,
    Tail,
    credible_radius,
    kappa,
    kl_divergence,
    make_truth,
    observe,
    posterior,
    posterior_risk_direct,
    sobolev_norm,
)
from .rates import (  # noqa: F401
    ModulusBound,
    RateExponents,
    TailSet,
    check_modulus_chain,
    implied_inverse_radius,
    lambert_w,
    modulus_upper_bound,
    prior_mass_tail_bound,
    prior_mass_tail_mc,
    rate_exponent,
    severe_k_n,
)
from .experiments import (  # noqa: F401
    ExperimentConfig,
    RateFitResult,
    default_config,
    run_contraction_experiment,
    run_inverse_bound_report,
    run_lemma_suite,
)
