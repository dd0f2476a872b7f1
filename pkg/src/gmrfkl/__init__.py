"""gmrfkl: Gauss-Markov random fields on toroidal lattices.

Sequential Gibbs simulation, closed-form maximum pseudo-likelihood
estimation, closed-form Kullback-Leibler divergences between two field
models (scalar and d-dimensional), and a Monte Carlo oracle that validates
the closed forms against brute-force conditional averages.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateField,
    DegenerateNeighborhood,
    DivergedSimulation,
    GmrfError,
    InsufficientSamples,
    InvalidParams,
    SingularCovariance,
)
from .lattice import (
    CENTER_INDEX,
    NEIGHBOR_OFFSETS,
    SECOND_ORDER,
    WINDOW_OFFSETS,
    LatticeField,
    MultiLatticeField,
    NeighborhoodSpec,
    Patch,
    extract_patches,
    neighbors,
    read_field,
    write_field,
)
from .moments import (
    MultiPatchMoments,
    PatchMoments,
    multi_patch_moments,
    multi_patch_moments_pooled,
    patch_moments,
    patch_moments_pooled,
    plus_norm,
    read_moments,
    write_moments,
)
from .sampler import (
    STABILITY_LIMIT,
    ModelParams,
    MultiModelParams,
    SimConfig,
    check_stability,
    gibbs_sweep_multivariate,
    gibbs_sweep_univariate,
    simulate,
)
from .estimation import (
    EstimationReport,
    estimate_beta_multivariate,
    estimate_beta_univariate,
    estimate_beta_univariate_direct,
    estimate_params,
    format_estimation_report,
    log_pseudo_likelihood,
    log_pseudo_likelihood_multivariate,
)
from .divergence import (
    KLReport,
    KLTerms,
    MultiKLInputs,
    UniKLInputs,
    format_kl_report,
    kl_multivariate,
    kl_symmetrized_closed_form,
    kl_univariate,
    kl_univariate_vectorized,
)
from .oracle import (
    OracleReport,
    brute_force_sums,
    format_oracle_report,
    gaussian_kl_reference,
    gaussian_kl_reference_multivariate,
    mc_kl_multivariate,
    mc_kl_univariate,
)

__all__ = [
    "__version__",
    # errors
    "GmrfError", "InvalidParams", "DivergedSimulation", "SingularCovariance",
    "DegenerateField", "DegenerateNeighborhood", "InsufficientSamples",
    # lattice
    "NeighborhoodSpec", "SECOND_ORDER", "LatticeField", "MultiLatticeField",
    "Patch", "neighbors", "extract_patches", "read_field", "write_field",
    "WINDOW_OFFSETS", "NEIGHBOR_OFFSETS", "CENTER_INDEX",
    # moments
    "PatchMoments", "MultiPatchMoments", "patch_moments", "multi_patch_moments",
    "patch_moments_pooled", "multi_patch_moments_pooled", "plus_norm",
    "read_moments", "write_moments",
    # sampler
    "ModelParams", "MultiModelParams", "SimConfig", "simulate",
    "gibbs_sweep_univariate", "gibbs_sweep_multivariate", "check_stability",
    "STABILITY_LIMIT",
    # estimation
    "EstimationReport", "estimate_params", "estimate_beta_univariate",
    "estimate_beta_univariate_direct", "estimate_beta_multivariate",
    "log_pseudo_likelihood", "log_pseudo_likelihood_multivariate",
    "format_estimation_report",
    # divergence
    "UniKLInputs", "MultiKLInputs", "KLTerms", "KLReport", "kl_univariate",
    "kl_univariate_vectorized", "kl_symmetrized_closed_form", "kl_multivariate",
    "format_kl_report",
    # oracle
    "OracleReport", "mc_kl_univariate", "mc_kl_multivariate",
    "gaussian_kl_reference", "gaussian_kl_reference_multivariate",
    "brute_force_sums", "format_oracle_report",
]
