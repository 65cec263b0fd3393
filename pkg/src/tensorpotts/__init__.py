"""Mean-field Potts models with p-body interactions.

Exact finite-N magnetization laws, phase-diagram classification, limiting
distributions at regular/critical/special points, and maximum-likelihood
inference with asymptotically valid confidence sets.
"""

from .model import (
    ModelSpec,
    SDerivatives,
    f_deriv,
    f_derivative_bundle,
    k_deriv,
    negative_free_energy,
    quadratic_form,
    s_of_x,
    sigma_matrix,
    u_vector,
    x_of_s,
)
from .phase import (
    CriticalCurveSample,
    MaximizerSet,
    PointClass,
    PointTag,
    SpecialPoint,
    StationaryPoint,
    classify_point,
    compute_beta_c,
    compute_special_point,
    critical_curve,
    find_stationary_points,
    full_maximizer_set,
    global_maximizers_1d,
    phase_diagram,
)
from .exact import (
    ExactLaw,
    BProfile,
    HProfile,
    compositions_iter,
    expect_functional,
    expect_u1,
    expect_up,
    log_partition,
    log_weight,
    magnetization_law,
    tail_prob,
)
from .sampling import ChainConfig, RescaledSample, exact_sample, gibbs_chain, rescale
from .laws import (
    ComposedLaw,
    GaussianSimplex,
    GridLaw,
    HalfNormalLaw,
    MixtureGaussianSimplex,
    MixtureLaw,
    NormalLaw,
    ScalarLaw,
    bhat_limit,
    critical_mixture_law,
    gaussian_limit_regular,
    gamma1_weight,
    hhat_limit,
    ks_distance,
    mixture_weights,
    norm_p_limit,
    quartic_law,
    sextic_law,
    v_limit_covariance,
)
from .inference import (
    ConfidenceSet,
    EstimationResult,
    augment_ci,
    ci_beta,
    ci_h,
    critical_slice_beta,
    critical_slice_h,
    mle_beta,
    mle_h,
    two_step_ci,
)

__version__ = "0.1.0"
