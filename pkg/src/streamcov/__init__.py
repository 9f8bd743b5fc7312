"""Space-time covariance models on linear networks and directed stream trees."""

from .errors import *  # noqa: F401,F403
from .functions import (
    BF_FAMILIES,
    CM_FAMILIES,
    Composite,
    Kernel,
    ScalarFamily,
    bernstein_derivative,
    check_complete_monotonicity,
    eval_kernel,
    eval_scalar,
)
from .inference import (
    CVResult,
    Dataset,
    FitConfig,
    FitResult,
    PredictionResult,
    crps_gaussian,
    cross_validate,
    fit_ml,
    krige,
    log_likelihood,
    profile_beta,
    simulate,
    simulate_dataset,
)
from .models import (
    ConeModel,
    CovModel,
    MixtureModel,
    ProductModel,
    Separation,
    SpaceTimeSeparation,
    TemporalCovariance,
    build_covariance_matrix,
    covariance_matrix,
    full_covariance,
)
from .network import (
    Edge,
    FlowKind,
    FlowRelation,
    Network,
    PointOnNetwork,
    flow_relation,
    geodesic_distance,
    geodesic_matrix,
    random_points,
    random_tree,
    read_network,
    resistance_distance,
    resistance_matrix,
    site_geometry,
    tailup_weight,
)
from .validate import ValidityReport, check_cnd, check_corollary1c, check_pd, check_schur_closure

__version__ = "0.1.0"
