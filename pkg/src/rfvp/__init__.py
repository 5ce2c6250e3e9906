"""Risk estimators for random-features ridge regression with variance-profiled data.

Four estimator tiers for the same training and predictive risks:

* empirical Monte Carlo on sampled data,
* trace-form Monte Carlo (coefficient and noise expectations analytic),
* surrogate ("lozenge") Monte Carlo on the Gaussian linear-plus-chaos model,
* deterministic ("square") values via an operator-valued fixed point,

plus profile construction/ingestion, an experiment sweep harness and a CLI.
"""

from .gaussfun import (
    ActivationSpec,
    GaussFunctionals,
    chaos_std,
    compute_functionals,
    dlin_dchaos_diagonals,
    gauss_expect,
    parse_activation,
    surrogate_diagonals,
    theta_lin_chaos,
    theta_matrices,
    theta_pair,
)
from .mc import (
    LozengeSample,
    ModelParams,
    RiskReport,
    SampleSet,
    build_lozenge,
    build_lozenge_general,
    lozenge_risks,
    monte_carlo_risks,
    rf_features,
    ridge_fit,
    sample_design,
)
from .profiles import (
    ClassStructure,
    Dimensions,
    VarianceProfile,
    build_mixture_profile,
    class_variance_vectors,
    constant_profile,
    normalize_row_stochastic,
    parse_idx_images,
    parse_idx_labels,
    read_profile_csv,
    synthetic_class_vectors,
    write_profile_csv,
)
from .detequiv import (
    COMPILED_KERNEL,
    EtaSchedule,
    mp_stieltjes,
    square_risks,
)

__version__ = "0.1.0"
