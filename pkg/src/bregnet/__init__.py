"""bregnet: Bregman-loss training of ReLU networks, constructive
approximation with certificates, dimension estimation, and rate sweeps.
"""

from .errors import (
    BregnetError,
    CapabilityError,
    ConfigError,
    InvalidInputError,
    SizingError,
    TrainingAbortError,
)
from .expfam import (
    ExpFamily,
    FAMILY_NAMES,
    bregman,
    get_family,
    kl,
    kl_numeric,
    loss_grad_natural,
    loss_natural,
    nll,
    sample_response,
)
from .net import Affine, ReluNet, SizingRule, architect, size_for, with_exported_clamp
from .train import Dataset, FitResult, TrainConfig, backprop_grads, empirical_risk, fit
from .approx import (
    CertBundle,
    CompiledNet,
    ErrorBudget,
    build_prod,
    build_trapezoid,
    compile_target,
    error_budget,
    trapezoid_value,
)
from .dimension import (
    CoverProfile,
    DimEstimate,
    box_cover,
    fit_dimension,
    mass_cover,
    profile_mass,
    profile_support,
)
from .synth import (
    BumpSumTarget,
    ConstantTarget,
    HolderTarget,
    LambdaSpec,
    PolyTarget,
    VGCode,
    build_vg_code,
    eval_bump,
    make_dataset,
    make_f_omega,
    sample_lambda,
    single_bump_target,
)
from .harness import (
    RateReport,
    SeparationReport,
    SweepConfig,
    excess_risk,
    l2_error,
    run_sweep,
    separation_check,
    theoretical_exponents,
)

__version__ = "0.1.0"
