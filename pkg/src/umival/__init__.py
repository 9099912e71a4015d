"""UMI data valuation: score token data by how implausible it is under a reference model.

Tokens are lifted to continuous values and pushed through the model's
interpolated conditional CDFs (Rosenblatt's transformation). Model-generated
data yields iid uniform z-values; the value of a datapoint is the divergence of
the z marginal from the uniform, with a fixed penalty for z-values that look
uniform but fail an independence battery.
"""

from .ecdf import (
    PiecewiseLinearCDF,
    StepCDF,
    divergence_from_uniform,
    divergence_to_uniform,
    empirical_cdf,
    interpolate,
    sup_distance,
)
from .models import (
    MarkovKernel,
    Transform,
    next_token_pmf,
    random_kernel,
    ranked_kernel,
    reversed_kernel,
    sample_datapoint,
    stationary_distribution,
    trace_under_model,
    train_markov,
    transform_kernel,
    transform_pmf,
)
from .oracle import (
    check_iid_identity,
    check_markov_bound,
    exact_z_cdf_iid,
    fdiv_discrete,
    markov_weighted_divergence,
    mixture_marginal_cdf,
)
from .rosenblatt import ZSequence, continuize, interpolated_cdf_eval, rosenblatt_transform
from .stattests import TestOutcome, battery
from .types import (
    BatteryConfig,
    DataPointTrace,
    Dataset,
    FDivergence,
    TraceMeta,
    TraceStep,
    UmiConfig,
    validate_trace,
)
from .value import Branch, UmiResult, dataset_value, umi_value

__version__ = "0.1.0"
