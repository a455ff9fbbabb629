"""Selection-model correction of missing-not-at-random positive data.

An exponential population observed through a logistic reporting curve is
fitted by MCMC; the unreported records are then imputed by drawing from
the exponential weighted by the non-reporting probability.
"""
from .data import WeightedSample, ciss_filter, read_weighted_csv, simulate_biased
from .distributions import (
    ExpLogisticParams,
    explogistic_logpdf,
    log_normalizer_k,
    normalizer_k,
    sample_missing,
    sample_reported,
)
from .errors import ConvergenceError, DataError, DomainError, QuadratureError, SamplingError
from .imputation import (
    CompletedDataset,
    impute_average,
    impute_multiple,
    impute_one,
    missingness_fraction,
    n_new,
)
from .inference import (
    McmcConfig,
    PosteriorDraws,
    PriorSpec,
    UnconstrainedParams,
    map_estimate,
    mcmc_fit,
    summarize,
)

__version__ = "0.1.0"
