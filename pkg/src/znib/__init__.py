"""Zero & N-inflated binomial distributions and maximum-likelihood fitters."""

from .distributions import (
    BetaBinParams,
    InflationLogits,
    ZipPair,
    ZnibParams,
    ZnibbParams,
    ZnimParams,
    betabin_log_pmf,
    betabin_pmf,
    conditional_oracle,
    logits_to_weights,
    reflect,
    sample,
    zip_condition,
    znib_central_moment,
    znib_log_pmf,
    znib_moments,
    znib_pmf,
    znib_pmf_vector,
    znibb_pmf,
    znim_pmf,
)
from .fit import (
    FitResult,
    e_step,
    fit_binomial,
    fit_em,
    fit_grouped_hurdle,
    fit_model,
    fit_powerlink,
    powerlink_loglik,
)
from .inference import aic, bootstrap_bands, compare, observed_info_se
from .model import (
    BetaBinShapes,
    ConstantHurdle,
    ConstantLogit,
    DataError,
    Dataset,
    Family,
    LogitLinear,
    ModelSpec,
    NoInflation,
    PowerLink,
    SoftmaxCovariate,
    evaluate_links,
    load_csv,
    pack,
    param_names,
    unpack,
)

__version__ = "0.1.0"
