"""Interval-censored survival analysis toolkit.

Three tiers on one likelihood: the Turnbull NPMLE via EM for shape
recovery, Weibull and log-normal AFT maximum likelihood for covariate
adjusted prediction, and Bayesian AFT with HMC for uncertainty
quantification and PSIS-LOO model comparison, plus the simulation harness
and metrics used to evaluate them.
"""

from .model import (
    AftParams,
    CensorKind,
    Dataset,
    FamilyKind,
    Observation,
    StepSurvival,
    classify_observation,
    log_lik_contribution,
    lognormal_survival,
    step_survival_eval,
    weibull_survival,
)
from .turnbull import EmFit, bootstrap_bands, em_step, fit_npmle, turnbull_support
from .aft import AftFit, aft_interval_loglik, aft_loglik_grad, fit_aft_mle, predict_survival, time_ratios
from .bayes import (
    PosteriorDraws,
    PriorSpec,
    SurvivalBand,
    band_coverage_vs_em,
    chain_diagnostics,
    log_posterior,
    posterior_predictive_check,
    posterior_survival_band,
    sample_posterior,
)
from .loo import compare_models, fit_generalized_pareto, loo_elpd, pointwise_loglik, psis_smooth
from .metrics import brier_score, empirical_coverage, ibs, ise, km_pseudo_right
from .simulate import (
    ScenarioConfig,
    SimulatedDataset,
    generate_dataset,
    intervalize_event,
    scenario_grid,
)
from .dataio import intervalize_right_censored, load_ovarian, read_dataset, write_dataset

__version__ = "0.1.0"
