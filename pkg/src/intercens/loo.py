"""Interval-aware model comparison by Pareto-smoothed importance sampling.

Leave-one-out predictive densities are estimated from posterior draws: the
raw importance ratios for each held-out observation are stabilized by
replacing the largest ratios with quantiles of a generalized Pareto fit to
the tail, then truncated at the raw maximum and normalized.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .aft import _loglik_terms, _prepare
from .model import Dataset

__all__ = [
    "LogLikMatrix",
    "LooResult",
    "pointwise_loglik",
    "fit_generalized_pareto",
    "psis_smooth",
    "loo_elpd",
    "compare_models",
    "PARETO_K_WARN",
]

#: Conventional reliability threshold for the tail shape diagnostic.
PARETO_K_WARN = 0.7

#: Sentinel shape reported when the tail is degenerate and no fit exists.
K_SENTINEL = -math.inf


@dataclass(frozen=True, eq=False)
class LogLikMatrix:
    """Pointwise log-likelihood of every observation at every kept draw.

    Draws containing non-finite values over the usable observations are
    dropped; observations impossible under every draw are excluded from
    ELPD sums and marked in ``kept_obs``.
    """

    values: np.ndarray  # (n_kept_draws, n)
    kept_obs: np.ndarray  # bool (n,)
    n_dropped_draws: int


def pointwise_loglik(draws, data: Dataset) -> LogLikMatrix:
    """Evaluate the interval log-likelihood matrix for posterior draws."""
    thetas = draws.flat()
    if thetas.shape[1] != data.n_covariates + 2:
        raise ValueError("draws and dataset have incompatible covariate dimensions")
    values = _loglik_terms(thetas, _prepare(data), draws.family)
    kept_obs = ~np.isneginf(values).all(axis=0)
    if not kept_obs.all():
        warnings.warn(
            f"observations impossible under every draw, excluded: "
            f"{np.flatnonzero(~kept_obs).tolist()}",
            stacklevel=2,
        )
    usable = values[:, kept_obs]
    good_rows = np.isfinite(usable).all(axis=1)
    n_dropped = int((~good_rows).sum())
    if n_dropped:
        warnings.warn(f"dropped {n_dropped} draws with non-finite log-likelihood", stacklevel=2)
    return LogLikMatrix(values=values[good_rows], kept_obs=kept_obs, n_dropped_draws=n_dropped)


def fit_generalized_pareto(tail) -> tuple[float, float]:
    """Fit a generalized Pareto (shape k, scale sigma) to sorted excesses.

    Uses the profile-likelihood estimator with the usual quadrature over
    the reparameterized scale and a mild prior pulling k toward 1/2, which
    keeps the fit stable for the short tails PSIS works with.  A degenerate
    all-equal tail returns the -inf sentinel with a warning.
    """
    x = np.asarray(tail, dtype=float)
    n = x.size
    if n < 5:
        raise ValueError("need at least 5 tail samples")
    if np.any(x <= 0) or np.any(np.diff(x) < 0):
        raise ValueError("tail must be sorted ascending and positive")
    if x[-1] - x[0] <= 0:
        warnings.warn("degenerate tail (all values equal); no Pareto fit", stacklevel=2)
        return K_SENTINEL, 0.0
    if np.unique(x).size <= 2:
        warnings.warn("tail has <= 2 distinct values; Pareto fit is low confidence", stacklevel=2)
    prior_bs = 3.0
    prior_k = 10.0
    m_est = 30 + int(math.sqrt(n))
    b = 1.0 - np.sqrt(m_est / (np.arange(1, m_est + 1) - 0.5))
    b /= prior_bs * x[int(n / 4 + 0.5) - 1]
    b += 1.0 / x[-1]
    k = np.mean(np.log1p(-b[:, None] * x), axis=1)
    log_lik = n * (np.log(-b / k) - k - 1.0)
    with np.errstate(over="ignore"):
        weights = 1.0 / np.sum(np.exp(log_lik - log_lik[:, None]), axis=1)
    usable = weights >= 10.0 * np.finfo(float).eps
    if not np.all(usable):
        weights = weights[usable]
        b = b[usable]
    weights = weights / weights.sum()
    b_post = float(np.sum(b * weights))
    k_post = float(np.mean(np.log1p(-b_post * x)))
    sigma = -k_post / b_post
    k_post = (n * k_post + prior_k * 0.5) / (n + prior_k)
    return k_post, sigma


def _gpd_quantile(probs: np.ndarray, k: float, sigma: float) -> np.ndarray:
    if abs(k) < np.finfo(float).eps:
        return sigma * (-np.log1p(-probs))
    return sigma * np.expm1(-k * np.log1p(-probs)) / k


def psis_smooth(log_ratios) -> tuple[np.ndarray, float]:
    """Smooth one vector of log importance ratios.

    The largest ceil(min(S/5, 3*sqrt(S))) ratios are replaced by fitted
    generalized Pareto quantiles, truncated at the raw maximum, and the
    whole vector is normalized in log space.  Returns the normalized log
    weights and the tail shape k (k > 0.7 is flagged as unreliable).
    """
    lr = np.asarray(log_ratios, dtype=float).ravel()
    s = lr.size
    if s < 100:
        raise ValueError("need at least 100 draws")
    shifted = lr - lr.max()
    if np.ptp(lr) == 0:
        log_weights = np.full(s, -math.log(s))
        return log_weights, K_SENTINEL
    n_tail = int(math.ceil(min(s / 5.0, 3.0 * math.sqrt(s))))
    order = np.argsort(shifted)
    cutoff = max(shifted[order[-n_tail - 1]], math.log(np.finfo(float).tiny))
    in_tail = shifted > cutoff
    tail = shifted[in_tail]
    k = K_SENTINEL
    if tail.size >= 5 and np.unique(tail).size > 1:
        tail_order = np.argsort(tail)
        exp_cutoff = math.exp(cutoff)
        excess = np.exp(tail[tail_order]) - exp_cutoff
        # Guard against zero excess from rounding at the cutoff itself.
        excess = np.maximum(excess, np.finfo(float).tiny)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            k, sigma = fit_generalized_pareto(np.sort(excess))
        if math.isfinite(k):
            probs = (np.arange(tail.size) + 0.5) / tail.size
            smoothed = np.log(_gpd_quantile(probs, k, sigma) + exp_cutoff)
            new_tail = np.empty_like(tail)
            new_tail[tail_order] = smoothed
            shifted = shifted.copy()
            shifted[in_tail] = np.minimum(new_tail, 0.0)
    if k > PARETO_K_WARN:
        warnings.warn(
            f"Pareto k = {k:.2f} > {PARETO_K_WARN}; importance weights unreliable",
            stacklevel=2,
        )
    log_weights = shifted - logsumexp(shifted)
    return log_weights, k


@dataclass(frozen=True, eq=False)
class LooResult:
    """PSIS-LOO expected log predictive density with pointwise detail."""

    elpd: float
    se: float
    pointwise: np.ndarray  # (n,), NaN for excluded observations
    pareto_k: np.ndarray  # (n,), -inf sentinel where degenerate
    kept_obs: np.ndarray  # bool (n,)


def loo_elpd(ll: LogLikMatrix) -> LooResult:
    """Leave-one-out ELPD from a pointwise log-likelihood matrix.

    For observation i the log ratios are -ll[:, i]; the smoothed weights
    combine with the likelihood as elpd_i = log sum_s w_si L_i(theta_s).
    The standard error is sqrt(n * var(pointwise)).
    """
    values = ll.values
    n = values.shape[1]
    pointwise = np.full(n, np.nan)
    pareto_k = np.full(n, K_SENTINEL)
    for i in range(n):
        if not ll.kept_obs[i]:
            continue
        col = values[:, i]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            log_weights, k = psis_smooth(-col)
        pointwise[i] = logsumexp(log_weights + col)
        pareto_k[i] = k
    kept = ll.kept_obs
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise ValueError("no usable observations")
    flagged = pareto_k[kept] > PARETO_K_WARN
    if flagged.any():
        warnings.warn(
            f"{int(flagged.sum())} observations with Pareto k > {PARETO_K_WARN}",
            stacklevel=2,
        )
    pw = pointwise[kept]
    elpd = float(pw.sum())
    se = float(math.sqrt(n_kept * pw.var(ddof=1))) if n_kept > 1 else 0.0
    return LooResult(elpd=elpd, se=se, pointwise=pointwise, pareto_k=pareto_k, kept_obs=kept)


def compare_models(a: LooResult, b: LooResult) -> tuple[float, float]:
    """Paired ELPD difference (b - a) with its paired standard error."""
    if a.pointwise.shape != b.pointwise.shape:
        raise ValueError("results cover different numbers of observations")
    both = a.kept_obs & b.kept_obs
    n = int(both.sum())
    if n == 0:
        raise ValueError("no observations shared by both results")
    diff = b.pointwise[both] - a.pointwise[both]
    elpd_diff = float(diff.sum())
    se_diff = float(math.sqrt(n * diff.var(ddof=1))) if n > 1 else 0.0
    return elpd_diff, se_diff
