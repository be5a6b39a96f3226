"""Parametric accelerated failure time models under interval censoring.

log T = mu + x'beta + sigma * eps with extreme-value eps (Weibull) or normal
eps (log-normal).  The unconstrained parameter vector is
(mu, beta_1..beta_p, log_shape) where the shape coordinate is log kappa for
the Weibull (sigma = 1/kappa) and log sigma for the log-normal; the subject
time scale is exp(mu + x'beta).  Fitting maximizes the four-case interval
log-likelihood with an analytic gradient.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._optimize import maximize
from .model import (
    AftParams,
    CensorKind,
    Dataset,
    FamilyKind,
    ZeroMassWarning,
    lognormal_survival,
    weibull_survival,
)

__all__ = [
    "AftFit",
    "TimeRatioTable",
    "aft_interval_loglik",
    "aft_loglik_grad",
    "fit_aft_mle",
    "time_ratios",
    "predict_survival",
    "AllZeroMassError",
    "CollinearDesignError",
]

_LOG_SQRT_TWO_PI = 0.5 * math.log(2.0 * math.pi)


class AllZeroMassError(ValueError):
    """Every observation has zero likelihood at the supplied parameters."""

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(
            f"zero probability mass for all observations (first few: {self.indices[:10]})"
        )


class CollinearDesignError(ValueError):
    """The covariate design matrix is rank deficient."""


@dataclass(frozen=True, eq=False)
class _Prepared:
    """Dataset compiled to arrays for vectorized likelihood evaluation."""

    X: np.ndarray  # (n, p)
    log_lo: np.ndarray  # log effective left endpoint, -inf encodes 0
    log_hi: np.ndarray  # log effective right endpoint, +inf encodes right censoring
    exact: np.ndarray  # bool mask of exactly observed rows
    log_t: np.ndarray  # log event time on exact rows, 0 elsewhere


def _prepare(data: Dataset) -> _Prepared:
    n = data.n
    log_lo = np.full(n, -np.inf)
    log_hi = np.full(n, np.inf)
    exact = np.zeros(n, dtype=bool)
    log_t = np.zeros(n)
    for i, obs in enumerate(data.observations):
        if obs.kind is CensorKind.EXACT:
            exact[i] = True
            log_t[i] = math.log(obs.left)
        else:
            lo, hi = obs.effective_bounds()
            log_lo[i] = math.log(lo) if lo > 0 else -np.inf
            log_hi[i] = math.log(hi) if math.isfinite(hi) else np.inf
    return _Prepared(data.covariate_matrix(), log_lo, log_hi, exact, log_t)


def _split_theta(theta: np.ndarray, p: int):
    return theta[..., 0], theta[..., 1 : 1 + p], theta[..., 1 + p]


def _loglik_terms(theta: np.ndarray, prep: _Prepared, family: FamilyKind) -> np.ndarray:
    """Per-observation log-likelihood; broadcasts over leading draw axes.

    ``theta`` has shape (..., p + 2); the result has shape (..., n).
    """
    theta = np.asarray(theta, dtype=float)
    p = prep.X.shape[1]
    mu, beta, log_shape = _split_theta(theta, p)
    eta = mu[..., None] + beta @ prep.X.T
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        if family is FamilyKind.WEIBULL:
            kappa = np.exp(log_shape)[..., None]
            w_lo = kappa * (prep.log_lo - eta)
            w_hi = kappa * (prep.log_hi - eta)
            u_lo = np.exp(w_lo)
            u_hi = np.exp(w_hi)
            delta = u_hi - u_lo
            ll = -u_lo + np.log(-np.expm1(-delta))
            ll = np.where(np.isfinite(u_lo), ll, -np.inf)
            if prep.exact.any():
                w = kappa * (prep.log_t - eta)
                ll_exact = log_shape[..., None] - prep.log_t + w - np.exp(w)
                ll = np.where(prep.exact, ll_exact, ll)
        else:
            sigma = np.exp(log_shape)[..., None]
            z_lo = (prep.log_lo - eta) / sigma
            z_hi = (prep.log_hi - eta) / sigma
            mass = np.where(
                z_lo > 0,
                special.ndtr(-z_lo) - special.ndtr(-z_hi),
                special.ndtr(z_hi) - special.ndtr(z_lo),
            )
            ll = np.log(mass)
            if prep.exact.any():
                z = (prep.log_t - eta) / sigma
                ll_exact = -0.5 * z * z - log_shape[..., None] - prep.log_t - _LOG_SQRT_TWO_PI
                ll = np.where(prep.exact, ll_exact, ll)
    return np.where(np.isnan(ll), -np.inf, ll)


def _loglik_and_grad(theta: np.ndarray, prep: _Prepared, family: FamilyKind):
    """Total log-likelihood and its gradient in (mu, beta, log_shape)."""
    theta = np.asarray(theta, dtype=float)
    p = prep.X.shape[1]
    mu, beta, log_shape = theta[0], theta[1 : 1 + p], theta[1 + p]
    shape = float(np.exp(np.minimum(log_shape, 700.0)))
    if not math.isfinite(shape) or shape == 0.0 or abs(log_shape) > 700.0:
        return -math.inf, np.zeros(p + 2)
    eta = mu + prep.X @ beta
    n = eta.size
    g_eta = np.zeros(n)
    g_c = np.zeros(n)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        if family is FamilyKind.WEIBULL:
            kappa = shape
            w_lo = kappa * (prep.log_lo - eta)
            w_hi = kappa * (prep.log_hi - eta)
            u_lo = np.exp(w_lo)
            u_hi = np.exp(w_hi)
            delta = u_hi - u_lo
            denom = -np.expm1(-delta)
            ll = np.where(np.isfinite(u_lo), -u_lo + np.log(denom), -np.inf)
            decay = np.exp(-delta)
            u_hi_d = np.where(np.isfinite(u_hi), u_hi * decay, 0.0)
            wu_lo = np.where(u_lo > 0, w_lo * u_lo, 0.0)
            wu_hi_d = np.where(np.isfinite(u_hi) & (u_hi > 0), w_hi * u_hi * decay, 0.0)
            ok = denom > 0
            g_eta = np.where(ok, kappa * (u_lo - u_hi_d) / denom, 0.0)
            g_c = np.where(ok, -(wu_lo - wu_hi_d) / denom, 0.0)
            if prep.exact.any():
                w = kappa * (prep.log_t - eta)
                u = np.exp(w)
                ll = np.where(prep.exact, log_shape - prep.log_t + w - u, ll)
                g_eta = np.where(prep.exact, kappa * (u - 1.0), g_eta)
                g_c = np.where(prep.exact, 1.0 + w * (1.0 - u), g_c)
        else:
            sigma = shape
            z_lo = (prep.log_lo - eta) / sigma
            z_hi = (prep.log_hi - eta) / sigma
            mass = np.where(
                z_lo > 0,
                special.ndtr(-z_lo) - special.ndtr(-z_hi),
                special.ndtr(z_hi) - special.ndtr(z_lo),
            )
            ll = np.log(mass)
            phi_lo = np.exp(-0.5 * z_lo * z_lo) / math.sqrt(2.0 * math.pi)
            phi_hi = np.exp(-0.5 * z_hi * z_hi) / math.sqrt(2.0 * math.pi)
            zphi_lo = np.where(np.isfinite(z_lo), z_lo * phi_lo, 0.0)
            zphi_hi = np.where(np.isfinite(z_hi), z_hi * phi_hi, 0.0)
            ok = mass > 0
            g_eta = np.where(ok, (phi_lo - phi_hi) / (sigma * mass), 0.0)
            g_c = np.where(ok, (zphi_lo - zphi_hi) / mass, 0.0)
            if prep.exact.any():
                z = (prep.log_t - eta) / sigma
                ll = np.where(
                    prep.exact,
                    -0.5 * z * z - log_shape - prep.log_t - _LOG_SQRT_TWO_PI,
                    ll,
                )
                g_eta = np.where(prep.exact, z / sigma, g_eta)
                g_c = np.where(prep.exact, z * z - 1.0, g_c)
    ll = np.where(np.isnan(ll), -np.inf, ll)
    total = float(np.sum(ll))
    grad = np.concatenate(([g_eta.sum()], prep.X.T @ g_eta, [g_c.sum()]))
    return total, grad


def aft_interval_loglik(params: AftParams, data: Dataset, family=FamilyKind.WEIBULL) -> float:
    """Interval log-likelihood of the dataset at the given parameters.

    Observations with zero mass contribute -inf with a warning; if every
    observation has zero mass an :class:`AllZeroMassError` is raised with
    the offending indices, since no nearby parameter can be meaningful.
    """
    family = FamilyKind(family)
    if len(params.beta) != data.n_covariates:
        raise ValueError("beta length must match the covariate dimension")
    terms = _loglik_terms(params.as_vector(), _prepare(data), family)
    bad = np.isneginf(terms)
    if bad.all():
        raise AllZeroMassError(np.flatnonzero(bad))
    if bad.any():
        warnings.warn(
            f"zero probability mass for observations {np.flatnonzero(bad).tolist()}",
            ZeroMassWarning,
            stacklevel=2,
        )
    return float(terms.sum())


def aft_loglik_grad(params: AftParams, data: Dataset, family=FamilyKind.WEIBULL) -> np.ndarray:
    """Analytic gradient of :func:`aft_interval_loglik` in (mu, beta, log_shape)."""
    family = FamilyKind(family)
    if len(params.beta) != data.n_covariates:
        raise ValueError("beta length must match the covariate dimension")
    _, grad = _loglik_and_grad(params.as_vector(), _prepare(data), family)
    return grad


@dataclass(frozen=True, eq=False)
class AftFit:
    """A maximized AFT model with observed-information covariance."""

    params: AftParams
    family: FamilyKind
    loglik: float
    covariance: np.ndarray | None
    converged: bool
    n_iter: int
    covariate_names: tuple[str, ...] = ()


def _standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column centers and scales used to condition the optimization."""
    if X.shape[1] == 0:
        return np.zeros(0), np.ones(0)
    xbar = X.mean(axis=0)
    xsd = X.std(axis=0)
    xsd = np.where(xsd > 0, xsd, 1.0)
    return xbar, xsd


def _default_mu0(data: Dataset) -> float:
    mids = []
    for obs in data.observations:
        lo, hi = obs.effective_bounds()
        if obs.kind is CensorKind.EXACT:
            mids.append(obs.left)
        elif math.isfinite(hi):
            mids.append(0.5 * (lo + hi))
    if mids:
        return math.log(float(np.median(mids)))
    lo_max = max(obs.effective_bounds()[0] for obs in data.observations)
    return math.log(max(lo_max, 1.0))


def _fd_hessian(grad_fn, theta: np.ndarray) -> np.ndarray:
    d = theta.size
    hess = np.empty((d, d))
    for j in range(d):
        h = 1e-5 * (1.0 + abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        hess[:, j] = (grad_fn(up) - grad_fn(dn)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def _covariance_from_hessian(hess: np.ndarray) -> np.ndarray | None:
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError:
        return None
    cov = 0.5 * (cov + cov.T)
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() < -1e-8 * max(1.0, abs(eigs.max())):
        return None
    return cov


def fit_aft_mle(
    data: Dataset,
    family=FamilyKind.WEIBULL,
    init: AftParams | None = None,
    gtol: float = 1e-6,
    max_iter: int = 500,
) -> AftFit:
    """Maximize the interval likelihood by quasi-Newton ascent.

    Covariates are centered internally for conditioning and the optimum
    mapped back, which leaves the maximum itself unchanged.  The covariance
    is the inverse negative Hessian (central differences of the analytic
    gradient); if that matrix is singular or indefinite the fit is returned
    with ``covariance=None`` and a warning.
    """
    family = FamilyKind(family)
    p = data.n_covariates
    if data.n <= p + 2:
        raise ValueError(f"need n > p + 2 = {p + 2} observations, got {data.n}")
    X = data.covariate_matrix()
    if p > 0:
        design = np.column_stack([np.ones(data.n), X])
        if np.linalg.matrix_rank(design) < p + 1:
            raise CollinearDesignError("covariate design matrix is rank deficient")
    xbar, xsd = _standardization(X)
    prep = _prepare(data)
    prep_std = _Prepared((X - xbar) / xsd, prep.log_lo, prep.log_hi, prep.exact, prep.log_t)

    if init is None:
        theta0 = np.concatenate(([_default_mu0(data)], np.zeros(p), [0.0]))
    else:
        if len(init.beta) != p:
            raise ValueError("init beta length must match the covariate dimension")
        theta0 = init.as_vector()
        theta0[0] += xbar @ theta0[1 : 1 + p]
        theta0[1 : 1 + p] *= xsd

    def objective(theta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroMassWarning)
            return _loglik_and_grad(theta, prep_std, family)

    result = maximize(objective, theta0, gtol=gtol, max_iter=max_iter)
    theta_hat = result.x.copy()
    theta_hat[1 : 1 + p] /= xsd
    theta_hat[0] -= xbar @ theta_hat[1 : 1 + p]

    def value_and_grad_original(theta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroMassWarning)
            return _loglik_and_grad(theta, prep, family)

    def grad_original(theta):
        return value_and_grad_original(theta)[1]

    # Newton polish in the reporting coordinates: standardization changes the
    # gradient scale, so re-tighten the first-order condition here.
    value, grad = value_and_grad_original(theta_hat)
    hess = _fd_hessian(grad_original, theta_hat)
    converged = result.converged
    for _ in range(20):
        if np.max(np.abs(grad)) < gtol:
            converged = True
            break
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        moved = False
        for scale in (1.0, 0.5, 0.25, 0.125):
            candidate = theta_hat - scale * step
            cand_value, cand_grad = value_and_grad_original(candidate)
            if math.isfinite(cand_value) and cand_value >= value - 1e-12:
                theta_hat, value, grad = candidate, cand_value, cand_grad
                moved = True
                break
        if not moved:
            break
        hess = _fd_hessian(grad_original, theta_hat)
    converged = converged or bool(np.max(np.abs(grad)) < gtol)

    cov = _covariance_from_hessian(hess)
    if cov is None:
        warnings.warn("observed information is singular; covariance unavailable", stacklevel=2)
    return AftFit(
        params=AftParams.from_vector(theta_hat),
        family=family,
        loglik=value,
        covariance=cov,
        converged=converged,
        n_iter=result.iterations,
        covariate_names=data.covariate_names,
    )


@dataclass(frozen=True, eq=False)
class TimeRatioTable:
    """exp(beta_j) with Wald intervals on the log scale, per covariate."""

    terms: tuple[str, ...]
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    se_log: np.ndarray
    level: float


def time_ratios(fit: AftFit, level: float = 0.95) -> TimeRatioTable:
    """Multiplicative covariate effects on typical survival time."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if fit.covariance is None:
        raise ValueError("fit has no covariance; time ratios unavailable")
    p = len(fit.params.beta)
    z = special.ndtri(0.5 + level / 2.0)
    beta = np.array(fit.params.beta)
    se = np.sqrt(np.diag(fit.covariance)[1 : 1 + p])
    terms = fit.covariate_names or tuple(f"x{j + 1}" for j in range(p))
    return TimeRatioTable(
        terms=tuple(terms),
        estimate=np.exp(beta),
        lower=np.exp(beta - z * se),
        upper=np.exp(beta + z * se),
        se_log=se,
        level=level,
    )


def predict_survival(fit: AftFit, covariates, grid) -> np.ndarray:
    """Pointwise survival S(t | x) under the fitted family."""
    x = np.asarray(covariates, dtype=float).ravel()
    if x.size != len(fit.params.beta):
        raise ValueError(f"expected {len(fit.params.beta)} covariates, got {x.size}")
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be ascending and non-negative")
    eta = fit.params.mu + float(x @ np.array(fit.params.beta)) if x.size else fit.params.mu
    if fit.family is FamilyKind.WEIBULL:
        return weibull_survival(grid, math.exp(eta), fit.params.shape)
    return lognormal_survival(grid, eta, fit.params.shape)
