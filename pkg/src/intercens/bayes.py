"""Bayesian AFT inference: interval likelihood, weakly informative priors,
and a gradient-based trajectory sampler.

The posterior combines the interval log-likelihood with normal priors on
mu and beta and a Gamma prior on the positive shape parameter (kappa for
the Weibull family, sigma for the log-normal), sampled on the log scale
with the Jacobian included.  Sampling is leapfrog HMC with dual-averaging
step-size adaptation, a jittered fixed path length, and a constant dense
mass matrix taken from the curvature at the posterior mode.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from ._optimize import maximize
from ._parallel import pmap
from .aft import _fd_hessian, _loglik_and_grad, _prepare, _split_theta, _loglik_terms
from .model import (
    AftParams,
    CensorKind,
    Dataset,
    FamilyKind,
    StepSurvival,
    ZeroMassWarning,
)
from .turnbull import EmFit

__all__ = [
    "PriorSpec",
    "PosteriorDraws",
    "SurvivalBand",
    "PpcSummary",
    "log_posterior",
    "sample_posterior",
    "chain_diagnostics",
    "posterior_survival_band",
    "posterior_predictive_check",
    "band_coverage_vs_em",
    "hmc_sample",
]

#: A proposal whose energy error exceeds this is counted as divergent.
DIVERGENCE_ENERGY = 1000.0

#: Dual-averaging constants (shrinkage target, stabilizer, decay rate).
_DA_GAMMA = 0.05
_DA_T0 = 10.0
_DA_KAPPA = 0.75


@dataclass(frozen=True)
class PriorSpec:
    """Weakly informative prior scales.

    mu ~ N(0, sigma_mu^2), beta_j ~ N(0, sigma_beta^2) and the positive
    shape parameter ~ Gamma(a_shape, b_shape).
    """

    sigma_mu: float = 10.0
    sigma_beta: float = 5.0
    a_shape: float = 2.0
    b_shape: float = 1.0

    def __post_init__(self):
        for name in ("sigma_mu", "sigma_beta", "a_shape", "b_shape"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def _log_prior_and_grad(theta: np.ndarray, p: int, priors: PriorSpec):
    mu, beta, c = theta[0], theta[1 : 1 + p], theta[1 + p]
    a, b = priors.a_shape, priors.b_shape
    lp = (
        -0.5 * mu**2 / priors.sigma_mu**2
        - math.log(priors.sigma_mu)
        - 0.5 * math.log(2.0 * math.pi)
    )
    lp += float(
        np.sum(-0.5 * beta**2 / priors.sigma_beta**2)
        - p * (math.log(priors.sigma_beta) + 0.5 * math.log(2.0 * math.pi))
    )
    # Gamma(a, b) on exp(c) plus the log-Jacobian c of the log transform.
    exp_c = float(np.exp(np.minimum(c, 700.0)))
    lp += a * math.log(b) - math.lgamma(a) + a * c - b * exp_c
    grad = np.concatenate(
        (
            [-mu / priors.sigma_mu**2],
            -beta / priors.sigma_beta**2,
            [a - b * exp_c],
        )
    )
    return lp, grad


def log_posterior(
    params: AftParams,
    data: Dataset,
    priors: PriorSpec = PriorSpec(),
    family=FamilyKind.WEIBULL,
):
    """Unnormalized log posterior and its gradient at ``params``."""
    family = FamilyKind(family)
    if len(params.beta) != data.n_covariates:
        raise ValueError("beta length must match the covariate dimension")
    theta = params.as_vector()
    ll, grad_ll = _loglik_and_grad(theta, _prepare(data), family)
    lp, grad_lp = _log_prior_and_grad(theta, data.n_covariates, priors)
    return ll + lp, grad_ll + grad_lp


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """MCMC output: (chains, iterations, p + 2) draws plus run metadata."""

    draws: np.ndarray
    family: FamilyKind
    parameters: tuple[str, ...]
    covariate_names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        if draws.ndim != 3:
            raise ValueError("draws must be (chains, iterations, params)")
        if draws.shape[0] < 2:
            raise ValueError("need at least 2 chains for diagnostics")
        if not np.all(np.isfinite(draws)):
            raise ValueError("draws contain non-finite values")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_iterations(self) -> int:
        return self.draws.shape[1]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])


def _leapfrog(logp_grad, x, p, grad, eps, n_steps, metric_chol):
    """Leapfrog integration with kinetic energy p' M^-1 p / 2.

    Bails out with log density -inf as soon as the trajectory leaves the
    finite region; the caller counts that proposal as divergent.
    """
    x = x.copy()
    p = p + 0.5 * eps * grad
    f = -math.inf
    for step in range(n_steps):
        if not np.all(np.isfinite(p)):
            return x, p, -math.inf, grad
        x = x + eps * linalg.cho_solve((metric_chol, True), p)
        if not np.all(np.isfinite(x)):
            return x, p, -math.inf, grad
        f, grad = logp_grad(x)
        if not math.isfinite(f):
            return x, p, -math.inf, grad
        if step < n_steps - 1:
            p = p + eps * grad
    p = p + 0.5 * eps * grad
    return x, p, f, grad


def hmc_sample(
    logp_grad,
    x0,
    n_draws: int,
    warmup: int,
    rng,
    metric: np.ndarray | None = None,
    target_accept: float = 0.8,
    path_length: int = 16,
):
    """Single-chain HMC with dual-averaging step size and jittered paths.

    ``metric`` is the constant mass matrix M (momenta ~ N(0, M)); the number
    of leapfrog steps per iteration is drawn uniformly from
    [path_length // 2 + 1, path_length].  Returns (draws, info dict).
    """
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    metric = np.eye(d) if metric is None else np.asarray(metric, dtype=float)
    chol = linalg.cholesky(metric, lower=True)
    f, g = logp_grad(x)
    if not math.isfinite(f):
        raise ValueError("log density must be finite at the initial point")
    eps = _find_reasonable_step(logp_grad, x, f, g, chol, rng)
    mu_da = math.log(10.0 * eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    draws = np.empty((n_draws, d))
    accepts = []
    divergences = 0
    lo = path_length // 2 + 1
    for it in range(warmup + n_draws):
        z = rng.standard_normal(d)
        p0 = chol @ z
        n_steps = int(rng.integers(lo, path_length + 1))
        kinetic0 = 0.5 * float(z @ z)
        x_new, p_new, f_new, g_new = _leapfrog(logp_grad, x, p0, g, eps, n_steps, chol)
        if np.all(np.isfinite(p_new)) and math.isfinite(f_new):
            kinetic1 = 0.5 * float(p_new @ linalg.cho_solve((chol, True), p_new))
            energy_error = (-f_new + kinetic1) - (-f + kinetic0)
        else:
            energy_error = math.inf
        if not math.isfinite(energy_error) or energy_error > DIVERGENCE_ENERGY:
            divergences += 1
            alpha = 0.0
        else:
            alpha = 1.0 if energy_error <= 0 else math.exp(-energy_error)
            if energy_error <= 0 or rng.random() < alpha:
                x, f, g = x_new, f_new, g_new
        if it < warmup:
            t = it + 1
            frac = 1.0 / (t + _DA_T0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - alpha)
            log_eps = mu_da - math.sqrt(t) / _DA_GAMMA * h_bar
            w = t ** (-_DA_KAPPA)
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar
            eps = math.exp(log_eps)
            if it == warmup - 1:
                eps = math.exp(log_eps_bar)
        else:
            draws[it - warmup] = x
            accepts.append(alpha)
    info = {
        "step_size": eps,
        "accept_rate": float(np.mean(accepts)) if accepts else 0.0,
        "divergences": divergences,
    }
    return draws, info


def _find_reasonable_step(logp_grad, x, f, g, chol, rng) -> float:
    """Double or halve a unit step until the accept rate crosses 1/2."""
    z = rng.standard_normal(x.size)
    p0 = chol @ z
    kinetic0 = 0.5 * float(z @ z)

    def log_accept(step):
        x1, p1, f1, _ = _leapfrog(logp_grad, x, p0, g, step, 1, chol)
        if not (math.isfinite(f1) and np.all(np.isfinite(p1))):
            return -math.inf
        kinetic1 = 0.5 * float(p1 @ linalg.cho_solve((chol, True), p1))
        return (f1 - kinetic1) - (f - kinetic0)

    eps = 1.0
    la = log_accept(eps)
    while not math.isfinite(la) and eps > 1e-10:
        eps *= 0.1
        la = log_accept(eps)
    direction = 1.0 if la > math.log(0.5) else -1.0
    while 1e-10 < eps < 1e6:
        eps *= 2.0**direction
        la = log_accept(eps)
        if direction * la < direction * math.log(0.5):
            break
    return eps


def _param_names(data: Dataset) -> tuple[str, ...]:
    return ("mu", *(f"beta_{name}" for name in data.covariate_names), "log_shape")


def _posterior_closure(data: Dataset, priors: PriorSpec, family: FamilyKind):
    prep = _prepare(data)
    p = data.n_covariates

    def logp_grad(theta):
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return -math.inf, np.zeros_like(theta)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroMassWarning)
            ll, g_ll = _loglik_and_grad(theta, prep, family)
        lp, g_lp = _log_prior_and_grad(theta, p, priors)
        total = ll + lp
        if not math.isfinite(total):
            return -math.inf, np.zeros_like(theta)
        return total, g_ll + g_lp

    return logp_grad


def _posterior_mode(logp_grad, data: Dataset) -> np.ndarray:
    """Posterior mode via standardized-coordinate ascent plus Newton polish."""
    from .aft import _default_mu0, _standardization

    p = data.n_covariates
    xbar, xsd = _standardization(data.covariate_matrix())
    d = p + 2
    # theta = transform @ theta_std undoes the covariate standardization.
    transform = np.zeros((d, d))
    transform[0, 0] = 1.0
    for j in range(p):
        transform[0, 1 + j] = -xbar[j] / xsd[j]
        transform[1 + j, 1 + j] = 1.0 / xsd[j]
    transform[d - 1, d - 1] = 1.0

    def scaled(theta_std):
        value, grad = logp_grad(transform @ theta_std)
        return value, transform.T @ grad

    theta0 = np.concatenate(([_default_mu0(data)], np.zeros(p), [0.0]))
    result = maximize(scaled, theta0, gtol=1e-6, max_iter=500)
    theta = transform @ result.x
    value, grad = logp_grad(theta)
    for _ in range(20):
        if np.max(np.abs(grad)) < 1e-8:
            break
        hess = _fd_hessian(lambda th: logp_grad(th)[1], theta)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        moved = False
        for scale in (1.0, 0.5, 0.25, 0.125):
            candidate = theta - scale * step
            cand_value, cand_grad = logp_grad(candidate)
            if math.isfinite(cand_value) and cand_value >= value - 1e-12:
                theta, value, grad = candidate, cand_value, cand_grad
                moved = True
                break
        if not moved:
            break
    return theta


def _run_chain(args):
    data, priors, family, mode, metric, warmup, iters, target_accept, path_length, seed, chain = args
    rng = np.random.default_rng([seed, chain])
    logp_grad = _posterior_closure(data, priors, family)
    chol = linalg.cholesky(metric, lower=True)
    jitter = linalg.solve_triangular(chol, rng.standard_normal(mode.size), lower=True, trans="T")
    x0 = mode + 0.1 * jitter
    if not math.isfinite(logp_grad(x0)[0]):
        x0 = mode
    return hmc_sample(
        logp_grad,
        x0,
        n_draws=iters,
        warmup=warmup,
        rng=rng,
        metric=metric,
        target_accept=target_accept,
        path_length=path_length,
    )


def sample_posterior(
    data: Dataset,
    priors: PriorSpec = PriorSpec(),
    family=FamilyKind.WEIBULL,
    chains: int = 4,
    warmup: int = 1000,
    iters: int = 1000,
    seed: int = 0,
    target_accept: float = 0.8,
    path_length: int = 16,
    workers: int = 1,
) -> PosteriorDraws:
    """Draw from the AFT posterior with per-chain derived RNG streams.

    The mass matrix is the negative posterior Hessian at the mode, so the
    sampler works in approximately whitened coordinates; warmup draws are
    discarded.  More than 10% divergent transitions sets a warning flag in
    the metadata instead of raising.
    """
    family = FamilyKind(family)
    if chains < 2:
        raise ValueError("need at least 2 chains")
    if warmup < 200:
        raise ValueError("need at least 200 warmup iterations")
    logp_grad = _posterior_closure(data, priors, family)
    mode = _posterior_mode(logp_grad, data)
    hess = _fd_hessian(lambda th: logp_grad(th)[1], mode)
    metric = -hess
    metric = 0.5 * (metric + metric.T)
    eigvals, eigvecs = np.linalg.eigh(metric)
    floor = max(1e-8, 1e-8 * eigvals.max())
    metric = (eigvecs * np.maximum(eigvals, floor)) @ eigvecs.T
    results = pmap(
        _run_chain,
        [
            (data, priors, family, mode, metric, warmup, iters, target_accept, path_length, seed, c)
            for c in range(chains)
        ],
        workers=workers,
    )
    draws = np.stack([r[0] for r in results])
    infos = [r[1] for r in results]
    total = chains * (warmup + iters)
    n_divergent = sum(info["divergences"] for info in infos)
    divergence_warning = n_divergent > 0.1 * total
    if divergence_warning:
        warnings.warn(
            f"{n_divergent} divergent transitions out of {total}; "
            "posterior geometry may be misfit",
            stacklevel=2,
        )
    meta = {
        "warmup": warmup,
        "seed": seed,
        "chains": chains,
        "iterations": iters,
        "target_accept": target_accept,
        "path_length": path_length,
        "divergence_energy": DIVERGENCE_ENERGY,
        "step_sizes": [info["step_size"] for info in infos],
        "accept_rates": [info["accept_rate"] for info in infos],
        "divergences": n_divergent,
        "divergence_warning": divergence_warning,
    }
    return PosteriorDraws(
        draws=draws,
        family=family,
        parameters=_param_names(data),
        covariate_names=data.covariate_names,
        meta=meta,
    )


def chain_diagnostics(draws: PosteriorDraws):
    """Split R-hat and rank-normalized bulk/tail ESS per parameter."""
    from .diagnostics import summarize_chains

    return summarize_chains(draws.draws, draws.parameters)


@dataclass(frozen=True, eq=False)
class SurvivalBand:
    """Pointwise posterior quantile band for S(t | x) on a time grid."""

    grid: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


def _survival_curves(thetas: np.ndarray, x: np.ndarray, grid: np.ndarray, family: FamilyKind):
    """S(t | x, theta_s) for every draw; returns (draws, len(grid))."""
    p = x.size
    mu, beta, log_shape = _split_theta(thetas, p)
    eta = mu + (beta @ x if p else 0.0)
    shape = np.exp(log_shape)
    with np.errstate(divide="ignore"):
        if family is FamilyKind.WEIBULL:
            return np.exp(-np.exp(shape[:, None] * (np.log(grid)[None, :] - eta[:, None])))
        z = (np.log(grid)[None, :] - eta[:, None]) / shape[:, None]
        return special.ndtr(-z)


def posterior_survival_band(
    draws: PosteriorDraws, covariates, grid, level: float = 0.95
) -> SurvivalBand:
    """Pointwise (1 - level)/2, 1/2 and 1 - (1 - level)/2 survival quantiles."""
    if not 0 < level <= 1:
        raise ValueError("level must be in (0, 1]")
    x = np.asarray(covariates, dtype=float).ravel()
    if x.size != len(draws.covariate_names):
        raise ValueError("covariate length mismatch")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be ascending")
    curves = _survival_curves(draws.flat(), x, grid, draws.family)
    alpha = (1.0 - level) / 2.0
    return SurvivalBand(
        grid=grid,
        median=np.quantile(curves, 0.5, axis=0),
        lower=np.quantile(curves, alpha, axis=0),
        upper=np.quantile(curves, 1.0 - alpha, axis=0),
        level=level,
    )


@dataclass(frozen=True, eq=False)
class PpcSummary:
    """Posterior predictive interval-capture check.

    ``capture_rate[i]`` is the fraction of replicated event times falling
    inside observation i's censoring window; ``model_prob[i]`` is the
    posterior-mean probability the model assigns to that window.  A mean
    capture rate more than three Monte Carlo standard errors below the mean
    model probability flags the fit.
    """

    capture_rate: np.ndarray
    model_prob: np.ndarray
    mean_capture: float
    mean_model_prob: float
    mc_se: float
    n_replicates: int
    flagged: bool


def posterior_predictive_check(
    draws: PosteriorDraws, data: Dataset, n_replicates: int = 200, seed: int = 0
) -> PpcSummary:
    """Simulate event times from posterior draws and score interval capture."""
    if n_replicates < 100:
        raise ValueError("need at least 100 replicates")
    flat = draws.flat()
    rng = np.random.default_rng([seed])
    idx = rng.integers(0, flat.shape[0], size=n_replicates)
    thetas = flat[idx]
    X = data.covariate_matrix()
    p = X.shape[1]
    mu, beta, log_shape = _split_theta(thetas, p)
    eta = mu[:, None] + beta @ X.T
    shape = np.exp(log_shape)[:, None]
    if draws.family is FamilyKind.WEIBULL:
        u = rng.random((n_replicates, data.n))
        t_rep = np.exp(eta) * (-np.log(u)) ** (1.0 / shape)
    else:
        t_rep = np.exp(eta + shape * rng.standard_normal((n_replicates, data.n)))
    lo = np.empty(data.n)
    hi = np.empty(data.n)
    for i, obs in enumerate(data.observations):
        lo[i], hi[i] = obs.effective_bounds()
    captured = (t_rep > lo[None, :]) & (t_rep <= hi[None, :])
    capture_rate = captured.mean(axis=0)
    with np.errstate(over="ignore", invalid="ignore"):
        ll = _loglik_terms(flat, _prepare(data), draws.family)
    model_prob = np.exp(ll).mean(axis=0)
    per_rep = captured.mean(axis=1)
    mc_se = float(per_rep.std(ddof=1) / math.sqrt(n_replicates))
    mean_capture = float(capture_rate.mean())
    mean_model_prob = float(model_prob.mean())
    flagged = mean_capture < mean_model_prob - 3.0 * mc_se
    return PpcSummary(
        capture_rate=capture_rate,
        model_prob=model_prob,
        mean_capture=mean_capture,
        mean_model_prob=mean_model_prob,
        mc_se=mc_se,
        n_replicates=n_replicates,
        flagged=flagged,
    )


def band_coverage_vs_em(band: SurvivalBand, em: EmFit) -> float:
    """Fraction of EM step heights inside the posterior band.

    The band is interpolated onto the EM knots and compared against the
    survival value just after each drop.
    """
    knots = em.curve.knots
    if knots.size == 0:
        raise ValueError("EM curve has no knots")
    if band.grid[0] > knots[0] or band.grid[-1] < knots[-1]:
        raise ValueError("band grid must span the EM knot range")
    heights = em.curve.values
    lower = np.interp(knots, band.grid, band.lower)
    upper = np.interp(knots, band.grid, band.upper)
    inside = (lower <= heights) & (heights <= upper)
    return float(inside.mean())
