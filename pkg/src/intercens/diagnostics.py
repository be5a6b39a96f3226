"""Split-chain convergence diagnostics for MCMC draws.

R-hat is the rank-normalized split statistic (the max of the bulk and
folded versions); effective sample sizes use Geyer's initial monotone
sequence on split, rank-normalized chains.  Zero-variance chains are
reported with sentinels rather than NaNs so downstream tables stay usable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = ["ChainDiagnostics", "split_rhat", "ess_bulk", "ess_tail", "summarize_chains"]

#: Reported for the effective sample size when chains have zero variance.
ESS_SENTINEL = 0.0


@dataclass(frozen=True, eq=False)
class ChainDiagnostics:
    """Per-parameter convergence summaries for a chains-by-draws array."""

    parameters: tuple[str, ...]
    rhat: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray


def _as_chains(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-D (chains, draws) array")
    if x.shape[0] < 2 or x.shape[1] < 4:
        raise ValueError("need at least 2 chains and 4 draws")
    return x


def _split_chains(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.vstack([x[:, :half], x[:, half : 2 * half]])


def _z_scale(x: np.ndarray) -> np.ndarray:
    ranks = stats.rankdata(x, method="average").reshape(x.shape)
    return special.ndtri((ranks - 0.5) / x.size)


def _rhat_base(x: np.ndarray) -> float:
    m, n = x.shape
    chain_means = x.mean(axis=1)
    within = x.var(axis=1, ddof=1).mean()
    between = n * chain_means.var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else np.inf
    return float(np.sqrt((n - 1) / n + between / (n * within)))


def split_rhat(x) -> float:
    """Rank-normalized split R-hat; 1.0 up to sampling noise at convergence."""
    x = _as_chains(x)
    if np.ptp(x) == 0:
        warnings.warn("constant chains: R-hat is undefined, reporting 1.0", stacklevel=2)
        return 1.0
    split = _split_chains(x)
    bulk = _rhat_base(_z_scale(split))
    folded = _rhat_base(_z_scale(_split_chains(np.abs(x - np.median(x)))))
    return max(bulk, folded)


def _ess_base(x: np.ndarray) -> float:
    """ESS of split chains from Geyer's initial monotone sequence."""
    m, n = x.shape
    if np.ptp(x) == 0 or n < 4:
        return ESS_SENTINEL
    acov = np.empty((m, n))
    for c in range(m):
        centered = x[c] - x[c].mean()
        full = np.correlate(centered, centered, mode="full")[n - 1 :]
        acov[c] = full / n
    chain_means = x.mean(axis=1)
    mean_var = acov[:, 0].mean() * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += chain_means.var(ddof=1)
    if var_plus == 0:
        return ESS_SENTINEL
    rho = np.zeros(n)
    rho[0] = 1.0
    rho[1] = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    t = 1
    rho_even = rho[0]
    rho_odd = rho[1]
    while t < n - 2 and (rho_even + rho_odd) >= 0.0:
        rho_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        rho[t + 1] = rho_even
        if rho_even + rho_odd >= 0:
            rho[t + 2] = rho_odd
        t += 2
    max_t = t
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t])
            rho[t + 2] = rho[t + 1]
        t += 2
    tail_term = rho[max_t + 1] if max_t + 1 < n else 0.0
    tau = -1.0 + 2.0 * rho[:max_t].sum() + tail_term
    tau = max(tau, 1.0 / np.log10(m * n + 10.0))
    return float(m * n / tau)


def ess_bulk(x) -> float:
    """Effective sample size of the rank-normalized split chains."""
    x = _as_chains(x)
    if np.ptp(x) == 0:
        warnings.warn("constant chains: bulk ESS undefined, reporting sentinel", stacklevel=2)
        return ESS_SENTINEL
    return _ess_base(_z_scale(_split_chains(x)))


def _ess_quantile(x: np.ndarray, prob: float) -> float:
    q = np.quantile(x, prob)
    indicator = (x <= q).astype(float)
    if np.ptp(indicator) == 0:
        return ESS_SENTINEL
    return _ess_base(_z_scale(_split_chains(indicator)))


def ess_tail(x) -> float:
    """Minimum of the 5% and 95% quantile effective sample sizes."""
    x = _as_chains(x)
    if np.ptp(x) == 0:
        warnings.warn("constant chains: tail ESS undefined, reporting sentinel", stacklevel=2)
        return ESS_SENTINEL
    return min(_ess_quantile(x, 0.05), _ess_quantile(x, 0.95))


def summarize_chains(draws: np.ndarray, parameters) -> ChainDiagnostics:
    """Diagnostics for a (chains, draws, params) array, one row per parameter."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 3:
        raise ValueError("expected a (chains, draws, params) array")
    if draws.shape[0] < 2:
        raise ValueError("need at least 2 chains")
    if draws.shape[1] < 100:
        raise ValueError("need at least 100 kept draws per chain")
    names = tuple(parameters)
    rhat = np.array([split_rhat(draws[:, :, k]) for k in range(draws.shape[2])])
    bulk = np.array([ess_bulk(draws[:, :, k]) for k in range(draws.shape[2])])
    tail = np.array([ess_tail(draws[:, :, k]) for k in range(draws.shape[2])])
    return ChainDiagnostics(parameters=names, rhat=rhat, ess_bulk=bulk, ess_tail=tail)
