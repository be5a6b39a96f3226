"""Nonparametric maximum likelihood for interval-censored data via EM.

The estimator places all probability mass on the maximal-intersection
("Turnbull") intervals determined by the observed endpoints and finds the
mass vector by the classical self-consistency iteration: expected interval
memberships are averaged into new masses until a fixed point is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CensorKind, Dataset, StepSurvival, EXACT_INTERVAL_EPS
from ._parallel import pmap

__all__ = [
    "TurnbullSupport",
    "EmFit",
    "BootstrapBand",
    "turnbull_support",
    "em_step",
    "fit_npmle",
    "bootstrap_bands",
    "InconsistentDataError",
    "DegenerateWeightError",
]

#: Converged masses below this are truncated to zero and the vector
#: renormalized, so emitted curves carry no numerical dust.
MASS_FLOOR = 1e-12


class InconsistentDataError(ValueError):
    """No mass assignment can explain every observation."""


class DegenerateWeightError(ValueError):
    """An observation has zero total mass over its membership set."""


def _effective_interval(obs) -> tuple[float, float]:
    # Exact events become the surrogate window (t - eps, t]; mass lives on
    # intervals, never on points.
    if obs.kind is CensorKind.EXACT:
        return obs.left - EXACT_INTERVAL_EPS, obs.left
    return obs.effective_bounds()


@dataclass(frozen=True, eq=False)
class TurnbullSupport:
    """Maximal-intersection intervals and per-observation membership sets.

    ``intervals[j] = (a_lo, a_hi)`` is the half-open window (a_lo, a_hi],
    disjoint and ascending; ``membership[i, j]`` is True when interval j is
    contained in observation i's censoring window.
    """

    intervals: tuple[tuple[float, float], ...]
    membership: np.ndarray

    @property
    def m(self) -> int:
        return len(self.intervals)

    @property
    def n(self) -> int:
        return self.membership.shape[0]


def turnbull_support(data: Dataset) -> TurnbullSupport:
    """Construct the support intervals carrying all NPMLE mass.

    Scan the pooled endpoints in ascending order (a right endpoint sorts
    before a left endpoint at ties, matching the open-left/closed-right
    convention): every left endpoint immediately followed by a right
    endpoint spans one support interval.
    """
    bounds = [_effective_interval(obs) for obs in data.observations]
    left_set = {lo for lo, _ in bounds}
    right_set = {hi for _, hi in bounds}
    tagged: list[tuple[float, str]] = []
    for v in sorted(left_set | right_set):
        if v in right_set:
            tagged.append((v, "R"))
        if v in left_set:
            tagged.append((v, "L"))
    intervals = [
        (tagged[k][0], tagged[k + 1][0])
        for k in range(len(tagged) - 1)
        if tagged[k][1] == "L" and tagged[k + 1][1] == "R"
    ]
    if not intervals:
        raise InconsistentDataError("no maximal-intersection interval exists")
    lo = np.array([a for a, _ in intervals])
    hi = np.array([b for _, b in intervals])
    obs_lo = np.array([a for a, _ in bounds])
    obs_hi = np.array([b for _, b in bounds])
    membership = (obs_lo[:, None] <= lo[None, :]) & (hi[None, :] <= obs_hi[:, None])
    empty = ~membership.any(axis=1)
    if empty.any():
        raise InconsistentDataError(
            f"observations with empty membership: {np.flatnonzero(empty).tolist()}"
        )
    return TurnbullSupport(tuple(intervals), membership)


def _check_mass_vector(p: np.ndarray, m: int) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.shape != (m,):
        raise ValueError(f"mass vector must have length {m}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("masses must be non-negative and sum to 1")
    return p


def log_likelihood(p: np.ndarray, support: TurnbullSupport) -> float:
    """Observed-data log-likelihood sum_i log(sum_{j in J_i} p_j)."""
    totals = support.membership @ np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(totals)))


def em_step(p: np.ndarray, support: TurnbullSupport) -> np.ndarray:
    """One self-consistency update of the mass vector.

    E-step: w_ij = p_j / sum_{r in J_i} p_r for j in J_i.
    M-step: p_j <- (1/n) sum_i w_ij.
    """
    p = _check_mass_vector(p, support.m)
    totals = support.membership @ p
    if np.any(totals <= 0):
        bad = np.flatnonzero(totals <= 0).tolist()
        raise DegenerateWeightError(f"zero membership mass for observations {bad}")
    n = support.n
    return p * (support.membership.T @ (1.0 / totals)) / n


@dataclass(frozen=True, eq=False)
class EmFit:
    """Result of the EM iteration: support, masses, curve, and trace."""

    support: TurnbullSupport
    masses: np.ndarray
    curve: StepSurvival
    loglik_trace: np.ndarray
    iterations: int
    converged: bool


def _curve_from_masses(support: TurnbullSupport, masses: np.ndarray) -> StepSurvival:
    # The NPMLE is undefined inside each support interval; the emitted curve
    # keeps S flat there and drops the whole mass at the right endpoint.
    knots = []
    values = []
    cum = 0.0
    for (lo, hi), pj in zip(support.intervals, masses):
        cum += pj
        if math.isfinite(hi):
            knots.append(hi)
            values.append(min(1.0, max(0.0, 1.0 - cum)))
    return StepSurvival(np.array(knots), np.array(values))


def fit_npmle(data: Dataset, tol: float = 1e-8, max_iter: int = 10000) -> EmFit:
    """Fit the NPMLE by EM from a uniform start.

    Iterates :func:`em_step` until the largest single-mass change falls
    below ``tol`` or ``max_iter`` is hit (the best iterate is then returned
    with ``converged=False``).  The log-likelihood trace is recorded at the
    start and after every update; EM guarantees it never decreases.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    support = turnbull_support(data)
    p = np.full(support.m, 1.0 / support.m)
    trace = [log_likelihood(p, support)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p_new = em_step(p, support)
        trace.append(log_likelihood(p_new, support))
        delta = float(np.max(np.abs(p_new - p)))
        p = p_new
        if delta < tol:
            converged = True
            break
    p = np.where(p < MASS_FLOOR, 0.0, p)
    p = p / p.sum()
    return EmFit(
        support=support,
        masses=p,
        curve=_curve_from_masses(support, p),
        loglik_trace=np.array(trace),
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True, eq=False)
class BootstrapBand:
    """Pointwise percentile band for the NPMLE on a fixed time grid."""

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_boot: int


def default_grid(data: Dataset, points: int = 201) -> np.ndarray:
    """Evaluation grid from 0 to the largest finite endpoint."""
    finite = [
        b
        for obs in data.observations
        for b in _effective_interval(obs)
        if math.isfinite(b) and b > 0
    ]
    if not finite:
        raise InconsistentDataError("dataset has no finite endpoint")
    return np.linspace(0.0, max(finite), points)


def _bootstrap_replicate(args) -> np.ndarray:
    data, grid, seed, index = args
    rng = np.random.default_rng([seed, index])
    for _ in range(10):
        idx = rng.integers(0, data.n, size=data.n)
        resampled = Dataset(
            tuple(data.observations[i] for i in idx), data.covariate_names
        )
        try:
            fit = fit_npmle(resampled)
        except InconsistentDataError:
            continue
        return fit.curve.evaluate(grid)
    raise InconsistentDataError(f"bootstrap replicate {index} kept producing empty support")


def bootstrap_bands(
    data: Dataset,
    n_boot: int = 500,
    level: float = 0.95,
    seed: int = 0,
    grid: np.ndarray | None = None,
    workers: int = 1,
) -> BootstrapBand:
    """Percentile bootstrap band for the NPMLE.

    Observations are resampled with replacement ``n_boot`` times and the
    NPMLE refitted; each replicate's RNG stream is derived from
    (seed, replicate index), so results do not depend on worker count.
    """
    if n_boot < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if grid is None:
        grid = default_grid(data)
    grid = np.asarray(grid, dtype=float)
    curves = np.stack(
        pmap(
            _bootstrap_replicate,
            [(data, grid, seed, b) for b in range(n_boot)],
            workers=workers,
        )
    )
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(curves, alpha, axis=0)
    upper = np.quantile(curves, 1.0 - alpha, axis=0)
    return BootstrapBand(grid=grid, lower=lower, upper=upper, level=level, n_boot=n_boot)
