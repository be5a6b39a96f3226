"""Evaluation metrics: integrated squared error, Brier scores, coverage,
and the pseudo-right-censoring Kaplan-Meier benchmark.

All metrics are truth-based: the simulator records every true event time,
so Brier scores need no censoring reweighting and ISE compares directly
against the generating survival curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import CensorKind, Dataset, StepSurvival

__all__ = [
    "IseResult",
    "MetricReport",
    "ise",
    "brier_score",
    "ibs",
    "km_pseudo_right",
    "empirical_coverage",
    "as_survival_callable",
]


def as_survival_callable(curve):
    """Adapt a StepSurvival or plain callable to a vectorized S(t)."""
    if isinstance(curve, StepSurvival):
        return curve.evaluate
    if callable(curve):
        return lambda t: np.asarray(curve(t), dtype=float)
    raise TypeError(f"not a survival curve: {curve!r}")


class IseResult(NamedTuple):
    raw: float
    normalized: float


def ise(estimate, truth, t_max: float, grid_points: int = 512) -> IseResult:
    """Trapezoidal integral of (S_hat - S)^2 on [0, t_max].

    Returns both the raw integral and its t_max-normalized value.
    """
    if t_max <= 0:
        raise ValueError("t_max must be > 0")
    grid = np.linspace(0.0, t_max, grid_points)
    diff = as_survival_callable(estimate)(grid) - as_survival_callable(truth)(grid)
    raw = float(np.trapezoid(diff * diff, grid))
    return IseResult(raw=raw, normalized=raw / t_max)


def brier_score(predicted, true_times, t: float) -> float:
    """Mean squared error of survival predictions against 1{T_i > t}."""
    predicted = np.asarray(predicted, dtype=float)
    true_times = np.asarray(true_times, dtype=float)
    if predicted.shape != true_times.shape:
        raise ValueError("predictions and true times must align")
    indicator = (true_times > t).astype(float)
    return float(np.mean((indicator - predicted) ** 2))


def ibs(predict, true_times, t_max: float, grid_points: int = 512) -> float:
    """Time-averaged Brier score (1/t_max) * integral of BS(t) on [0, t_max].

    ``predict`` maps a time grid to an (n_subjects, n_times) matrix of
    per-subject survival probabilities.
    """
    if t_max <= 0:
        raise ValueError("t_max must be > 0")
    true_times = np.asarray(true_times, dtype=float)
    grid = np.linspace(0.0, t_max, grid_points)
    pred = np.asarray(predict(grid), dtype=float)
    if pred.shape != (true_times.size, grid.size):
        raise ValueError(f"predict must return shape {(true_times.size, grid.size)}")
    indicator = (true_times[:, None] > grid[None, :]).astype(float)
    bs = np.mean((indicator - pred) ** 2, axis=0)
    return float(np.trapezoid(bs, grid) / t_max)


def km_pseudo_right(data: Dataset) -> StepSurvival:
    """Kaplan-Meier benchmark after forcing the data into right censoring.

    Interval and left-censored windows become events at their right
    endpoint, right-censored windows become censorings at their left
    endpoint, exact events stay events.  This deliberately reproduces the
    naive analysis the interval-aware estimators are compared against.
    """
    times = []
    events = []
    for obs in data.observations:
        if obs.kind is CensorKind.RIGHT:
            times.append(obs.effective_bounds()[0])
            events.append(False)
        elif obs.kind is CensorKind.EXACT:
            times.append(obs.left)
            events.append(True)
        else:
            times.append(obs.effective_bounds()[1])
            events.append(True)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    knots = []
    values = []
    survival = 1.0
    for t in np.unique(times[events]):
        at_risk = int(np.sum(times >= t))
        deaths = int(np.sum(events & (times == t)))
        survival *= (at_risk - deaths) / at_risk
        knots.append(t)
        values.append(survival)
    return StepSurvival(np.asarray(knots), np.asarray(values))


def empirical_coverage(bands, truth, grid) -> tuple[float, float]:
    """Pointwise and simultaneous truth coverage of replicate bands.

    Pointwise: share of (replicate, grid point) pairs with the truth inside
    the band.  Simultaneous: share of replicates containing the truth at
    every grid point.  Bands on their own grids are interpolated.
    """
    bands = list(bands)
    if len(bands) < 50:
        raise ValueError("need at least 50 replicate bands")
    grid = np.asarray(grid, dtype=float)
    truth_values = as_survival_callable(truth)(grid)
    pointwise_hits = []
    simultaneous_hits = []
    for band in bands:
        lower = np.interp(grid, band.grid, band.lower)
        upper = np.interp(grid, band.grid, band.upper)
        inside = (lower <= truth_values) & (truth_values <= upper)
        pointwise_hits.append(inside.mean())
        simultaneous_hits.append(inside.all())
    return float(np.mean(pointwise_hits)), float(np.mean(simultaneous_hits))


@dataclass(frozen=True)
class MetricReport:
    """One estimator's metrics on one scenario, averaged over replicates."""

    scenario_id: str
    estimator: str
    replicates: int
    ise: float | None = None
    ibs: float | None = None
    coverage_pointwise: float | None = None
    coverage_simultaneous: float | None = None

    def __post_init__(self):
        for name in ("ise", "ibs"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("coverage_pointwise", "coverage_simultaneous"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
