"""Core data model and likelihood primitives for interval-censored survival.

An event time T is recorded only through a censoring window (left, right]:
a finite window with left < right is a genuine interval observation, left = 0
encodes left censoring, right = +inf encodes right censoring, and
left = right encodes an exactly observed event.  All times are in months.
The four likelihood cases built on this classification are shared by every
estimator in the package.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "CensorKind",
    "Observation",
    "Dataset",
    "StepSurvival",
    "FamilyKind",
    "AftParams",
    "classify_observation",
    "weibull_survival",
    "weibull_density",
    "lognormal_survival",
    "lognormal_density",
    "log_lik_contribution",
    "step_survival_eval",
    "InvalidIntervalError",
    "MonotonicityError",
    "ZeroMassWarning",
    "DAYS_PER_MONTH",
    "EXACT_INTERVAL_EPS",
]

#: Day-to-month conversion used when ingesting raw follow-up times.
DAYS_PER_MONTH = 30.4375

#: Width of the surrogate interval (t - eps, t] standing in for an exact
#: event time wherever a genuine interval is required (the EM support).
EXACT_INTERVAL_EPS = 1e-8


class InvalidIntervalError(ValueError):
    """Raised when (left, right) cannot describe a censoring window."""


class MonotonicityError(ValueError):
    """Raised when a survival callable increases between two endpoints."""


class ZeroMassWarning(UserWarning):
    """Signals a likelihood contribution of exactly zero mass."""


class CensorKind(str, enum.Enum):
    """The four censoring cases of the unified interval likelihood."""

    INTERVAL = "interval"
    LEFT = "left"
    RIGHT = "right"
    EXACT = "exact"


class FamilyKind(str, enum.Enum):
    """Parametric families available for accelerated failure time fits."""

    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"


def classify_observation(left: float, right: float) -> CensorKind:
    """Classify a censoring window by its endpoints.

    Rules: right = +inf is right censoring, left = 0 with finite right is
    left censoring, left = right > 0 is an exact event, anything else with
    left < right is a proper interval.

    Raises
    ------
    InvalidIntervalError
        If endpoints are out of order, non-finite where finiteness is
        required, or the window is the degenerate point {0}.
    """
    if math.isnan(left) or math.isnan(right):
        raise InvalidIntervalError("endpoints must not be NaN")
    if math.isinf(left):
        raise InvalidIntervalError("left endpoint must be finite")
    if left < 0:
        raise InvalidIntervalError(f"left endpoint must be >= 0, got {left}")
    if left > right:
        raise InvalidIntervalError(f"invalid interval: left={left} > right={right}")
    if left == right:
        if left == 0:
            raise InvalidIntervalError("the point interval at 0 carries no probability mass")
        return CensorKind.EXACT
    if math.isinf(right):
        return CensorKind.RIGHT
    if left == 0:
        return CensorKind.LEFT
    return CensorKind.INTERVAL


@dataclass(frozen=True)
class Observation:
    """One subject's censoring window plus covariates.

    ``kind`` defaults to the classification implied by the endpoints; an
    explicit kind is accepted so that files carrying a censoring label are
    loaded verbatim (a left-censoring label is trusted even when the stored
    left endpoint is positive).
    """

    left: float
    right: float
    covariates: tuple[float, ...] = ()
    kind: CensorKind | None = None

    def __post_init__(self):
        implied = classify_observation(self.left, self.right)
        if self.kind is None:
            object.__setattr__(self, "kind", implied)
        else:
            kind = CensorKind(self.kind)
            object.__setattr__(self, "kind", kind)
            if kind is CensorKind.EXACT and self.left != self.right:
                raise InvalidIntervalError("exact observation requires left == right")
            if kind is not CensorKind.EXACT and self.left >= self.right:
                raise InvalidIntervalError("censored observation requires left < right")
            if (kind is CensorKind.RIGHT) != math.isinf(self.right):
                raise InvalidIntervalError(
                    "right censoring and an infinite right endpoint must coincide"
                )
        object.__setattr__(self, "covariates", tuple(float(v) for v in self.covariates))
        if any(not math.isfinite(v) for v in self.covariates):
            raise ValueError("covariates must be finite")

    def effective_bounds(self) -> tuple[float, float]:
        """Censoring window actually used by the likelihood cases.

        Left censoring always means T <= right, so the window is (0, right]
        regardless of the stored left endpoint; right censoring means
        T > left.  Exact events return the degenerate (t, t).
        """
        if self.kind is CensorKind.LEFT:
            return 0.0, self.right
        if self.kind is CensorKind.RIGHT:
            return self.left, math.inf
        return self.left, self.right


@dataclass(frozen=True)
class Dataset:
    """An indexed collection of observations sharing one covariate layout."""

    observations: tuple[Observation, ...]
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if len(self.observations) < 1:
            raise ValueError("dataset needs at least one observation")
        p = len(self.covariate_names)
        for i, obs in enumerate(self.observations):
            if len(obs.covariates) != p:
                raise ValueError(
                    f"observation {i} has {len(obs.covariates)} covariates, expected {p}"
                )

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)

    def covariate_matrix(self) -> np.ndarray:
        return np.array([obs.covariates for obs in self.observations], dtype=float).reshape(
            self.n, self.n_covariates
        )

    def drop_covariates(self) -> "Dataset":
        """Same censoring windows with the covariates stripped."""
        stripped = tuple(
            Observation(o.left, o.right, (), o.kind) for o in self.observations
        )
        return Dataset(stripped, ())


@dataclass(frozen=True, eq=False)
class StepSurvival:
    """Right-continuous, non-increasing step estimate of S(t).

    ``values[j]`` is the survival probability at and after ``knots[j]``;
    S(t) = 1 for t below the first knot.  An empty knot vector is the
    constant curve S = 1.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if knots.shape != values.shape:
            raise ValueError("knots and values must have equal length")
        if knots.size and not np.all(np.diff(knots) > 0):
            raise ValueError("knots must be strictly increasing")
        if knots.size and not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if np.any(values < -1e-12) or np.any(values > 1 + 1e-12):
            raise ValueError("survival values must lie in [0, 1]")
        if values.size and np.any(np.diff(values) > 1e-12):
            raise ValueError("survival values must be non-increasing")

    def evaluate(self, t) -> np.ndarray | float:
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("time must be >= 0")
        extended = np.concatenate(([1.0], self.values))
        idx = np.searchsorted(self.knots, t_arr, side="right")
        out = extended[idx]
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def __call__(self, t):
        return self.evaluate(t)


def step_survival_eval(curve: StepSurvival, t) -> np.ndarray | float:
    """Right-continuous evaluation of a step survival curve."""
    return curve.evaluate(t)


@dataclass(frozen=True)
class AftParams:
    """Location/scale parameters of a parametric AFT model.

    ``log_shape`` is the unconstrained shape coordinate: log kappa for the
    Weibull family (with sigma = 1/kappa) and log sigma for the log-normal.
    The per-subject time scale is exp(mu + x' beta).
    """

    mu: float
    beta: tuple[float, ...] = ()
    log_shape: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "log_shape", float(self.log_shape))
        vec = (self.mu, *self.beta, self.log_shape)
        if any(not math.isfinite(v) for v in vec):
            raise ValueError("parameters must be finite")

    @property
    def shape(self) -> float:
        return math.exp(self.log_shape)

    def as_vector(self) -> np.ndarray:
        return np.array([self.mu, *self.beta, self.log_shape], dtype=float)

    @classmethod
    def from_vector(cls, theta) -> "AftParams":
        theta = np.asarray(theta, dtype=float).ravel()
        return cls(mu=theta[0], beta=tuple(theta[1:-1]), log_shape=theta[-1])


def _check_positive(name: str, value) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be finite and > 0")


def weibull_survival(t, scale, shape):
    """Weibull survival exp(-(t / scale)^shape).

    Reduces to the exponential for shape = 1; S(0) = 1 and S decays to 0.
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise ValueError("t must be finite and >= 0")
    _check_positive("scale", scale)
    _check_positive("shape", shape)
    out = np.exp(-((t_arr / scale) ** shape))
    return float(out) if t_arr.ndim == 0 else out


def weibull_density(t, scale, shape):
    """Weibull density matching :func:`weibull_survival`."""
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any(t_arr < 0):
        raise ValueError("t must be finite and >= 0")
    _check_positive("scale", scale)
    _check_positive("shape", shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = t_arr / scale
        out = np.where(
            t_arr > 0,
            (shape / scale) * z ** (shape - 1.0) * np.exp(-(z**shape)),
            0.0 if shape > 1 else (1.0 / scale if shape == 1 else np.inf),
        )
    return float(out) if t_arr.ndim == 0 else out


def lognormal_survival(t, location, scale):
    """Log-normal survival 1 - Phi((ln t - location) / scale), with S(0) = 1."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    _check_positive("scale", scale)
    with np.errstate(divide="ignore"):
        z = (np.log(t_arr) - location) / scale
    out = special.ndtr(-z)
    return float(out) if t_arr.ndim == 0 else out


def lognormal_density(t, location, scale):
    """Log-normal density matching :func:`lognormal_survival`."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    _check_positive("scale", scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (np.log(t_arr) - location) / scale
        out = np.where(
            t_arr > 0,
            np.exp(-0.5 * z * z) / (t_arr * scale * math.sqrt(2.0 * math.pi)),
            0.0,
        )
    return float(out) if t_arr.ndim == 0 else out


#: Absolute slack allowed before S(L) < S(R) is reported as a monotonicity
#: violation of the supplied survival callable.
_MONOTONE_TOL = 1e-9


def log_lik_contribution(obs: Observation, surv, dens=None) -> float:
    """Log-likelihood contribution of one observation under the four cases.

    interval: log(S(L) - S(R)); left: log(1 - S(R)); right: log S(L);
    exact: log f(t).  A zero-mass contribution returns -inf and emits a
    :class:`ZeroMassWarning` instead of raising, so that optimizers can back
    off and recover.

    Parameters
    ----------
    obs : Observation
    surv : callable
        Survival function t -> S(t), non-increasing with S(0) = 1.
    dens : callable, optional
        Density t -> f(t); required only for exact observations.
    """
    if obs.kind is CensorKind.EXACT:
        if dens is None:
            raise ValueError("exact observation requires a density callable")
        mass = float(dens(obs.left))
    else:
        lo, hi = obs.effective_bounds()
        s_lo = 1.0 if lo == 0 else float(surv(lo))
        s_hi = 0.0 if math.isinf(hi) else float(surv(hi))
        if s_lo < s_hi - _MONOTONE_TOL:
            raise MonotonicityError(
                f"survival increases on ({lo}, {hi}]: S(L)={s_lo} < S(R)={s_hi}"
            )
        mass = s_lo - s_hi
    if mass <= 0:
        warnings.warn(
            f"zero probability mass for observation ({obs.left}, {obs.right}] "
            f"[{obs.kind.value}]",
            ZeroMassWarning,
            stacklevel=2,
        )
        return -math.inf
    return math.log(mass)
