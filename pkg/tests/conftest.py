import math

import numpy as np
import pytest

from intercens.dataio import load_ovarian
from intercens.model import CensorKind, Dataset, Observation


@pytest.fixture(scope="session")
def ovarian():
    return load_ovarian()


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def make_observation(lo, hi, covariates=(), kind=None):
    return Observation(lo, hi, covariates, kind)


def interval_dataset(pairs, covariates=None, names=()):
    """Dataset from (left, right) pairs, optionally with covariate rows."""
    obs = []
    for i, (lo, hi) in enumerate(pairs):
        x = () if covariates is None else tuple(covariates[i])
        obs.append(Observation(lo, hi, x))
    return Dataset(tuple(obs), tuple(names))


def random_mixed_dataset(rng, n=8, p=2, with_exact=True):
    """Random dataset mixing all four censoring kinds."""
    obs = []
    for _ in range(n):
        x = tuple(rng.normal(0.0, 1.0, p))
        u = rng.random()
        if u < 0.25:
            obs.append(Observation(0.0, rng.uniform(0.5, 5.0), x))
        elif u < 0.5:
            obs.append(Observation(rng.uniform(0.5, 8.0), math.inf, x))
        elif u < 0.75 or not with_exact:
            lo = rng.uniform(0.2, 6.0)
            obs.append(Observation(lo, lo + rng.uniform(0.3, 4.0), x))
        else:
            t = rng.uniform(0.5, 8.0)
            obs.append(Observation(t, t, x))
    return Dataset(tuple(obs), tuple(f"x{j + 1}" for j in range(p)))
