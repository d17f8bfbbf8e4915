import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anensolar.coredata import (
    ForecastTensor,
    LeadTimeAxis,
    LocationSet,
    ObservationTensor,
    TimeAxis,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20190101)


def make_locations(n, seed=0):
    r = np.random.default_rng(seed)
    return LocationSet.from_coords(
        r.uniform(25, 49, n), r.uniform(-124, -67, n), r.uniform(0, 3000, n)
    )


def make_forecast(n_pred=2, n_loc=2, n_init=6, n_lead=4, seed=1, start=1_546_300_800):
    r = np.random.default_rng(seed)
    return ForecastTensor(
        tuple(f"p{i}" for i in range(n_pred)),
        make_locations(n_loc, seed),
        TimeAxis(start + 86400 * np.arange(n_init)),
        LeadTimeAxis(3600 * np.arange(n_lead)),
        r.normal(10, 3, size=(n_pred, n_loc, n_init, n_lead)),
    )


def make_observation(n_var=2, n_loc=2, n_time=24, seed=2, start=1_546_300_800, step=3600):
    r = np.random.default_rng(seed)
    return ObservationTensor(
        tuple(f"v{i}" for i in range(n_var)),
        make_locations(n_loc, seed),
        TimeAxis(start + step * np.arange(n_time)),
        r.normal(5, 2, size=(n_var, n_loc, n_time)),
    )
