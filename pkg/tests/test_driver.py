import numpy as np
import pytest

from anensolar.anen import AnEnConfig, equal_weights
from anensolar.coredata import LocationSet
from anensolar.driver import (
    WeightObjective,
    anen_weather_ensemble,
    forecast_weather_ensemble,
    power_from_weather,
    slice_forecast_location,
    slice_observation_location,
)
from anensolar.pvchain import SystemConfig, load_module_catalog
from anensolar.synth import SynthConfig, generate


@pytest.fixture(scope="module")
def dataset():
    rng = np.random.default_rng(5)
    locs = LocationSet.from_coords(rng.uniform(30, 45, 3), rng.uniform(-110, -80, 3))
    cfg = SynthConfig(seed=3, locations=locs, start=1546300800, n_days=60)
    return generate(cfg)


def test_slices_preserve_values(dataset):
    obs, fc = dataset
    f1 = slice_forecast_location(fc, 1)
    assert f1.values.shape[1] == 1
    np.testing.assert_array_equal(f1.values[:, 0], fc.values[:, 1])
    o1 = slice_observation_location(obs, 2)
    np.testing.assert_array_equal(o1.values[:, 0], obs.values[:, 2])


def test_forecast_wrapper_is_one_member(dataset):
    _, fc = dataset
    ens = forecast_weather_ensemble(fc, range(50, 60))
    assert ens.members == 1
    np.testing.assert_array_equal(ens.values[..., 0], fc.values[:, :, 50:60, :])


def test_uniform_per_location_weights_match_single_search(dataset):
    obs, fc = dataset
    cfg = AnEnConfig(weights=equal_weights(5), members=5, half_window=1, operational=True)
    single = anen_weather_ensemble(fc, obs, cfg, range(45, 60), range(0, 45))
    stacked = np.tile(equal_weights(5), (3, 1))
    per_loc = anen_weather_ensemble(fc, obs, cfg, range(45, 60), range(0, 45),
                                    per_location_weights=stacked)
    np.testing.assert_array_equal(single.values, per_loc.values)


def test_weight_objective_is_pure_and_finite(dataset):
    obs, fc = dataset
    base = AnEnConfig(weights=equal_weights(5), members=5, half_window=1, operational=True)
    spec = next(s for s in load_module_catalog() if s.code == "STU300")
    objective = WeightObjective(fc, obs, base, range(40, 50), range(0, 40), spec, SystemConfig())
    w = equal_weights(5)
    first = objective.evaluate(w, 0)
    second = objective.evaluate(w, 0)
    assert np.isfinite(first)
    assert first == second
    other = objective.evaluate(np.array([0.6, 0.1, 0.1, 0.1, 0.1]), 0)
    assert np.isfinite(other) and other != first


def test_power_from_weather_builds_cache_once(dataset):
    obs, fc = dataset
    weather = forecast_weather_ensemble(fc, range(55, 60))
    spec = load_module_catalog()[0]
    power = power_from_weather(weather, [spec], SystemConfig())
    assert power.variable_names == ("SP128",)
    assert power.values.shape == (1, 3, 5, 24, 1)
    assert np.all(power.values >= 0)
