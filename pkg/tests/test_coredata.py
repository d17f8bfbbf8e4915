import numpy as np
import pytest

from anensolar.coredata import (
    ForecastTensor,
    LeadTimeAxis,
    LocationSet,
    ObservationTensor,
    TimeAxis,
    align_observations,
)
from anensolar.errors import (
    AxisMonotonicityError,
    DimensionMismatchError,
    DuplicateNameError,
    TensorFormatError,
)

from conftest import make_forecast, make_locations, make_observation
from oracles import lookup_aligned


class TestLocationSet:
    def test_dense_ids_required(self):
        with pytest.raises(TensorFormatError):
            LocationSet(np.array([0, 2]), np.zeros(2), np.zeros(2), np.zeros(2))

    def test_latitude_range_checked(self):
        with pytest.raises(TensorFormatError):
            LocationSet.from_coords([91.0], [0.0])

    def test_longitude_range_checked(self):
        with pytest.raises(TensorFormatError):
            LocationSet.from_coords([0.0], [-181.0])

    def test_from_coords(self):
        locs = LocationSet.from_coords([10.0, 20.0], [30.0, 40.0])
        assert len(locs) == 2
        assert locs.elevation.tolist() == [0.0, 0.0]


class TestAxes:
    def test_time_axis_strictly_increasing(self):
        with pytest.raises(AxisMonotonicityError):
            TimeAxis([0, 0, 1])
        with pytest.raises(AxisMonotonicityError):
            TimeAxis([3, 2, 1])

    def test_lead_axis_non_negative(self):
        with pytest.raises(AxisMonotonicityError):
            LeadTimeAxis([-3600, 0])

    def test_uniform_spacing_not_required(self):
        axis = TimeAxis([0, 3600, 4000, 90000])
        assert len(axis) == 4

    def test_index_of(self):
        axis = TimeAxis([10, 20, 30])
        assert axis.index_of(20) == 1
        assert axis.index_of(25) == -1
        assert axis.index_of(31) == -1


class TestTensors:
    def test_shape_enforced(self):
        locs = make_locations(2)
        with pytest.raises(DimensionMismatchError):
            ForecastTensor(("a",), locs, TimeAxis([0]), LeadTimeAxis([0]), np.zeros((1, 2, 1, 2)))

    def test_duplicate_predictor_names(self):
        locs = make_locations(1)
        with pytest.raises(DuplicateNameError):
            ForecastTensor(("a", "a"), locs, TimeAxis([0]), LeadTimeAxis([0]), np.zeros((2, 1, 1, 1)))

    def test_values_immutable_after_load(self):
        fc = make_forecast()
        with pytest.raises(ValueError):
            fc.values[0, 0, 0, 0] = 99.0

    def test_out_of_shape_access_fails(self):
        fc = make_forecast(n_pred=2, n_loc=2, n_init=6, n_lead=4)
        with pytest.raises(IndexError):
            fc.values[2, 0, 0, 0]
        with pytest.raises(IndexError):
            fc.values[0, 0, 6, 0]

    def test_predictor_index(self):
        fc = make_forecast(n_pred=3)
        assert fc.predictor_index("p1") == 1
        with pytest.raises(KeyError):
            fc.predictor_index("nope")


class TestAlignObservations:
    def test_exact_index_identity(self):
        # obs at {0, 3600}; init {0}; leads {0, 3600} -> picks obs[..., 0], obs[..., 1]
        obs = ObservationTensor(
            ("x",), make_locations(1), TimeAxis([0, 3600]), np.array([[[7.0, 9.0]]])
        )
        view = align_observations(obs, TimeAxis([0]), LeadTimeAxis([0, 3600]))
        assert view.values[0, 0, 0, 0] == 7.0
        assert view.values[0, 0, 0, 1] == 9.0

    def test_absent_valid_time_is_sentinel(self):
        obs = ObservationTensor(("x",), make_locations(1), TimeAxis([0]), np.array([[[7.0]]]))
        view = align_observations(obs, TimeAxis([0]), LeadTimeAxis([7200]))
        assert np.isnan(view.values[0, 0, 0, 0])

    def test_matches_scalar_lookup_oracle(self, rng):
        obs = make_observation(n_var=3, n_loc=4, n_time=40, step=3600)
        # irregular init/lead instants so that only some cells match exactly
        init = TimeAxis(obs.valid_times.instants[0] + np.array([0, 5 * 3600, 13 * 3600, 41 * 3600]))
        leads = LeadTimeAxis(np.array([0, 1800, 3600, 7 * 3600]))
        view = align_observations(obs, init, leads)
        expected = lookup_aligned(obs.values, obs.valid_times.instants, init.instants, leads.offsets)
        np.testing.assert_array_equal(view.values, expected)

    def test_idempotent_and_total(self):
        obs = make_observation()
        init = TimeAxis([obs.valid_times.instants[0]])
        leads = LeadTimeAxis([0, 3600])
        a = align_observations(obs, init, leads)
        b = align_observations(obs, init, leads)
        assert a.values.shape == (2, 2, 1, 2)
        np.testing.assert_array_equal(a.values, b.values)
