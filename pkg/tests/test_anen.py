import math

import numpy as np
import pytest

from anensolar.anen import (
    AnalogIndexSet,
    AnEnConfig,
    SigmaTensor,
    build_multivariate_ensemble,
    compute_sigma,
    equal_weights,
    search_analogs,
    similarity,
    validate_weights,
)
from anensolar.coredata import (
    MISSING,
    ForecastTensor,
    LeadTimeAxis,
    ObservationTensor,
    TimeAxis,
    align_observations,
)
from anensolar.errors import InsufficientCandidatesError, MissingVariableError

from conftest import make_forecast, make_locations
from oracles import brute_force_search, gather_members, population_sigma


def unit_sigma(fc):
    shape = (len(fc.predictor_names), len(fc.locations), len(fc.lead_times))
    return SigmaTensor(fc.predictor_names, fc.locations, fc.lead_times, np.ones(shape))


def tiny_forecast(values):
    """ForecastTensor from a raw (P, L, I, J) array."""
    values = np.asarray(values, dtype=float)
    p, l, i, j = values.shape
    return ForecastTensor(
        tuple(f"p{k}" for k in range(p)),
        make_locations(l),
        TimeAxis(86400 * np.arange(i)),
        LeadTimeAxis(3600 * np.arange(j)),
        values,
    )


class TestWeightVector:
    def test_sum_must_be_one(self):
        with pytest.raises(ValueError):
            validate_weights([0.5, 0.4])
        validate_weights([0.5, 0.5])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            validate_weights([1.5, -0.5])

    def test_equal_weights(self):
        w = equal_weights(4)
        np.testing.assert_allclose(w, [0.25] * 4)
        validate_weights(w)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AnEnConfig(weights=np.array([1.0]), members=0)
        with pytest.raises(ValueError):
            AnEnConfig(weights=np.array([1.0]), half_window=-1)
        with pytest.raises(ValueError):
            AnEnConfig(weights=np.array([1.0]), sigma_epsilon=0.0)


class TestComputeSigma:
    def test_constant_series_zero(self):
        fc = tiny_forecast(np.full((1, 1, 3, 1), 5.0))
        sigma = compute_sigma(fc, range(0, 3))
        assert sigma.values[0, 0, 0] == 0.0

    def test_two_point_population_value(self):
        fc = tiny_forecast(np.array([1.0, 3.0]).reshape(1, 1, 2, 1))
        sigma = compute_sigma(fc, range(0, 2))
        assert sigma.values[0, 0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_all_missing_sentinel(self):
        fc = tiny_forecast(np.full((1, 1, 4, 1), MISSING))
        sigma = compute_sigma(fc, range(0, 4))
        assert np.isnan(sigma.values[0, 0, 0])

    def test_single_finite_sample_sentinel(self):
        vals = np.full((1, 1, 4, 1), MISSING)
        vals[0, 0, 2, 0] = 7.0
        sigma = compute_sigma(tiny_forecast(vals), range(0, 4))
        assert np.isnan(sigma.values[0, 0, 0])

    def test_matches_scalar_oracle(self, rng):
        vals = rng.normal(0, 4, size=(3, 2, 12, 4))
        vals[rng.random(vals.shape) < 0.2] = MISSING
        fc = tiny_forecast(vals)
        sigma = compute_sigma(fc, range(2, 11))
        expected = population_sigma(fc.values, 2, 11)
        np.testing.assert_allclose(sigma.values, expected, rtol=1e-12, equal_nan=True)

    def test_empty_search_range_rejected(self):
        with pytest.raises(ValueError):
            compute_sigma(make_forecast(), range(3, 3))


class TestSimilarity:
    def test_self_distance_zero(self):
        fc = make_forecast(n_pred=3, n_init=4)
        cfg = AnEnConfig(weights=equal_weights(3), half_window=1)
        sigma = compute_sigma(fc, range(0, 4))
        d = similarity(fc, 0, 2, 2, 1, sigma, cfg)
        assert d == 0.0

    def test_single_predictor_point_metric(self):
        fc = tiny_forecast(np.array([5.0, 3.0]).reshape(1, 1, 2, 1))
        cfg = AnEnConfig(weights=np.array([1.0]), half_window=0)
        d = similarity(fc, 0, 0, 1, 0, unit_sigma(fc), cfg)
        assert d == pytest.approx(2.0, abs=1e-15)

    def test_windowed_metric(self):
        # diffs within the window are (1, 2, 2) -> sqrt(9) = 3
        vals = np.zeros((1, 1, 2, 3))
        vals[0, 0, 0] = [1.0, 2.0, 3.0]
        vals[0, 0, 1] = [0.0, 0.0, 1.0]
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), half_window=1)
        d = similarity(fc, 0, 0, 1, 1, unit_sigma(fc), cfg)
        assert d == pytest.approx(3.0, abs=1e-15)

    def test_window_clipped_at_boundaries(self):
        vals = np.zeros((1, 1, 2, 2))
        vals[0, 0, 0] = [1.0, 5.0]
        vals[0, 0, 1] = [0.0, 1.0]
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), half_window=2)
        # lead 0 window clips to leads {0, 1}: sqrt(1 + 16)
        d = similarity(fc, 0, 0, 1, 0, unit_sigma(fc), cfg)
        assert d == pytest.approx(math.sqrt(17.0), abs=1e-12)

    def test_missing_candidate_disqualifies(self):
        vals = np.zeros((1, 1, 2, 3))
        vals[0, 0, 0] = [1.0, 2.0, 3.0]
        vals[0, 0, 1] = [0.0, MISSING, 1.0]
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), half_window=1)
        assert similarity(fc, 0, 0, 1, 1, unit_sigma(fc), cfg) == math.inf

    def test_missing_target_drops_term(self):
        vals = np.zeros((1, 1, 2, 3))
        vals[0, 0, 0] = [1.0, MISSING, 3.0]
        vals[0, 0, 1] = [0.0, 0.0, 1.0]
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), half_window=1)
        d = similarity(fc, 0, 0, 1, 1, unit_sigma(fc), cfg)
        assert d == pytest.approx(math.sqrt(1.0 + 4.0), abs=1e-12)

    def test_low_sigma_predictor_skipped(self):
        vals = np.zeros((2, 1, 2, 1))
        vals[0, 0] = [[5.0], [1.0]]
        vals[1, 0] = [[9.0], [2.0]]
        fc = tiny_forecast(vals)
        sigma = SigmaTensor(fc.predictor_names, fc.locations, fc.lead_times,
                            np.array([[[1.0]], [[1e-12]]]))
        cfg = AnEnConfig(weights=equal_weights(2), half_window=0)
        d = similarity(fc, 0, 0, 1, 0, sigma, cfg)
        assert d == pytest.approx(0.5 * 4.0, abs=1e-12)

    def test_zero_weight_predictor_skipped(self):
        vals = np.zeros((2, 1, 2, 1))
        vals[0, 0] = [[5.0], [1.0]]
        vals[1, 0] = [[9.0], [2.0]]
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0, 0.0]), half_window=0)
        d = similarity(fc, 0, 0, 1, 0, unit_sigma(fc), cfg)
        assert d == pytest.approx(4.0, abs=1e-12)

    def test_linearity_in_weights(self, rng):
        # the metric is sum_i w_i * term_i with every term non-negative,
        # which carries the weight-monotonicity property
        fc = make_forecast(n_pred=3, n_loc=2, n_init=8, n_lead=4, seed=33)
        sigma = compute_sigma(fc, range(0, 8))
        one_hot = [AnEnConfig(weights=np.eye(3)[i], half_window=1) for i in range(3)]
        terms = np.array([similarity(fc, 1, 2, 5, 2, sigma, c) for c in one_hot])
        assert np.all(terms >= 0.0)
        for _ in range(20):
            w = rng.dirichlet(np.ones(3))
            cfg = AnEnConfig(weights=w / w.sum(), half_window=1)
            d = similarity(fc, 1, 2, 5, 2, sigma, cfg)
            assert d == pytest.approx(float(np.dot(cfg.weights, terms)), rel=1e-9)

    def test_weight_increase_cannot_decrease_distance_when_other_term_zero(self):
        vals = np.zeros((2, 1, 2, 1))
        vals[0, 0] = [[5.0], [1.0]]   # positive term
        vals[1, 0] = [[2.0], [2.0]]   # zero term
        fc = tiny_forecast(vals)
        low = similarity(fc, 0, 0, 1, 0, unit_sigma(fc),
                         AnEnConfig(weights=np.array([0.3, 0.7]), half_window=0))
        high = similarity(fc, 0, 0, 1, 0, unit_sigma(fc),
                          AnEnConfig(weights=np.array([0.9, 0.1]), half_window=0))
        assert high > low


class TestSearchAnalogs:
    def test_three_candidates_ranked(self):
        # candidate distances (2, 0, 5) at the single lead -> members [#1, #0]
        vals = np.array([2.0, 0.0, 5.0, 0.0]).reshape(1, 1, 4, 1)
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), members=2, half_window=0)
        out = search_analogs(fc, cfg, (3, 4), (0, 3), unit_sigma(fc))
        assert out.search_index[0, 0, 0].tolist() == [1.0, 0.0]
        assert out.distance[0, 0, 0].tolist() == [0.0, 2.0]

    def test_exact_copy_is_best_with_zero_distance(self):
        vals = np.array([7.0, 7.0]).reshape(1, 1, 2, 1)
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), members=1, half_window=0)
        out = search_analogs(fc, cfg, (1, 2), (0, 1), unit_sigma(fc))
        assert out.search_index[0, 0, 0, 0] == 0.0
        assert out.distance[0, 0, 0, 0] == 0.0

    def test_ties_break_to_earlier_init(self):
        vals = np.array([3.0, 3.0, 3.0, 3.0]).reshape(1, 1, 4, 1)
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), members=2, half_window=0)
        out = search_analogs(fc, cfg, (3, 4), (0, 3), unit_sigma(fc))
        assert out.search_index[0, 0, 0].tolist() == [0.0, 1.0]

    def test_matches_oracle_on_random_instance(self, rng):
        fc = make_forecast(n_pred=2, n_loc=1, n_init=20, n_lead=3, seed=77)
        cfg = AnEnConfig(weights=equal_weights(2), members=4, half_window=1)
        sigma = compute_sigma(fc, range(0, 14))
        out = search_analogs(fc, cfg, (14, 20), (0, 14), sigma)
        idx, dist = brute_force_search(
            fc.values, cfg.weights, 4, 1, cfg.sigma_epsilon,
            range(14, 20), range(0, 14), False, sigma.values,
        )
        np.testing.assert_array_equal(out.search_index, idx)
        np.testing.assert_array_equal(out.distance, dist)

    def test_operational_mode_matches_oracle(self, rng):
        fc = make_forecast(n_pred=3, n_loc=2, n_init=24, n_lead=4, seed=78)
        cfg = AnEnConfig(weights=equal_weights(3), members=3, half_window=1, operational=True)
        sigma = compute_sigma(fc, range(0, 12))
        out = search_analogs(fc, cfg, (12, 24), (0, 12), sigma)
        idx, dist = brute_force_search(
            fc.values, cfg.weights, 3, 1, cfg.sigma_epsilon,
            range(12, 24), range(0, 12), True, sigma.values,
        )
        np.testing.assert_array_equal(out.search_index, idx)
        np.testing.assert_array_equal(out.distance, dist)

    def test_operational_causality_invariant(self):
        fc = make_forecast(n_pred=2, n_loc=2, n_init=18, n_lead=3, seed=79)
        cfg = AnEnConfig(weights=equal_weights(2), members=3, half_window=1, operational=True)
        out = search_analogs(fc, cfg, (6, 18), (0, 6))
        test_inits = fc.init_times.instants[out.test_indices]
        src = out.search_index
        for row, t_time in enumerate(test_inits):
            member_inits = src[:, row][np.isfinite(src[:, row])].astype(int)
            assert np.all(fc.init_times.instants[member_inits] < t_time)

    def test_positive_scaling_invariance(self):
        fc = make_forecast(n_pred=3, n_loc=2, n_init=16, n_lead=4, seed=80)
        cfg = AnEnConfig(weights=equal_weights(3), members=4, half_window=1)
        base = search_analogs(fc, cfg, (12, 16), (0, 12))
        scaled_values = fc.values.copy()
        scaled_values[1] *= 37.5
        scaled = ForecastTensor(fc.predictor_names, fc.locations, fc.init_times,
                                fc.lead_times, scaled_values)
        out = search_analogs(scaled, cfg, (12, 16), (0, 12))
        np.testing.assert_array_equal(out.search_index, base.search_index)
        np.testing.assert_allclose(out.distance, base.distance, rtol=1e-9, atol=1e-12)

    def test_insufficient_candidates_error(self):
        fc = make_forecast(n_init=5)
        cfg = AnEnConfig(weights=equal_weights(2), members=4, half_window=0)
        with pytest.raises(InsufficientCandidatesError):
            search_analogs(fc, cfg, (3, 5), (0, 3))

    def test_allow_partial_stores_shorter_lists(self):
        fc = make_forecast(n_init=5)
        cfg = AnEnConfig(weights=equal_weights(2), members=4, half_window=0, allow_partial=True)
        out = search_analogs(fc, cfg, (3, 5), (0, 3))
        assert out.member_count().max() == 3
        assert np.all(np.isnan(out.search_index[..., 3]))

    def test_disqualified_candidates_never_selected(self):
        vals = np.zeros((1, 1, 4, 1))
        vals[0, 0, :, 0] = [1.0, MISSING, 3.0, 2.0]
        fc = tiny_forecast(vals)
        cfg = AnEnConfig(weights=np.array([1.0]), members=2, half_window=0)
        out = search_analogs(fc, cfg, (3, 4), (0, 3), unit_sigma(fc))
        assert set(out.search_index[0, 0, 0].tolist()) == {0.0, 2.0}

    def test_empty_search_range_rejected(self):
        fc = make_forecast()
        cfg = AnEnConfig(weights=equal_weights(2))
        with pytest.raises(ValueError):
            search_analogs(fc, cfg, (3, 5), (2, 2))

    def test_overlap_requires_operational(self):
        fc = make_forecast(n_init=6)
        cfg = AnEnConfig(weights=equal_weights(2), members=1)
        with pytest.raises(ValueError):
            search_analogs(fc, cfg, (2, 5), (0, 3))

    def test_distances_non_decreasing_within_lists(self):
        fc = make_forecast(n_pred=2, n_loc=3, n_init=30, n_lead=4, seed=81)
        cfg = AnEnConfig(weights=equal_weights(2), members=6, half_window=1)
        out = search_analogs(fc, cfg, (24, 30), (0, 24))
        diffs = np.diff(out.distance, axis=-1)
        assert np.all(diffs[np.isfinite(diffs)] >= 0)


def aligned_from(fc, obs_values):
    obs = ObservationTensor(
        ("a", "b"),
        fc.locations,
        TimeAxis((fc.init_times.instants[:, None] + fc.lead_times.offsets[None, :]).ravel()),
        obs_values,
    )
    return align_observations(obs, fc.init_times, fc.lead_times)


class TestBuildEnsemble:
    def make_setup(self, seed=90, n_loc=2, n_init=10, n_lead=3):
        fc = make_forecast(n_pred=2, n_loc=n_loc, n_init=n_init, n_lead=n_lead, seed=seed)
        r = np.random.default_rng(seed + 1)
        obs_values = r.normal(0, 1, size=(2, n_loc, n_init * n_lead))
        aligned = aligned_from(fc, obs_values)
        return fc, aligned

    def test_gather_identity(self):
        fc, aligned = self.make_setup()
        cfg = AnEnConfig(weights=equal_weights(2), members=2, half_window=0)
        out = search_analogs(fc, cfg, (8, 10), (0, 8))
        ens = build_multivariate_ensemble(out, aligned)
        l, t, j = 1, 0, 2
        for m in range(2):
            src = int(out.search_index[l, t, j, m])
            assert ens.values[0, l, t, j, m] == aligned.values[0, l, src, j]

    def test_shared_analog_property(self):
        fc, aligned = self.make_setup(seed=91)
        cfg = AnEnConfig(weights=equal_weights(2), members=3, half_window=1)
        out = search_analogs(fc, cfg, (7, 10), (0, 7))
        ens = build_multivariate_ensemble(out, aligned)
        # member m of every variable traces to the same historical init
        for m in range(3):
            src = out.search_index[..., m].astype(int)
            for v in range(2):
                expected = aligned.values[v][
                    np.arange(2)[:, None, None], src, np.arange(3)[None, None, :]
                ]
                np.testing.assert_array_equal(ens.values[v, ..., m], expected)

    def test_matches_scalar_gather_oracle(self, rng):
        fc, aligned = self.make_setup(seed=92, n_loc=3, n_init=14, n_lead=4)
        cfg = AnEnConfig(weights=equal_weights(2), members=4, half_window=1, allow_partial=True)
        out = search_analogs(fc, cfg, (10, 14), (0, 10))
        ens = build_multivariate_ensemble(out, aligned)
        expected = gather_members(aligned.values, out.search_index)
        np.testing.assert_array_equal(ens.values, expected)

    def test_missing_observations_propagate(self):
        fc, aligned = self.make_setup(seed=93)
        values = aligned.values.copy()
        values[0, 0, :, 1] = MISSING
        aligned2 = type(aligned)(aligned.variable_names, aligned.locations,
                                 aligned.init_times, aligned.lead_times, values)
        cfg = AnEnConfig(weights=equal_weights(2), members=2, half_window=0)
        out = search_analogs(fc, cfg, (8, 10), (0, 8))
        ens = build_multivariate_ensemble(out, aligned2)
        assert np.all(np.isnan(ens.values[0, 0, :, 1, :]))
        assert np.all(np.isfinite(ens.values[1, 0, :, 1, :]))

    def test_variable_subset_and_missing_variable(self):
        fc, aligned = self.make_setup(seed=94)
        cfg = AnEnConfig(weights=equal_weights(2), members=2, half_window=0)
        out = search_analogs(fc, cfg, (8, 10), (0, 8))
        ens = build_multivariate_ensemble(out, aligned, variables=("b",))
        assert ens.variable_names == ("b",)
        with pytest.raises(MissingVariableError):
            build_multivariate_ensemble(out, aligned, variables=("nope",))


class TestAnalogSerialization:
    def test_round_trip_with_distances(self, tmp_path):
        fc = make_forecast(n_pred=2, n_loc=2, n_init=12, n_lead=3, seed=95)
        cfg = AnEnConfig(weights=equal_weights(2), members=3, half_window=1)
        out = search_analogs(fc, cfg, (9, 12), (0, 9))
        path = tmp_path / "analogs.ansr"
        out.write(path)
        back = AnalogIndexSet.read(path)
        np.testing.assert_array_equal(back.search_index, out.search_index)
        np.testing.assert_array_equal(back.distance, out.distance)
        np.testing.assert_array_equal(back.test_indices, out.test_indices)
        assert back.members == 3

    def test_round_trip_without_distances(self, tmp_path):
        fc = make_forecast(n_pred=2, n_loc=1, n_init=10, n_lead=2, seed=96)
        cfg = AnEnConfig(weights=equal_weights(2), members=2, half_window=0)
        out = search_analogs(fc, cfg, (8, 10), (0, 8))
        path = tmp_path / "analogs.ansr"
        out.write(path, include_distances=False)
        back = AnalogIndexSet.read(path)
        np.testing.assert_array_equal(back.search_index, out.search_index)
        assert np.all(np.isnan(back.distance))
