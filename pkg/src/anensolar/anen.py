"""Analog ensemble engine: windowed similarity metric, analog search over a
forecast history (fixed or operationally growing), and the shared-analog
multivariate ensemble construction.

The distance between a target forecast at init t and a candidate at init t'
for one location and lead is

    sum_i (w_i / sigma_i) * sqrt( sum_{j in [-hw, hw]} (F[i, t, l+j] - F[i, t', l+j])^2 )

with the window clipped to the lead axis, predictors skipped when their
weight is zero or their sigma is below the configured epsilon, missing target
terms dropped, and candidates disqualified (infinite distance) when any
needed candidate value is missing. Search is pure and independent per
(location, test init, lead) and may be partitioned arbitrarily over
locations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coredata import (
    MISSING,
    AlignedObservations,
    EnsembleTensor,
    ForecastTensor,
    LeadTimeAxis,
    LocationSet,
    TimeAxis,
)
from .errors import InsufficientCandidatesError, MissingVariableError
from . import tensorio


def validate_weights(weights, n_predictors: int | None = None) -> np.ndarray:
    """Check the weight-vector contract: non-negative, summing to 1 within 1e-9."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D vector")
    if n_predictors is not None and w.size != n_predictors:
        raise ValueError(f"expected {n_predictors} weights, got {w.size}")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
    return w


def equal_weights(n_predictors: int) -> np.ndarray:
    return np.full(n_predictors, 1.0 / n_predictors)


@dataclass(frozen=True)
class AnEnConfig:
    """Analog search configuration.

    members: ensemble size M; half_window: temporal trend window half size in
    lead steps; weights: per-predictor weight vector; operational: grow the
    search with every init strictly earlier than the test init; allow_partial:
    store fewer than M members instead of failing; sigma_epsilon: predictors
    with a smaller spread are skipped.
    """

    weights: np.ndarray
    members: int = 21
    half_window: int = 1
    operational: bool = False
    allow_partial: bool = False
    sigma_epsilon: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "weights", validate_weights(self.weights))
        if self.members < 1:
            raise ValueError("members must be >= 1")
        if self.half_window < 0:
            raise ValueError("half_window must be >= 0")
        if not self.sigma_epsilon > 0:
            raise ValueError("sigma_epsilon must be positive")


@dataclass(frozen=True)
class SigmaTensor:
    """Per (predictor, location, lead) standard deviation over the search period."""

    predictor_names: tuple
    locations: LocationSet
    lead_times: LeadTimeAxis
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "predictor_names", tuple(self.predictor_names))
        arr = np.array(self.values, dtype=float, copy=True)
        expected = (len(self.predictor_names), len(self.locations), len(self.lead_times))
        if arr.shape != expected:
            raise ValueError(f"sigma values have shape {arr.shape}, expected {expected}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def write(self, path):
        tensorio.write_extended(
            "sigma", path,
            field_names=self.predictor_names,
            locations=self.locations,
            sections=[("lead_times", self.lead_times.offsets)],
            values=self.values,
        )

    @classmethod
    def read(cls, path) -> "SigmaTensor":
        raw = tensorio.read_tensor(path)
        if not isinstance(raw, dict) or raw["kind"] != "sigma":
            raise tensorio.TensorHeaderError("not a sigma file")
        return cls(tuple(raw["fields"]), raw["locations"],
                   LeadTimeAxis(raw["sections"]["lead_times"]), raw["values"])


def _as_range(r) -> range:
    if isinstance(r, range):
        return r
    start, stop = r
    return range(int(start), int(stop))


def compute_sigma(forecasts: ForecastTensor, search_range) -> SigmaTensor:
    """Population standard deviation per (predictor, location, lead) over the
    search inits, ignoring missing values; NaN where fewer than two finite
    samples exist."""
    search = _as_range(search_range)
    if len(search) == 0:
        raise ValueError("search range is empty")
    vals = forecasts.values[:, :, search.start : search.stop, :]
    finite = np.isfinite(vals)
    count = finite.sum(axis=2)
    safe = np.where(finite, vals, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = safe.sum(axis=2) / count
        var = (np.where(finite, (vals - mean[:, :, None, :]) ** 2, 0.0)).sum(axis=2) / count
    sigma = np.where(count >= 2, np.sqrt(var), MISSING)
    return SigmaTensor(forecasts.predictor_names, forecasts.locations, forecasts.lead_times, sigma)


def _window(lead: int, half_window: int, n_leads: int) -> slice:
    return slice(max(0, lead - half_window), min(n_leads - 1, lead + half_window) + 1)


def similarity(forecasts: ForecastTensor, location: int, target_init: int,
               candidate_init: int, lead: int, sigma: SigmaTensor,
               config: AnEnConfig) -> float:
    """Distance between the target and one candidate at a (location, lead) cell.

    Scalar reference path of the metric; ``search_analogs`` evaluates the same
    quantity vectorized. Returns inf when the candidate is disqualified by a
    missing needed value.
    """
    win = _window(lead, config.half_window, len(forecasts.lead_times))
    total = 0.0
    for p in range(len(forecasts.predictor_names)):
        w = config.weights[p]
        s = sigma.values[p, location, lead]
        if w == 0.0 or not np.isfinite(s) or s < config.sigma_epsilon:
            continue
        acc = 0.0
        for j in range(win.start, win.stop):
            f = forecasts.values[p, location, target_init, j]
            a = forecasts.values[p, location, candidate_init, j]
            if np.isnan(f):
                continue
            if np.isnan(a):
                return float("inf")
            diff = f - a
            acc += diff * diff
        total += (w / s) * np.sqrt(acc)
    return float(total)


@dataclass(frozen=True)
class AnalogIndexSet:
    """Ranked analog members per (location, test init, lead).

    ``search_index`` holds positions into ``init_times`` (NaN where a slot is
    unused under allow_partial); ``distance`` holds the matching metric
    values. Distances are non-decreasing within a member list and, in
    operational mode, every stored init strictly precedes its test init.
    """

    locations: LocationSet
    init_times: TimeAxis
    test_indices: np.ndarray
    lead_times: LeadTimeAxis
    members: int
    search_index: np.ndarray
    distance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "test_indices", np.array(self.test_indices, dtype=np.int64))
        shape = (len(self.locations), len(self.test_indices), len(self.lead_times), self.members)
        for name in ("search_index", "distance"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def test_init_times(self) -> np.ndarray:
        return self.init_times.instants[self.test_indices]

    def member_count(self) -> np.ndarray:
        """Stored members per (location, test, lead)."""
        return np.isfinite(self.search_index).sum(axis=-1)

    def write(self, path, include_distances: bool = True):
        fields = ("search_init", "distance") if include_distances else ("search_init",)
        values = np.stack([self.search_index, self.distance][: len(fields)])
        tensorio.write_extended(
            "analogs", path,
            field_names=fields,
            locations=self.locations,
            sections=[
                ("init_times", self.init_times.instants),
                ("test_indices", self.test_indices),
                ("lead_times", self.lead_times.offsets),
                ("members", self.members),
            ],
            values=values,
        )

    @classmethod
    def read(cls, path) -> "AnalogIndexSet":
        raw = tensorio.read_tensor(path)
        if not isinstance(raw, dict) or raw["kind"] != "analogs":
            raise tensorio.TensorHeaderError("not an analog index file")
        sec = raw["sections"]
        values = raw["values"]
        search = values[0]
        if "distance" in raw["fields"]:
            dist = values[raw["fields"].index("distance")]
        else:
            dist = np.full_like(search, MISSING)
        return cls(raw["locations"], TimeAxis(sec["init_times"]), sec["test_indices"],
                   LeadTimeAxis(sec["lead_times"]), sec["members"], search, dist)


def _distance_block(values, loc, lead, test_idx, cand_idx, sigma_ld, weights,
                    half_window, sigma_epsilon, n_leads):
    """Distances (n_test, n_cand) for one (location, lead)."""
    win = _window(lead, half_window, n_leads)
    total = np.zeros((len(test_idx), len(cand_idx)))
    for p in range(len(weights)):
        w = weights[p]
        s = sigma_ld[p]
        if w == 0.0 or not np.isfinite(s) or s < sigma_epsilon:
            continue
        t = values[p, loc, test_idx, win]  # (n_test, W)
        c = values[p, loc, cand_idx, win]  # (n_cand, W)
        t_miss = np.isnan(t)
        c_miss = np.isnan(c)
        d2 = (t[:, None, :] - c[None, :, :]) ** 2
        d2 = np.where(t_miss[:, None, :], 0.0, d2)
        # left-to-right accumulation over the window: no reassociation, so
        # distances match a scalar evaluation of the metric bit for bit
        acc = d2[:, :, 0].copy()
        for k in range(1, d2.shape[2]):
            acc += d2[:, :, k]
        with np.errstate(invalid="ignore"):
            total += (w / s) * np.sqrt(acc)
        disq = (c_miss[None, :, :] & ~t_miss[:, None, :]).any(axis=2)
        total[disq] = np.inf
    return total


def search_analogs(forecasts: ForecastTensor, config: AnEnConfig, test_range,
                   search_range, sigma: SigmaTensor | None = None) -> AnalogIndexSet:
    """Find the M nearest historical forecasts per (location, test init, lead).

    ``test_range`` and ``search_range`` are half-open init-index intervals and
    must be disjoint unless ``config.operational`` is set; in operational mode
    the candidate pool for test init t is every init from the start of the
    search range up to (excluding) t, so the repository grows as the test
    period advances. Ties are broken by earlier candidate init time. Sigma is
    computed once over the base search range (also in operational mode)
    unless a precomputed table is supplied.

    Raises InsufficientCandidatesError when fewer than M finite-distance
    candidates exist and partial lists are not allowed.
    """
    test = _as_range(test_range)
    search = _as_range(search_range)
    n_init = len(forecasts.init_times)
    if len(search) == 0:
        raise ValueError("search range is empty")
    if len(test) == 0:
        raise ValueError("test range is empty")
    if test.start < 0 or test.stop > n_init or search.start < 0 or search.stop > n_init:
        raise ValueError("init ranges out of bounds")
    if not config.operational and range(max(test.start, search.start), min(test.stop, search.stop)):
        raise ValueError("test and search ranges overlap; enable operational mode")
    validate_weights(config.weights, len(forecasts.predictor_names))

    if sigma is None:
        sigma = compute_sigma(forecasts, search)

    n_loc = len(forecasts.locations)
    n_lead = len(forecasts.lead_times)
    m = config.members
    test_idx = np.arange(test.start, test.stop)
    if config.operational:
        cand_idx = np.arange(search.start, test.stop)
    else:
        cand_idx = np.arange(search.start, search.stop)

    out_idx = np.full((n_loc, len(test_idx), n_lead, m), MISSING)
    out_dist = np.full((n_loc, len(test_idx), n_lead, m), MISSING)

    for loc in range(n_loc):
        for lead in range(n_lead):
            dist = _distance_block(
                forecasts.values, loc, lead, test_idx, cand_idx,
                sigma.values[:, loc, lead], config.weights,
                config.half_window, config.sigma_epsilon, n_lead,
            )
            if config.operational:
                dist[cand_idx[None, :] >= test_idx[:, None]] = np.inf
            order = np.argsort(dist, axis=1, kind="stable")
            ranked = np.take_along_axis(dist, order, axis=1)
            for row in range(len(test_idx)):
                finite = np.isfinite(ranked[row])
                available = int(finite.sum())
                take = min(m, available)
                if available < m and not config.allow_partial:
                    raise InsufficientCandidatesError(
                        f"{available} finite-distance candidates for location {loc}, "
                        f"test init {test_idx[row]}, lead {lead}; need {m}"
                    )
                out_idx[loc, row, lead, :take] = cand_idx[order[row, :take]]
                out_dist[loc, row, lead, :take] = ranked[row, :take]

    return AnalogIndexSet(forecasts.locations, forecasts.init_times, test_idx,
                          forecasts.lead_times, m, out_idx, out_dist)


def build_multivariate_ensemble(indices: AnalogIndexSet, aligned: AlignedObservations,
                                variables=None) -> EnsembleTensor:
    """Gather observed values for every analog member, one index set for all
    variables (the shared-analog multivariate construction).

    Member m of variable v at (l, i, j) is the aligned observation of v at
    (l, search_init of member m, j). Missing observations propagate as NaN
    members.
    """
    if variables is None:
        variables = aligned.variable_names
    var_idx = []
    for name in variables:
        try:
            var_idx.append(aligned.variable_index(name))
        except KeyError:
            raise MissingVariableError(name) from None

    n_loc, n_test, n_lead, m = indices.search_index.shape
    src = indices.search_index
    filled = np.isfinite(src)
    safe = np.where(filled, src, 0).astype(np.int64)
    if safe.max(initial=0) >= len(aligned.init_times) or (
        len(indices.init_times) != len(aligned.init_times)
        or np.any(indices.init_times.instants != aligned.init_times.instants)
    ):
        raise ValueError("aligned observations do not cover the analog init axis")

    l_ix = np.arange(n_loc)[:, None, None, None]
    j_ix = np.arange(n_lead)[None, None, :, None]
    out = np.empty((len(var_idx), n_loc, n_test, n_lead, m))
    for k, v in enumerate(var_idx):
        gathered = aligned.values[v, l_ix, safe, j_ix]
        out[k] = np.where(filled, gathered, MISSING)

    test_times = TimeAxis(indices.init_times.instants[indices.test_indices])
    return EnsembleTensor(tuple(variables), indices.locations, test_times,
                          indices.lead_times, m, out)
