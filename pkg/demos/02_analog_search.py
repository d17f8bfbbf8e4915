"""Analog search and the shared-analog multivariate ensemble.

Builds the spread table, searches the history for the nearest forecasts per
(location, test init, lead), and gathers the verifying observations of every
variable from the same historical inits.
"""

import numpy as np

from anensolar import (
    AnEnConfig,
    LocationSet,
    SynthConfig,
    align_observations,
    build_multivariate_ensemble,
    compute_sigma,
    equal_weights,
    generate,
    search_analogs,
    similarity,
)

rng = np.random.default_rng(7)
locations = LocationSet.from_coords(rng.uniform(32, 45, 3), rng.uniform(-110, -85, 3))
analysis, forecasts = generate(
    SynthConfig(seed=11, locations=locations, start=1546300800, n_days=120)
)

search = range(0, 100)      # the growing repository starts from here
test = range(100, 120)      # operational test period

config = AnEnConfig(
    weights=equal_weights(5),
    members=15,
    half_window=1,           # compare the previous, current, and next hour
    operational=True,
)

sigma = compute_sigma(forecasts, search)
print("sigma table shape (predictor, location, lead):", sigma.values.shape)

# the similarity metric for one candidate, scalar reference path
d_self = similarity(forecasts, 0, 110, 110, 12, sigma, config)
d_other = similarity(forecasts, 0, 110, 50, 12, sigma, config)
print("distance to itself: %.3f, to a random historical init: %.3f" % (d_self, d_other))

indices = search_analogs(forecasts, config, test, search, sigma)
print("\nanalog index set shape (location, test, lead, member):", indices.search_index.shape)
print("distances are non-decreasing within each member list:",
      bool(np.all(np.diff(indices.distance, axis=-1)[np.isfinite(np.diff(indices.distance, axis=-1))] >= 0)))

# operational causality: every member predates its test init
test_times = forecasts.init_times.instants[indices.test_indices]
member_times = forecasts.init_times.instants[indices.search_index.astype(int)]
print("causality holds:", bool(np.all(member_times < test_times[None, :, None, None])))

aligned = align_observations(analysis, forecasts.init_times, forecasts.lead_times)
ensemble = build_multivariate_ensemble(indices, aligned)
print("\nweather ensemble shape (variable, location, init, lead, member):", ensemble.shape)

# the multivariate guarantee: member m of ghi and of temperature come from the
# same historical day, so members are jointly plausible weather states
l, t, j = 0, 5, 18
src = indices.search_index[l, t, j].astype(int)
for m in (0, 1, 2):
    print("member %d <- init #%d: ghi=%6.1f  temp=%5.1f  wind=%4.1f" % (
        m, src[m],
        ensemble.values[0, l, t, j, m],
        ensemble.values[1, l, t, j, m],
        ensemble.values[2, l, t, j, m],
    ))
