"""Generate a synthetic forecast/analysis archive and look inside it.

The generator plants a weather-conditional bias in the GHI forecasts (days
that look cloudier are over- or under-predicted in a consistent way), which
is exactly the structure the analog ensemble exploits later.
"""

import pathlib

import numpy as np

from anensolar import (
    LocationSet,
    SynthConfig,
    align_observations,
    generate,
    read_tensor,
    write_tensor,
)

out = pathlib.Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

# five grid points scattered over the continental interior
rng = np.random.default_rng(1)
locations = LocationSet.from_coords(
    rng.uniform(32, 45, 5), rng.uniform(-115, -80, 5), rng.uniform(0, 2000, 5)
)

cfg = SynthConfig(
    seed=2019,
    locations=locations,
    start=1546300800,      # 2019-01-01 00:00 UTC
    n_days=60,             # one init per day at 00 UTC
    n_leads=24,            # hourly lead times
)
analysis, forecasts = generate(cfg)

print("analysis:", analysis.variable_names)
print("  shape (variable, location, valid-time):", analysis.shape)
print("forecasts shape (predictor, location, init, lead):", forecasts.shape)

ghi = analysis.values[analysis.variable_index("ghi")]
print("\nGHI range: %.0f .. %.0f W/m^2 (zero at night by construction)"
      % (ghi.min(), ghi.max()))

# container round trip is bit exact
write_tensor(forecasts, out / "forecasts.ansr")
write_tensor(analysis, out / "analysis.ansr")
back = read_tensor(out / "forecasts.ansr")
assert back.values.tobytes() == forecasts.values.tobytes()
print("\ncontainer round trip: bit-identical payload,",
      (out / 'forecasts.ansr').stat().st_size, "bytes on disk")

# observations re-addressed by (init, lead); this view feeds the ensemble gather
aligned = align_observations(analysis, forecasts.init_times, forecasts.lead_times)
print("aligned observations shape (variable, location, init, lead):", aligned.values.shape)

# the planted conditional bias: forecast error vs cloudiness at midday
err = forecasts.values[0] - aligned.values[0]
cloud = aligned.values[analysis.variable_index("cloud_cover")]
midday = slice(16, 21)  # leads around local noon for these longitudes
sel = np.isfinite(err[:, :, midday])
corr = np.corrcoef(err[:, :, midday][sel], cloud[:, :, midday][sel])[0, 1]
print("\ncorrelation of midday GHI forecast error with cloud cover: %.2f" % corr)
print("(similar forecasts exhibit similar biases, so analogs can correct them)")
