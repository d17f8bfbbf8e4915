"""Verification: skill metrics, solar-noon alignment, grouped aggregation,
and the paired significance test.

Runs the full chain (analogs -> power) for the equal-weight strategy and the
raw deterministic forecast, verifies both against power simulated from the
analysis through the identical chain, and prints a per-slot table shaped like
a lead-time series (slot 12 is local solar noon everywhere).
"""

import numpy as np

from anensolar import (
    AnEnConfig,
    LocationSet,
    SynthConfig,
    SystemConfig,
    aggregate,
    align_solar_noon,
    bias,
    crps,
    equal_weights,
    generate,
    load_module_catalog,
    paired_significance,
    precompute_solar,
    rmse,
)
from anensolar.driver import (
    analysis_weather_ensemble,
    anen_weather_ensemble,
    forecast_weather_ensemble,
    power_from_weather,
)

# metric basics
print("rmse([2,-2] vs 0) =", rmse([2.0, -2.0], [0.0, 0.0]))
print("bias of under-prediction is negative:", bias([1.0], [3.0]))
print("crps({0,2} vs 1) =", crps([0.0, 2.0], 1.0), "(single member = absolute error)")

rng = np.random.default_rng(9)
locations = LocationSet.from_coords(
    rng.uniform(32, 45, 8), rng.uniform(-115, -75, 8), rng.uniform(0, 1500, 8)
)
analysis, forecasts = generate(
    SynthConfig(seed=21, locations=locations, start=1546300800, n_days=150)
)
search, test = range(0, 120), range(120, 150)
config = AnEnConfig(weights=equal_weights(5), members=15, half_window=1, operational=True)

weather = anen_weather_ensemble(forecasts, analysis, config, test, search)
spec = next(s for s in load_module_catalog() if s.code == "STU300")
system = SystemConfig()
cache = precompute_solar(weather.locations, weather.init_times, weather.lead_times)
anen_power = power_from_weather(weather, [spec], system, cache).values[0]
raw_power = power_from_weather(
    forecast_weather_ensemble(forecasts, test), [spec], system, cache).values[0, ..., 0]
truth = power_from_weather(
    analysis_weather_ensemble(analysis, forecasts.init_times, forecasts.lead_times, test),
    [spec], system, cache).values[0, ..., 0]

# local solar noon goes to slot 12 for every longitude
alignment = align_solar_noon(cache)
print("\nper-location noon offsets (lead steps east/west of slot 12):",
      alignment.offsets.tolist())

daylight = cache.daylight_mask()
report_anen = aggregate(anen_power, truth, "lead", init_times=weather.init_times,
                        alignment=alignment, daylight=daylight)
report_raw = aggregate(raw_power, truth, "lead", init_times=weather.init_times,
                       alignment=alignment, daylight=daylight)
raw_by_slot = report_raw.by_group()

print("\nslot  rmse_anen  rmse_raw   spread     n   (slot 12 = solar noon)")
for row in report_anen.rows:
    if 8 <= row.group <= 16:
        raw_row = raw_by_slot[row.group]
        print("%4d  %9.1f %9.1f %8.1f %5d" % (
            row.group, row.rmse, raw_row.rmse, row.spread, row.count))

for grouping in ("daypart", "season"):
    rep = aggregate(anen_power, truth, grouping, init_times=weather.init_times,
                    alignment=alignment, daylight=daylight)
    print("\nby %s:" % grouping, {r.group: round(r.rmse, 1) for r in rep.rows})

# is the analog ensemble significantly better than the raw forecast?
anen_mean = anen_power.mean(axis=-1)
per_loc_anen = np.array([rmse(anen_mean[l][daylight[l]], truth[l][daylight[l]])
                         for l in range(8)])
per_loc_raw = np.array([rmse(raw_power[l][daylight[l]], truth[l][daylight[l]])
                        for l in range(8)])
print("\nper-location RMSE, analog mean:", np.round(per_loc_anen, 1).tolist())
print("per-location RMSE, raw:        ", np.round(per_loc_raw, 1).tolist())
significant, p = paired_significance(per_loc_anen, per_loc_raw)
print("paired signed-rank test on squared errors: p=%.4f, significant=%s" % (p, significant))
