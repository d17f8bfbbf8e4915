"""The five-step power simulation chain, stage by stage and then end to end.

Sun position -> GHI decomposition (DISC) -> plane-of-array transposition
(Hay-Davies) -> cell temperature -> module power, scaled to a 10 kW system.
The astronomy is precomputed once and shared by every ensemble member.
"""

import numpy as np

from anensolar import (
    LeadTimeAxis,
    LocationSet,
    SystemConfig,
    TimeAxis,
    WeatherSample,
    cell_temperature,
    disc_decompose,
    load_module_catalog,
    module_power,
    precompute_solar,
    simulate_system,
    system_scale,
    transpose_poa,
)

# the bundled catalog: 11 modules sorted by decreasing STC rating
catalog = load_module_catalog()
print(f"{'code':10s} {'area':>6s} {'cells':>5s} {'STC W':>6s} {'eff %':>5s}")
for spec in catalog:
    print(f"{spec.code:10s} {spec.area:6.3f} {spec.cells_in_series:5d} "
          f"{spec.stc_rating:6.1f} {spec.efficiency:5.2f}")

system = SystemConfig(capacity=10_000.0, tilt=0.0, azimuth=180.0)
sp128 = catalog[0]
print("\nSP128 at 10 kW -> %.0f panels in series" % system_scale(sp128, system))

# precompute the solar cache for one site and day
site = LocationSet.from_coords([40.79], [-77.86], [360.0])
cache = precompute_solar(site, TimeAxis([1623456000]), LeadTimeAxis(3600 * np.arange(24)))
noon = int(np.argmin(cache.apparent_zenith[0, 0]))
sun = cache.sample(0, 0, noon)
print("\nsolar noon lead %d: zenith %.1f deg, E0n %.0f W/m^2, air mass %.2f"
      % (noon, sun.apparent_zenith, sun.e0n, sun.airmass))

# walk the chain explicitly for a partly cloudy noon sample
ghi, albedo, t_amb, wind = 620.0, 0.2, 24.0, 3.0
comp = disc_decompose(ghi, sun.apparent_zenith, sun.airmass, sun.e0n)
print("\nDISC: GHI %.0f -> DNI %.0f + DHI %.0f (kt=%.2f)"
      % (ghi, comp.dni, comp.dhi, comp.kt))

poa = transpose_poa(comp, ghi, albedo, sun.apparent_zenith, sun.azimuth, sun.e0n, system)
print("POA:  direct %.0f + sky %.0f + ground %.0f = %.0f W/m^2 "
      "(horizontal panel: equals GHI)" % (poa.direct, poa.sky_diffuse,
                                          poa.ground_diffuse, poa.global_))

t_cell = cell_temperature(poa.global_, t_amb, wind, sp128)
print("cell temperature: %.1f deg C at %.1f deg C ambient" % (t_cell, t_amb))

p_module = module_power(poa.global_, t_cell, sp128)
print("module power: %.1f W -> system power %.0f W"
      % (p_module, p_module * system_scale(sp128, system)))

# the composed operation gives the same number
weather = WeatherSample(ghi, albedo, t_amb, wind)
print("simulate_system agrees: %.0f W" % simulate_system(weather, sun, sp128, system))

# same weather, different panels: the spec is the only thing that changes
print("\nsystem power for the same weather across the catalog:")
for spec in catalog:
    p = simulate_system(weather, sun, spec, system)
    print("  %-10s %6.0f W" % (spec.code, p))
