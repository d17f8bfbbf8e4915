"""Independent reference implementations used as test oracles.

Each oracle is deliberately written as plain scalar code on a different route
than the library (no shared helpers), so agreement is meaningful:

- ``psa_position``: the Blanco-Muriel PSA ephemeris (a published almanac
  algorithm distinct from the library's NOAA-class one);
- ``disc_reference``: the DISC coefficient tables evaluated term by term;
- ``brute_force_search``: exhaustive evaluation of the windowed similarity
  metric plus a full sort;
- ``naive_average_linkage``: average-linkage merges with cluster distances
  recomputed from the raw pairwise matrix at every step (no incremental
  update);
- ``gather_members``: the multivariate ensemble gather as scalar loops;
- ``lookup_aligned``: per-element valid-time search for observation alignment.
"""

from __future__ import annotations

import math

import numpy as np


# -- PSA solar ephemeris --------------------------------------------------------

def psa_position(epoch_seconds: float, latitude: float, longitude: float):
    """Blanco-Muriel et al. solar vector: (zenith_deg, azimuth_deg from north)."""
    rad = math.pi / 180.0
    earth_mean_radius = 6371.01
    astronomical_unit = 149597890.0

    secs = float(epoch_seconds)
    days = int(secs // 86400)
    rem = secs - days * 86400.0
    date = np.datetime64(int(secs), "s").astype("datetime64[D]")
    ymd = str(date).split("-")
    year, month, day = int(ymd[0]), int(ymd[1]), int(ymd[2])
    decimal_hours = rem / 3600.0

    li_aux1 = int((month - 14) / 12) if (month - 14) < 0 else (month - 14) // 12
    li_aux1 = math.trunc((month - 14) / 12.0)
    li_aux2 = (
        (1461 * (year + 4800 + li_aux1)) // 4
        + (367 * (month - 2 - 12 * li_aux1)) // 12
        - (3 * ((year + 4900 + li_aux1) // 100)) // 4
        + day - 32075
    )
    julian_date = li_aux2 - 0.5 + decimal_hours / 24.0
    elapsed = julian_date - 2451545.0

    omega = 2.1429 - 0.0010394594 * elapsed
    mean_longitude = 4.8950630 + 0.017202791698 * elapsed
    mean_anomaly = 6.2400600 + 0.0172019699 * elapsed
    ecliptic_longitude = (
        mean_longitude
        + 0.03341607 * math.sin(mean_anomaly)
        + 0.00034894 * math.sin(2 * mean_anomaly)
        - 0.0001134
        - 0.0000203 * math.sin(omega)
    )
    ecliptic_obliquity = 0.4090928 - 6.2140e-9 * elapsed + 0.0000396 * math.cos(omega)

    sin_el = math.sin(ecliptic_longitude)
    dy = math.cos(ecliptic_obliquity) * sin_el
    dx = math.cos(ecliptic_longitude)
    right_ascension = math.atan2(dy, dx)
    if right_ascension < 0:
        right_ascension += 2 * math.pi
    declination = math.asin(math.sin(ecliptic_obliquity) * sin_el)

    gmst = 6.6974243242 + 0.0657098283 * elapsed + decimal_hours
    lmst = (gmst * 15 + longitude) * rad
    hour_angle = lmst - right_ascension
    lat_rad = latitude * rad
    cos_lat = math.cos(lat_rad)
    sin_lat = math.sin(lat_rad)
    cos_ha = math.cos(hour_angle)
    zenith = math.acos(cos_lat * cos_ha * math.cos(declination) + math.sin(declination) * sin_lat)
    dy = -math.sin(hour_angle)
    dx = math.tan(declination) * cos_lat - sin_lat * cos_ha
    azimuth = math.atan2(dy, dx)
    if azimuth < 0:
        azimuth += 2 * math.pi
    azimuth /= rad
    parallax = (earth_mean_radius / astronomical_unit) * math.sin(zenith)
    zenith = (zenith + parallax) / rad
    return zenith, azimuth


# -- DISC reference --------------------------------------------------------------

def disc_reference(ghi: float, zenith_deg: float, airmass: float, e0n: float):
    """Scalar DISC decomposition from the published coefficient tables.

    Returns (dni, dhi, kt) under the same domain rules as the library: kt
    clamped to [0, 1.1], dni clipped to [0, e0n], no direct component at
    zenith >= 87.5 degrees or zero GHI, dhi floored at zero.
    """
    cos_z = math.cos(math.radians(zenith_deg))
    if e0n * cos_z != 0:
        kt = ghi / (e0n * cos_z)
    else:
        kt = 0.0
    kt = min(max(kt, 0.0), 1.1)

    if zenith_deg >= 87.5 or ghi <= 0.0:
        dni = 0.0
        if ghi <= 0.0:
            kt = 0.0
    else:
        am = airmass
        if kt <= 0.6:
            a = 0.512 - 1.56 * kt + 2.286 * kt * kt - 2.222 * kt ** 3
            b = 0.37 + 0.962 * kt
            c = -0.28 + 0.932 * kt - 2.048 * kt * kt
        else:
            a = -5.743 + 21.77 * kt - 27.49 * kt * kt + 11.56 * kt ** 3
            b = 41.4 - 118.5 * kt + 66.05 * kt * kt + 31.9 * kt ** 3
            c = -47.01 + 184.2 * kt - 222.0 * kt * kt + 73.81 * kt ** 3
        delta_kn = a + b * math.exp(c * am)
        knc = 0.866 - 0.122 * am + 0.0121 * am * am - 0.000653 * am ** 3 + 1.4e-5 * am ** 4
        dni = (knc - delta_kn) * e0n
        dni = min(max(dni, 0.0), e0n)
    dhi = max(ghi - dni * cos_z, 0.0)
    return dni, dhi, kt


# -- similarity / search oracle ---------------------------------------------------

def eq1_distance(values, loc, t, t_prime, lead, weights, sigma, half_window, sigma_epsilon):
    """Scalar windowed similarity; inf when the candidate misses a needed value."""
    n_pred = values.shape[0]
    n_lead = values.shape[3]
    total = 0.0
    for p in range(n_pred):
        w = weights[p]
        s = sigma[p, loc, lead]
        if w == 0.0 or math.isnan(s) or s < sigma_epsilon:
            continue
        acc = 0.0
        for j in range(-half_window, half_window + 1):
            k = lead + j
            if k < 0 or k >= n_lead:
                continue
            f = values[p, loc, t, k]
            a = values[p, loc, t_prime, k]
            if math.isnan(f):
                continue
            if math.isnan(a):
                return math.inf
            diff = f - a
            acc += diff * diff  # x*x, not x**2: the scalar pow path is not exact
        total += (w / s) * math.sqrt(acc)
    return total


def population_sigma(values, search_start, search_stop):
    """Per (predictor, location, lead) population std over finite search values."""
    n_pred, n_loc, _, n_lead = values.shape
    out = np.full((n_pred, n_loc, n_lead), np.nan)
    for p in range(n_pred):
        for l in range(n_loc):
            for j in range(n_lead):
                xs = [values[p, l, i, j] for i in range(search_start, search_stop)
                      if not math.isnan(values[p, l, i, j])]
                if len(xs) >= 2:
                    mean = sum(xs) / len(xs)
                    out[p, l, j] = math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))
    return out


def brute_force_search(values, weights, members, half_window, sigma_epsilon,
                       test_range, search_range, operational, sigma=None,
                       allow_partial=False):
    """Exhaustive analog search; returns (index, distance) arrays shaped
    (L, n_test, n_lead, members) with NaN padding, or raises if a cell has
    fewer finite candidates than members and partial lists are not allowed."""
    n_pred, n_loc, n_init, n_lead = values.shape
    if sigma is None:
        sigma = population_sigma(values, search_range.start, search_range.stop)
    tests = list(test_range)
    out_i = np.full((n_loc, len(tests), n_lead, members), np.nan)
    out_d = np.full((n_loc, len(tests), n_lead, members), np.nan)
    for l in range(n_loc):
        for row, t in enumerate(tests):
            for j in range(n_lead):
                if operational:
                    cands = [c for c in range(search_range.start, t)]
                else:
                    cands = list(range(search_range.start, search_range.stop))
                scored = []
                for c in cands:
                    d = eq1_distance(values, l, t, c, j, weights, sigma, half_window, sigma_epsilon)
                    if math.isfinite(d):
                        scored.append((d, c))
                scored.sort(key=lambda pair: (pair[0], pair[1]))
                take = scored[:members]
                if len(take) < members and not allow_partial:
                    raise AssertionError("oracle: insufficient candidates")
                for m, (d, c) in enumerate(take):
                    out_i[l, row, j, m] = c
                    out_d[l, row, j, m] = d
    return out_i, out_d


# -- gather / alignment oracles ----------------------------------------------------

def gather_members(aligned_values, search_index):
    """Scalar multivariate gather: member m of every variable comes from the
    same historical init index."""
    n_var = aligned_values.shape[0]
    n_loc, n_test, n_lead, members = search_index.shape
    out = np.full((n_var, n_loc, n_test, n_lead, members), np.nan)
    for v in range(n_var):
        for l in range(n_loc):
            for t in range(n_test):
                for j in range(n_lead):
                    for m in range(members):
                        src = search_index[l, t, j, m]
                        if not math.isnan(src):
                            out[v, l, t, j, m] = aligned_values[v, l, int(src), j]
    return out


def lookup_aligned(obs_values, obs_times, init_times, lead_times):
    """Per-element exact valid-time lookup."""
    n_var, n_loc, _ = obs_values.shape
    out = np.full((n_var, n_loc, len(init_times), len(lead_times)), np.nan)
    index_of = {int(t): k for k, t in enumerate(obs_times)}
    for v in range(n_var):
        for l in range(n_loc):
            for i, t0 in enumerate(init_times):
                for j, dt in enumerate(lead_times):
                    k = index_of.get(int(t0) + int(dt))
                    if k is not None:
                        out[v, l, i, j] = obs_values[v, l, k]
    return out


# -- clustering oracle ---------------------------------------------------------------

def naive_average_linkage(points, stop_at=1):
    """O(n^3) average linkage recomputing cluster distances from the raw
    pairwise matrix at every merge; same positional tie-breaking as the
    library (smallest pair (i, j))."""
    n = len(points)
    base = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            base[i, j] = math.sqrt(sum((points[i][k] - points[j][k]) ** 2
                                       for k in range(points.shape[1])))
    clusters = [[i] for i in range(n)]
    merges = []
    while len(clusters) > stop_at:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                total = 0.0
                for a in clusters[i]:
                    for b in clusters[j]:
                        total += base[a, b]
                d = total / (len(clusters[i]) * len(clusters[j]))
                if best is None or d < best[2]:
                    best = (i, j, d)
        i, j, d = best
        merges.append((tuple(clusters[i]), tuple(clusters[j]), d))
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    return merges, clusters


# -- CRPS oracle ----------------------------------------------------------------------

def crps_double_sum(members, truth):
    m = len(members)
    term1 = sum(abs(x - truth) for x in members) / m
    term2 = sum(abs(x - y) for x in members for y in members) / (2.0 * m * m)
    return term1 - term2
