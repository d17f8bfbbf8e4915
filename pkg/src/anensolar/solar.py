"""Deterministic solar astronomy: sun position, extraterrestrial irradiance,
relative air mass, and a precomputed cache shared by all ensemble members.

The position algorithm is the NOAA/Meeus low-precision ephemeris (about 0.2
degrees over 2000-2050), which is plenty at mesoscale grid spacing and hourly
cadence. Air mass is the Kasten-Young relative formula without pressure
correction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coredata import MISSING, LeadTimeAxis, LocationSet, TimeAxis
from . import tensorio

SOLAR_CONSTANT = 1361.1  # W/m^2, total solar irradiance at 1 AU

_DEG = np.pi / 180.0


def _day_of_year(epoch_seconds) -> np.ndarray:
    t = np.asarray(epoch_seconds, dtype="int64").astype("datetime64[s]")
    days = t.astype("datetime64[D]")
    year_start = days.astype("datetime64[Y]").astype("datetime64[D]")
    return (days - year_start).astype("int64") + 1


def distance_correction(day_of_year, form: str = "cosine") -> np.ndarray:
    """Earth-sun distance irradiance correction r, so that E0n = S0 * r.

    ``form`` selects the published approximation: "cosine" is
    1 + 0.033*cos(2*pi*doy/365); "spencer" is the four-term Fourier series.
    """
    doy = np.asarray(day_of_year, dtype=float)
    if form == "cosine":
        return 1.0 + 0.033 * np.cos(2.0 * np.pi * doy / 365.0)
    if form == "spencer":
        g = 2.0 * np.pi * (doy - 1.0) / 365.0
        return (
            1.000110
            + 0.034221 * np.cos(g)
            + 0.001280 * np.sin(g)
            + 0.000719 * np.cos(2.0 * g)
            + 0.000077 * np.sin(2.0 * g)
        )
    raise ValueError(f"unknown distance-correction form {form!r}")


def extraterrestrial_normal(epoch_seconds, solar_constant: float = SOLAR_CONSTANT,
                            form: str = "cosine"):
    """Extraterrestrial normal irradiance E0n in W/m^2 at the given UTC instant(s)."""
    r = distance_correction(_day_of_year(epoch_seconds), form=form)
    out = solar_constant * r
    if np.isscalar(epoch_seconds):
        return float(out)
    return out


def relative_airmass(apparent_zenith):
    """Kasten-Young relative air mass; NaN at or below the horizon (zenith >= 90)."""
    z = np.asarray(apparent_zenith, dtype=float)
    with np.errstate(invalid="ignore"):
        am = 1.0 / (np.cos(z * _DEG) + 0.50572 * (96.07995 - z) ** (-1.6364))
        am = np.where(z >= 90.0, MISSING, am)
    if np.isscalar(apparent_zenith):
        return float(am)
    return am


@dataclass(frozen=True)
class SolarPosition:
    """Sun position at one instant and place (angles in degrees, EOT in minutes)."""

    apparent_zenith: float
    azimuth: float
    declination: float
    equation_of_time: float


def _noaa_arrays(epoch_seconds, latitude, longitude):
    """Vectorized NOAA ephemeris; broadcasts over inputs.

    Returns (apparent_zenith, azimuth, declination, equation_of_time).
    Azimuth is degrees clockwise from north; zenith includes the standard
    atmospheric refraction correction.
    """
    t = np.asarray(epoch_seconds, dtype=float)
    lat = np.asarray(latitude, dtype=float)
    lon = np.asarray(longitude, dtype=float)

    jd = t / 86400.0 + 2440587.5
    jc = (jd - 2451545.0) / 36525.0

    geom_mean_long = np.mod(280.46646 + jc * (36000.76983 + 0.0003032 * jc), 360.0)
    geom_mean_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc)
    ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc)

    m = geom_mean_anom * _DEG
    eq_center = (
        np.sin(m) * (1.914602 - jc * (0.004817 + 0.000014 * jc))
        + np.sin(2 * m) * (0.019993 - 0.000101 * jc)
        + np.sin(3 * m) * 0.000289
    )
    true_long = geom_mean_long + eq_center
    omega = (125.04 - 1934.136 * jc) * _DEG
    app_long = true_long - 0.00569 - 0.00478 * np.sin(omega)

    mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0
    obliq = mean_obliq + 0.00256 * np.cos(omega)

    decl = np.arcsin(np.sin(obliq * _DEG) * np.sin(app_long * _DEG)) / _DEG

    y = np.tan(obliq * _DEG / 2.0) ** 2
    l0 = geom_mean_long * _DEG
    eot = 4.0 / _DEG * (
        y * np.sin(2 * l0)
        - 2.0 * ecc * np.sin(m)
        + 4.0 * ecc * y * np.sin(m) * np.cos(2 * l0)
        - 0.5 * y * y * np.sin(4 * l0)
        - 1.25 * ecc * ecc * np.sin(2 * m)
    )  # minutes

    minutes_utc = np.mod(t, 86400.0) / 60.0
    true_solar_minutes = np.mod(minutes_utc + eot + 4.0 * lon, 1440.0)
    hour_angle = true_solar_minutes / 4.0 - 180.0
    hour_angle = np.where(true_solar_minutes / 4.0 < 0.0, hour_angle + 360.0, hour_angle)
    h = hour_angle * _DEG

    phi = lat * _DEG
    d = decl * _DEG
    cos_zen = np.sin(phi) * np.sin(d) + np.cos(phi) * np.cos(d) * np.cos(h)
    cos_zen = np.clip(cos_zen, -1.0, 1.0)
    zen = np.arccos(cos_zen) / _DEG

    with np.errstate(invalid="ignore", divide="ignore"):
        az_ratio = (np.sin(phi) * cos_zen - np.sin(d)) / (np.cos(phi) * np.sin(zen * _DEG))
        az_ratio = np.clip(az_ratio, -1.0, 1.0)
        az_acos = np.arccos(az_ratio) / _DEG
    az_acos = np.where(np.isnan(az_acos), 0.0, az_acos)
    azimuth = np.where(hour_angle > 0.0, np.mod(az_acos + 180.0, 360.0), np.mod(540.0 - az_acos, 360.0))

    elev = 90.0 - zen
    refraction = _refraction_correction(elev)
    apparent_zenith = np.clip(zen - refraction, 0.0, 180.0)
    return apparent_zenith, azimuth, decl, eot


def _refraction_correction(elevation_deg):
    """NOAA atmospheric refraction in degrees as a function of true elevation."""
    e = np.asarray(elevation_deg, dtype=float)
    te = np.tan(np.clip(e, -9.0, 89.9) * _DEG)
    with np.errstate(divide="ignore", invalid="ignore"):
        high = 58.1 / te - 0.07 / te**3 + 0.000086 / te**5
        low = 1735.0 + e * (-518.2 + e * (103.4 + e * (-12.79 + 0.711 * e)))
        below = -20.772 / te
    r = np.where(e > 85.0, 0.0, np.where(e > 5.0, high, np.where(e > -0.575, low, below)))
    return r / 3600.0


def solar_position(epoch_seconds: float, latitude: float, longitude: float) -> SolarPosition:
    """Sun position for one UTC instant at (latitude, longitude) in degrees."""
    zen, az, decl, eot = _noaa_arrays(float(epoch_seconds), float(latitude), float(longitude))
    return SolarPosition(float(zen), float(az), float(decl), float(eot))


@dataclass(frozen=True)
class SolarSample:
    """One precomputed cell of the solar cache."""

    apparent_zenith: float
    azimuth: float
    declination: float
    equation_of_time: float
    e0n: float
    airmass: float


_CACHE_FIELDS = ("apparent_zenith", "azimuth", "declination", "equation_of_time", "e0n", "airmass")


@dataclass(frozen=True)
class SolarCacheTable:
    """Sun geometry precomputed once for every (location, init, lead) cell.

    All arrays are (L, I, J). The table is immutable and meant to be shared:
    every ensemble member and every module reads the same astronomy instead of
    recomputing it.
    """

    locations: LocationSet
    init_times: TimeAxis
    lead_times: LeadTimeAxis
    apparent_zenith: np.ndarray
    azimuth: np.ndarray
    declination: np.ndarray
    equation_of_time: np.ndarray
    e0n: np.ndarray
    airmass: np.ndarray

    def __post_init__(self):
        shape = (len(self.locations), len(self.init_times), len(self.lead_times))
        for name in _CACHE_FIELDS:
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != shape:
                raise ValueError(f"solar cache field {name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return self.apparent_zenith.shape

    def daylight_mask(self) -> np.ndarray:
        """True where the sun is above the horizon (zenith < 90 degrees)."""
        return self.apparent_zenith < 90.0

    def sample(self, location: int, init_index: int, lead_index: int) -> SolarSample:
        idx = (location, init_index, lead_index)
        return SolarSample(*(float(getattr(self, f)[idx]) for f in _CACHE_FIELDS))

    def write(self, path):
        values = np.stack([getattr(self, f) for f in _CACHE_FIELDS])
        tensorio.write_extended(
            "solar", path,
            field_names=_CACHE_FIELDS,
            locations=self.locations,
            sections=[("init_times", self.init_times.instants), ("lead_times", self.lead_times.offsets)],
            values=values,
        )

    @classmethod
    def read(cls, path) -> "SolarCacheTable":
        raw = tensorio.read_tensor(path)
        if not isinstance(raw, dict) or raw["kind"] != "solar":
            raise tensorio.TensorHeaderError("not a solar cache file")
        if tuple(raw["fields"]) != _CACHE_FIELDS:
            raise tensorio.TensorHeaderError("unexpected solar cache fields")
        sec = raw["sections"]
        return cls(raw["locations"], TimeAxis(sec["init_times"]), LeadTimeAxis(sec["lead_times"]),
                   *(raw["values"][i] for i in range(len(_CACHE_FIELDS))))


def precompute_solar(locations: LocationSet, init_times: TimeAxis, lead_times: LeadTimeAxis,
                     solar_constant: float = SOLAR_CONSTANT, form: str = "cosine") -> SolarCacheTable:
    """Precompute sun geometry over the full location x init x lead cross product."""
    valid = init_times.instants[:, None] + lead_times.offsets[None, :]  # (I, J)
    lat = locations.latitude[:, None, None]
    lon = locations.longitude[:, None, None]
    zen, az, decl, eot = _noaa_arrays(valid[None, :, :].astype(float), lat, lon)
    shape = (len(locations), len(init_times), len(lead_times))
    decl = np.broadcast_to(decl, shape)
    eot = np.broadcast_to(eot, shape)
    e0n = np.broadcast_to(extraterrestrial_normal(valid, solar_constant, form), shape)
    am = relative_airmass(zen)
    return SolarCacheTable(locations, init_times, lead_times, zen, az, decl, eot, e0n, am)
