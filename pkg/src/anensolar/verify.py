"""Skill metrics (RMSE, bias, CRPS, ensemble spread), solar-noon lead-time
alignment, grouped aggregation, and paired significance testing.

Bias is mean(pred - truth), so under-prediction is negative. Night cells
(cache zenith >= 90 degrees) are excluded from every metric. Truth is
expected to be power simulated from the analysis through the identical
simulation chain; the reporting helpers make no attempt to verify against
anything else.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .coredata import TimeAxis
from .errors import EmptySeriesError
from .solar import SolarCacheTable

SEASON_OF_MONTH = {12: "DJF", 1: "DJF", 2: "DJF",
                   3: "MAM", 4: "MAM", 5: "MAM",
                   6: "JJA", 7: "JJA", 8: "JJA",
                   9: "SON", 10: "SON", 11: "SON"}

DAYPART_SLOTS = {"morning": (8, 10), "noon": (11, 13), "afternoon": (14, 16)}

GROUPINGS = ("lead", "location", "region", "season", "daypart")


def _paired(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError("series lengths differ")
    keep = np.isfinite(pred) & np.isfinite(truth)
    if not keep.any():
        raise EmptySeriesError("no finite pairs after dropping missing values")
    return pred[keep], truth[keep]


def rmse(pred, truth) -> float:
    """Root-mean-square error over finite pairs."""
    p, t = _paired(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def bias(pred, truth) -> float:
    """Mean error, mean(pred - truth); negative means under-prediction."""
    p, t = _paired(pred, truth)
    return float(np.mean(p - t))


def crps(ensemble, truth: float) -> float:
    """Empirical continuous ranked probability score of one ensemble.

    (1/M) sum_i |x_i - y| - (1/(2 M^2)) sum_ij |x_i - x_j|. A single-member
    ensemble reduces to the absolute error.
    """
    x = np.asarray(ensemble, dtype=float).ravel()
    if x.size == 0:
        raise EmptySeriesError("ensemble has no members")
    term1 = np.mean(np.abs(x - truth))
    term2 = np.mean(np.abs(x[:, None] - x[None, :])) / 2.0
    return float(term1 - term2)


def crps_field(ensemble: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Vectorized CRPS over the trailing member axis; NaN where the truth or
    any member is missing."""
    x = np.asarray(ensemble, dtype=float)
    y = np.asarray(truth, dtype=float)
    term1 = np.mean(np.abs(x - y[..., None]), axis=-1)
    term2 = np.mean(np.abs(x[..., :, None] - x[..., None, :]), axis=(-2, -1)) / 2.0
    return term1 - term2


def spread_field(ensemble: np.ndarray) -> np.ndarray:
    """Ensemble standard deviation (population) over the trailing member axis."""
    return np.asarray(ensemble, dtype=float).std(axis=-1)


@dataclass(frozen=True)
class SolarNoonAlignment:
    """Per-location lead remapping that puts the local solar noon at slot 12.

    ``offsets[l]`` is how many lead steps location l's noon sits after slot
    12; a lead index j maps to slot ``j - offsets[l]``. The remapping is a
    pure shift, so relative lead ordering is preserved.
    """

    offsets: np.ndarray
    noon_slot: int = 12

    def slots(self, n_leads: int) -> np.ndarray:
        """Slot of every (location, lead) pair, shape (L, n_leads)."""
        return np.arange(n_leads)[None, :] - self.offsets[:, None]


def align_solar_noon(cache: SolarCacheTable, noon_slot: int = 12) -> SolarNoonAlignment:
    """Find each location's minimum-mean-zenith lead and shift it to slot 12."""
    if cache.apparent_zenith.size == 0:
        raise ValueError("solar cache is empty")
    mean_zenith = cache.apparent_zenith.mean(axis=1)  # (L, J)
    noon_lead = np.argmin(mean_zenith, axis=1)
    return SolarNoonAlignment(noon_lead - noon_slot, noon_slot)


@dataclass(frozen=True)
class ReportRow:
    group: object
    rmse: float
    bias: float
    crps: float
    spread: float
    count: int


@dataclass(frozen=True)
class VerifyReport:
    grouping: str
    rows: tuple

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["group", "rmse", "bias", "crps", "spread", "count"])
            for r in self.rows:
                out.writerow([r.group, repr(r.rmse), repr(r.bias), repr(r.crps),
                              repr(r.spread), r.count])

    def by_group(self) -> dict:
        return {r.group: r for r in self.rows}


def _month_of(epoch_seconds: np.ndarray) -> np.ndarray:
    t = np.asarray(epoch_seconds, dtype="int64").astype("datetime64[s]")
    return t.astype("datetime64[M]").astype(int) % 12 + 1


def aggregate(ensemble: np.ndarray, truth: np.ndarray, grouping: str, *,
              init_times: TimeAxis | None = None,
              alignment: SolarNoonAlignment | None = None,
              daylight: np.ndarray | None = None,
              region_map: dict | None = None) -> VerifyReport:
    """Grouped verification of an ensemble (or deterministic) power field.

    ``ensemble`` is (L, I, J, M) (a trailing member axis of one is added for
    deterministic input) and ``truth`` is (L, I, J). Grouping keys: "lead"
    (solar-aligned slot when an alignment is given), "location", "region"
    (requires region_map; unmapped locations are excluded), "season" (DJF/
    MAM/JJA/SON from the init time), "daypart" (aligned slots 8-10, 11-13,
    14-16). Cells outside daylight, with missing truth, or with any missing
    member are excluded. Group metrics recombine: bias, CRPS, spread, and
    squared RMSE are count-weighted means.
    """
    if grouping in ("lead-time", "lead_time"):
        grouping = "lead"
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping key {grouping!r}")
    ens = np.asarray(ensemble, dtype=float)
    if ens.ndim == 3:
        ens = ens[..., None]
    tru = np.asarray(truth, dtype=float)
    n_loc, n_init, n_lead, _ = ens.shape

    valid = np.isfinite(tru) & np.all(np.isfinite(ens), axis=-1)
    if daylight is not None:
        valid &= daylight

    mean = ens.mean(axis=-1)
    err = mean - tru
    crps_all = crps_field(ens, tru)
    spread_all = spread_field(ens)

    if alignment is not None:
        slots = alignment.slots(n_lead)  # (L, J)
    else:
        slots = np.broadcast_to(np.arange(n_lead)[None, :], (n_loc, n_lead))

    if grouping == "season":
        if init_times is None:
            raise ValueError("season grouping needs init_times")
        season = np.array([SEASON_OF_MONTH[m] for m in _month_of(init_times.instants)])

    def key_array():
        keys = np.empty((n_loc, n_init, n_lead), dtype=object)
        for l in range(n_loc):
            for j in range(n_lead):
                if grouping == "lead":
                    keys[l, :, j] = int(slots[l, j])
                elif grouping == "daypart":
                    slot = int(slots[l, j])
                    label = None
                    for part, (lo, hi) in DAYPART_SLOTS.items():
                        if lo <= slot <= hi:
                            label = part
                    keys[l, :, j] = label
                elif grouping == "location":
                    keys[l, :, j] = l
                elif grouping == "region":
                    keys[l, :, j] = region_map.get(l) if region_map else None
                else:  # season
                    keys[l, :, j] = season
        return keys

    if grouping == "region" and region_map is None:
        raise ValueError("region grouping needs a region map")
    keys = key_array()

    groups = {}
    flat_keys = keys.ravel()
    flat_valid = valid.ravel()
    order = np.arange(flat_keys.size)
    for idx in order[flat_valid]:
        k = flat_keys[idx]
        if k is None:
            continue
        groups.setdefault(k, []).append(idx)

    rows = []
    e2 = (err ** 2).ravel()
    b = err.ravel()
    c = crps_all.ravel()
    s = spread_all.ravel()
    for k in sorted(groups, key=lambda v: (str(type(v)), v)):
        sel = np.array(groups[k])
        rows.append(ReportRow(
            group=k,
            rmse=float(np.sqrt(e2[sel].mean())),
            bias=float(b[sel].mean()),
            crps=float(c[sel].mean()),
            spread=float(s[sel].mean()),
            count=int(sel.size),
        ))
    return VerifyReport(grouping, tuple(rows))


def paired_significance(errors_a, errors_b, level: float = 0.05):
    """Two-sided paired Wilcoxon signed-rank test on squared-error differences.

    Returns (significant, p_value). Requires at least eight pairs; identical
    samples yield (False, 1.0).
    """
    a = np.asarray(errors_a, dtype=float).ravel()
    b = np.asarray(errors_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    keep = np.isfinite(a) & np.isfinite(b)
    a, b = a[keep], b[keep]
    if a.size < 8:
        raise ValueError("need at least 8 paired samples")
    diff = a**2 - b**2
    if np.all(diff == 0.0):
        return False, 1.0
    result = stats.wilcoxon(diff, alternative="two-sided")
    p = float(result.pvalue)
    return p < level, p


def read_region_map(path) -> dict:
    """Two-column CSV (location, region) -> {location id: region label}."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:] if rows and not rows[0][0].lstrip("-").isdigit() else rows
    return {int(r[0]): r[1] for r in body if len(r) >= 2 and r[1]}
