"""Synthetic ground-truth RSRP engine and the empirical-fit baseline.

The mean RSRP of a bin is a log-distance path loss term plus explicit
environment contributions: per-building crossing loss, per-metre foliage
loss, a spatially correlated shadow field and a seasonal month offset.
Individual measurements add iid Gaussian noise on top of the bin mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Bin, Point2D, ScenarioError, SiteMap, assign_sector, \
    segment_obstructions


@dataclass(frozen=True)
class PropagationParams:
    p0_dbm: float = -30.0
    n: float = 3.0
    d0_m: float = 1.0
    l_building_db: float = 15.0
    l_foliage_db_per_m: float = 0.2
    shadow_sigma_db: float = 4.0
    shadow_corr_m: float = 50.0
    month_offsets_db: tuple = tuple(0.0 for _ in range(12))
    sample_sigma_db: float = 2.0
    gps_sigma_m: float = 0.0
    shadow_seed: int = 0

    def __post_init__(self):
        if self.d0_m <= 0:
            raise ValueError("reference distance d0_m must be positive")
        if self.n <= 0:
            raise ValueError("path-loss exponent n must be positive")
        if min(self.shadow_sigma_db, self.sample_sigma_db,
               self.gps_sigma_m) < 0:
            raise ValueError("standard deviations must be nonnegative")
        if len(self.month_offsets_db) != 12:
            raise ValueError("month_offsets_db needs 12 entries")


@dataclass(frozen=True)
class MeasurementRecord:
    bin_id: int
    x_loc: float
    y_loc: float
    sector: int
    month: int
    rsrp_dbm: float

    def __post_init__(self):
        if not math.isfinite(self.rsrp_dbm):
            raise ValueError(f"bin {self.bin_id}: non-finite RSRP")
        if not 1 <= self.month <= 12:
            raise ValueError(f"bin {self.bin_id}: month {self.month} out of range")


@dataclass(frozen=True)
class BinDataset:
    records: tuple[MeasurementRecord, ...]
    scenario_ref: str = ""
    provenance: str = ""


def ldpl_power(params: PropagationParams, d: float, w: float = 0.0) -> float:
    """Log-distance path loss: P0 - 10 n log10(d/d0) + w, in dBm."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return params.p0_dbm - 10.0 * params.n * math.log10(d / params.d0_m) + w


class ShadowField:
    """Deterministic correlated shadowing: iid normal lattice values at
    pitch corr_m, bilinearly interpolated and scaled to sigma dB."""

    def __init__(self, bounds, sigma_db: float, corr_m: float, seed: int):
        self.sigma = sigma_db
        self.pitch = max(corr_m, 1e-6)
        self.x0, self.y0 = bounds.min_x, bounds.min_y
        nx = int(math.ceil(bounds.width / self.pitch)) + 2
        ny = int(math.ceil(bounds.height / self.pitch)) + 2
        rng = np.random.default_rng(seed)
        self.grid = rng.standard_normal((ny, nx))

    def value(self, x: float, y: float) -> float:
        if self.sigma == 0.0:
            return 0.0
        u = (x - self.x0) / self.pitch
        v = (y - self.y0) / self.pitch
        i, j = int(v), int(u)
        i = min(max(i, 0), self.grid.shape[0] - 2)
        j = min(max(j, 0), self.grid.shape[1] - 2)
        fu, fv = u - j, v - i
        g = self.grid
        w = np.array([(1 - fu) * (1 - fv), fu * (1 - fv),
                      (1 - fu) * fv, fu * fv])
        val = (g[i, j] * w[0] + g[i, j + 1] * w[1]
               + g[i + 1, j] * w[2] + g[i + 1, j + 1] * w[3])
        # weight-norm scaling keeps the marginal std at sigma everywhere
        return float(self.sigma * val / np.linalg.norm(w))


class PropagationEngine:
    """Caches the shadow field and per-bin obstruction summaries for one
    (site, params) pair."""

    def __init__(self, site: SiteMap, params: PropagationParams):
        self.site = site
        self.params = params
        self.shadow = ShadowField(site.bounds, params.shadow_sigma_db,
                                  params.shadow_corr_m, params.shadow_seed)
        self._obstructions: dict[int, tuple[int, float]] = {}

    def _bin_obstruction(self, b: Bin) -> tuple[int, float]:
        cached = self._obstructions.get(b.id)
        if cached is None:
            obs = segment_obstructions(self.site, self.site.bs.position, b.center)
            cached = (obs.buildings_crossed, obs.foliage_inside_m)
            self._obstructions[b.id] = cached
        return cached

    def mean_rsrp(self, b: Bin, month: int) -> float:
        if not 1 <= month <= 12:
            raise ValueError(f"month {month} out of range")
        bs = self.site.bs.position
        d = bs.distance(b.center)
        if d == 0.0:
            raise ScenarioError(f"bin {b.id} center coincides with the BS")
        buildings, foliage_m = self._bin_obstruction(b)
        return (ldpl_power(self.params, d)
                + self.shadow.value(b.center.x, b.center.y)
                - self.params.l_building_db * buildings
                - self.params.l_foliage_db_per_m * foliage_m
                + self.params.month_offsets_db[month - 1])


def synth_rsrp_mean(site: SiteMap, params: PropagationParams, b: Bin,
                    month: int) -> float:
    """Ground-truth mean RSRP of one bin (convenience wrapper; build a
    PropagationEngine for repeated queries)."""
    return PropagationEngine(site, params).mean_rsrp(b, month)


def sample_measurements(site: SiteMap, params: PropagationParams,
                        months: list[int], samples_per_bin: int,
                        seed: int) -> BinDataset:
    """Draw per-(bin, month) Gaussian measurement samples around the
    synthetic mean. Per-bin substreams make the result independent of
    iteration order.

    Reported coordinates mimic consumer positioning: the true location
    (the bin the measurement belongs to) plus isotropic Gaussian error
    of gps_sigma_m metres, as in real drive-test logs."""
    if samples_per_bin < 1:
        raise ValueError("samples_per_bin must be >= 1")
    engine = PropagationEngine(site, params)
    records = []
    for b in site.bins:
        sector = assign_sector(site.bs, b.center)
        for month in months:
            mean = engine.mean_rsrp(b, month)
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=(seed, b.id, month)))
            noise = rng.standard_normal(samples_per_bin) * params.sample_sigma_db
            gps = rng.standard_normal((samples_per_bin, 2)) * params.gps_sigma_m
            for v, (gx, gy) in zip(noise, gps):
                records.append(MeasurementRecord(
                    bin_id=b.id, x_loc=b.center.x + float(gx),
                    y_loc=b.center.y + float(gy),
                    sector=sector, month=month, rsrp_dbm=mean + float(v)))
    return BinDataset(records=tuple(records),
                      scenario_ref=site.bs.tx_label,
                      provenance=f"synthetic seed {seed}")


# -- empirical LDPL baseline ---------------------------------------------

@dataclass(frozen=True)
class EmpiricalFit:
    p0_dbm: float
    n: float
    d0_m: float = 1.0


def fit_empirical_baseline(train: BinDataset, bs: Point2D,
                           d0_m: float = 1.0) -> EmpiricalFit:
    """Least-squares LDPL fit: RSRP regressed on -10 log10(d/d0)."""
    d = np.array([math.hypot(r.x_loc - bs.x, r.y_loc - bs.y)
                  for r in train.records])
    y = np.array([r.rsrp_dbm for r in train.records])
    if len(d) < 2 or np.any(d <= 0):
        raise ValueError("empirical fit needs >=2 records at positive distances")
    x = -10.0 * np.log10(d / d0_m)
    if np.ptp(x) < 1e-12:
        raise ValueError("empirical fit is rank-deficient: all records equidistant")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return EmpiricalFit(p0_dbm=float(coef[0]), n=float(coef[1]), d0_m=d0_m)


def predict_empirical(fit: EmpiricalFit, d: float) -> float:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return fit.p0_dbm - 10.0 * fit.n * math.log10(d / fit.d0_m)


# -- dataset CSV I/O ------------------------------------------------------

CSV_HEADER = ["bin_id", "x_loc", "y_loc", "sector", "month", "rsrp_dbm"]


def save_dataset(ds: BinDataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in ds.records:
            writer.writerow([r.bin_id, repr(r.x_loc), repr(r.y_loc),
                             r.sector, r.month, repr(r.rsrp_dbm)])


def load_dataset(path, scenario_ref: str = "") -> BinDataset:
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected dataset header {header}")
        for row in reader:
            records.append(MeasurementRecord(
                bin_id=int(row[0]), x_loc=float(row[1]), y_loc=float(row[2]),
                sector=int(row[3]), month=int(row[4]), rsrp_dbm=float(row[5])))
    return BinDataset(records=tuple(records), scenario_ref=scenario_ref,
                      provenance=f"file {path}")
