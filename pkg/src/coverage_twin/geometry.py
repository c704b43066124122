"""Scenario geometry: site maps, sectors, obstruction queries.

A SiteMap bundles the axis-aligned bounds, building/foliage polygons,
a 3-sector base station and the regular bin grid tiling the bounds.
Scenario files are JSON (see load_scenario); synthetic maps come from
generate_synthetic_map.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import LineString, Point as ShPoint, Polygon as ShPolygon


class ScenarioError(ValueError):
    """Malformed or invalid scenario data."""


BUILDING = "building"
FOLIAGE = "foliage"


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ScenarioError(f"non-finite point ({self.x}, {self.y})")

    def distance(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class SurfacePolygon:
    kind: str
    vertices: tuple[Point2D, ...]

    def __post_init__(self):
        if self.kind not in (BUILDING, FOLIAGE):
            raise ScenarioError(f"unknown polygon kind {self.kind!r}")
        if len(self.vertices) < 3:
            raise ScenarioError(
                f"{self.kind} polygon needs >=3 vertices, got {len(self.vertices)}")
        if not self.shapely().is_valid:
            raise ScenarioError(
                f"{self.kind} polygon is self-intersecting or degenerate")
        if self.area() <= 0.0:
            raise ScenarioError(f"{self.kind} polygon is degenerate (zero area)")

    def area(self) -> float:
        """Unsigned area via the shoelace formula."""
        s = 0.0
        pts = self.vertices
        for i in range(len(pts)):
            a, b = pts[i], pts[(i + 1) % len(pts)]
            s += a.x * b.y - b.x * a.y
        return abs(s) / 2.0

    def shapely(self) -> ShPolygon:
        return ShPolygon([(p.x, p.y) for p in self.vertices])


@dataclass(frozen=True)
class BaseStation:
    position: Point2D
    sector_azimuths_deg: tuple[float, float, float]
    tx_label: str = "bs0"

    def __post_init__(self):
        az = self.sector_azimuths_deg
        if len(az) != 3:
            raise ScenarioError("base station needs exactly 3 sector azimuths")
        if any(not (0.0 <= a < 360.0) for a in az):
            raise ScenarioError(f"azimuths must lie in [0, 360), got {az}")
        spaced = sorted(a % 360.0 for a in az)
        gaps = [(spaced[(i + 1) % 3] - spaced[i]) % 360.0 for i in range(3)]
        if any(abs(g - 120.0) > 1e-9 for g in gaps):
            raise ScenarioError(
                f"sector azimuths must bound three 120-degree wedges, got {az}")


@dataclass(frozen=True)
class Bin:
    id: int
    center: Point2D
    extent_m: float = 10.0

    def __post_init__(self):
        if self.extent_m <= 0:
            raise ScenarioError(f"bin {self.id}: extent must be positive")


@dataclass(frozen=True)
class Bounds:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ScenarioError(f"empty bounds {self}")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def contains(self, p: Point2D) -> bool:
        return self.min_x <= p.x <= self.max_x and self.min_y <= p.y <= self.max_y


@dataclass(frozen=True)
class SiteMap:
    bounds: Bounds
    polygons: tuple[SurfacePolygon, ...]
    bs: BaseStation
    bins: tuple[Bin, ...]
    bin_extent_m: float = 10.0

    def __post_init__(self):
        if not self.bounds.contains(self.bs.position):
            raise ScenarioError("base station lies outside bounds")
        for i, poly in enumerate(self.polygons):
            for v in poly.vertices:
                if not self.bounds.contains(v):
                    raise ScenarioError(f"polygon {i} extends outside bounds")
        for b in self.bins:
            if not self.bounds.contains(b.center):
                raise ScenarioError(f"bin {b.id} center outside bounds")
        ids = [b.id for b in self.bins]
        if len(ids) != len(set(ids)):
            raise ScenarioError("duplicate bin ids")

    def bin_by_id(self, bin_id: int) -> Bin:
        for b in self.bins:
            if b.id == bin_id:
                return b
        raise KeyError(f"no bin with id {bin_id}")


@dataclass(frozen=True)
class ObstructionSummary:
    buildings_crossed: int
    foliage_crossed: int
    building_inside_m: float
    foliage_inside_m: float


def bin_grid(bounds: Bounds, extent_m: float) -> tuple[Bin, ...]:
    """Regular grid of square bins tiling the bounds, row-major ids from SW."""
    if extent_m <= 0:
        raise ScenarioError("bin extent must be positive")
    nx = max(1, int(round(bounds.width / extent_m)))
    ny = max(1, int(round(bounds.height / extent_m)))
    bins = []
    for j in range(ny):
        for i in range(nx):
            bins.append(Bin(
                id=j * nx + i,
                center=Point2D(bounds.min_x + (i + 0.5) * extent_m,
                               bounds.min_y + (j + 0.5) * extent_m),
                extent_m=extent_m))
    return tuple(bins)


# -- scenario file I/O ----------------------------------------------------

def load_scenario(path) -> SiteMap:
    """Load a scenario JSON file and validate all invariants."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ScenarioError(f"cannot parse scenario file {path}: {err}") from err
    return sitemap_from_dict(doc)


def sitemap_from_dict(doc: dict) -> SiteMap:
    try:
        b = doc["bounds"]
        bounds = Bounds(b["min_x"], b["min_y"], b["max_x"], b["max_y"])
        polys = []
        for i, p in enumerate(doc.get("polygons", [])):
            try:
                polys.append(SurfacePolygon(
                    kind=p["kind"],
                    vertices=tuple(Point2D(x, y) for x, y in p["vertices"])))
            except ScenarioError as err:
                raise ScenarioError(f"polygon {i}: {err}") from err
        bs_doc = doc["bs"]
        bs = BaseStation(position=Point2D(bs_doc["x"], bs_doc["y"]),
                         sector_azimuths_deg=tuple(bs_doc["azimuths"]),
                         tx_label=bs_doc.get("tx_label", "bs0"))
        extent = float(doc["bin_extent_m"])
    except (KeyError, TypeError) as err:
        raise ScenarioError(f"malformed scenario document: {err}") from err
    return SiteMap(bounds=bounds, polygons=tuple(polys), bs=bs,
                   bins=bin_grid(bounds, extent), bin_extent_m=extent)


def sitemap_to_dict(site: SiteMap) -> dict:
    return {
        "bounds": {"min_x": site.bounds.min_x, "min_y": site.bounds.min_y,
                   "max_x": site.bounds.max_x, "max_y": site.bounds.max_y},
        "polygons": [{"kind": p.kind,
                      "vertices": [[v.x, v.y] for v in p.vertices]}
                     for p in site.polygons],
        "bs": {"x": site.bs.position.x, "y": site.bs.position.y,
               "azimuths": list(site.bs.sector_azimuths_deg),
               "tx_label": site.bs.tx_label},
        "bin_extent_m": site.bin_extent_m,
    }


def save_scenario(site: SiteMap, path) -> None:
    Path(path).write_text(json.dumps(sitemap_to_dict(site), indent=1) + "\n")


# -- synthetic map generation --------------------------------------------

@dataclass(frozen=True)
class MapGenConfig:
    bounds: Bounds = field(default_factory=lambda: Bounds(0.0, 0.0, 500.0, 500.0))
    n_buildings: int = 20
    building_size_m: tuple[float, float] = (20.0, 80.0)
    n_foliage: int = 10
    foliage_radius_m: tuple[float, float] = (10.0, 30.0)
    bin_extent_m: float = 10.0
    bs_clearance_m: float = 5.0
    max_retries: int = 1000


def generate_synthetic_map(seed: int, params: MapGenConfig) -> SiteMap:
    """Procedural city map: BS at the centre, rejection-sampled polygons.

    Deterministic for fixed (seed, params). Raises ScenarioError when a
    polygon cannot be placed without overlap within max_retries attempts.
    """
    rng = np.random.default_rng(seed)
    bounds = params.bounds
    bs_pos = Point2D((bounds.min_x + bounds.max_x) / 2.0,
                     (bounds.min_y + bounds.max_y) / 2.0)
    bs_pt = ShPoint(bs_pos.x, bs_pos.y)
    placed: list[SurfacePolygon] = []
    placed_sh: list[ShPolygon] = []

    def try_place(make_poly, label):
        for _ in range(params.max_retries):
            poly = make_poly()
            if poly is None:
                continue
            sh = poly.shapely()
            if sh.distance(bs_pt) <= params.bs_clearance_m:
                continue
            if any(sh.intersection(other).area > 0 for other in placed_sh):
                continue
            placed.append(poly)
            placed_sh.append(sh)
            return
        raise ScenarioError(
            f"could not place {label} after {params.max_retries} retries")

    def make_building():
        w = rng.uniform(*params.building_size_m)
        h = rng.uniform(*params.building_size_m)
        if bounds.width < w or bounds.height < h:
            return None
        x0 = rng.uniform(bounds.min_x, bounds.max_x - w)
        y0 = rng.uniform(bounds.min_y, bounds.max_y - h)
        return SurfacePolygon(BUILDING, (
            Point2D(x0, y0), Point2D(x0 + w, y0),
            Point2D(x0 + w, y0 + h), Point2D(x0, y0 + h)))

    def make_foliage():
        r = rng.uniform(*params.foliage_radius_m)
        if bounds.width < 2 * r or bounds.height < 2 * r:
            return None
        cx = rng.uniform(bounds.min_x + r, bounds.max_x - r)
        cy = rng.uniform(bounds.min_y + r, bounds.max_y - r)
        n_vert = int(rng.integers(5, 9))
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n_vert))
        radii = rng.uniform(0.5 * r, r, n_vert)
        verts = tuple(Point2D(cx + ri * math.cos(a), cy + ri * math.sin(a))
                      for a, ri in zip(angles, radii))
        try:
            return SurfacePolygon(FOLIAGE, verts)
        except ScenarioError:
            return None

    for _ in range(params.n_buildings):
        try_place(make_building, "building")
    for _ in range(params.n_foliage):
        try_place(make_foliage, "foliage")

    bs = BaseStation(position=bs_pos, sector_azimuths_deg=(0.0, 120.0, 240.0))
    return SiteMap(bounds=bounds, polygons=tuple(placed), bs=bs,
                   bins=bin_grid(bounds, params.bin_extent_m),
                   bin_extent_m=params.bin_extent_m)


# -- spatial queries ------------------------------------------------------

def bearing_deg(origin: Point2D, target: Point2D) -> float:
    """Compass bearing from origin to target: 0 = north, clockwise."""
    dx, dy = target.x - origin.x, target.y - origin.y
    return math.degrees(math.atan2(dx, dy)) % 360.0


def assign_sector(bs: BaseStation, p: Point2D) -> int:
    """Index of the half-open 120-degree wedge containing the bearing to p."""
    if p.x == bs.position.x and p.y == bs.position.y:
        raise ScenarioError("cannot assign a sector to the BS position itself")
    brg = bearing_deg(bs.position, p)
    starts = sorted(a % 360.0 for a in bs.sector_azimuths_deg)
    rel = (brg - starts[0]) % 360.0
    # snap float noise at wedge boundaries onto the starting wedge
    idx = int(rel // 120.0)
    if 120.0 - rel % 120.0 < 1e-9:
        idx += 1
    return idx % 3


def segment_obstructions(site: SiteMap, a: Point2D, b: Point2D,
                         eps: float = 1e-9) -> ObstructionSummary:
    """Count distinct polygons whose interior the segment ab crosses,
    and total chord length inside each kind."""
    for label, p in (("a", a), ("b", b)):
        if not site.bounds.contains(p):
            raise ScenarioError(f"segment endpoint {label} outside bounds")
    line = LineString([(a.x, a.y), (b.x, b.y)])
    counts = {BUILDING: 0, FOLIAGE: 0}
    lengths = {BUILDING: 0.0, FOLIAGE: 0.0}
    for poly in site.polygons:
        chord = line.intersection(poly.shapely()).length
        if chord > eps:
            counts[poly.kind] += 1
            lengths[poly.kind] += chord
    return ObstructionSummary(
        buildings_crossed=counts[BUILDING],
        foliage_crossed=counts[FOLIAGE],
        building_inside_m=lengths[BUILDING],
        foliage_inside_m=lengths[FOLIAGE])
