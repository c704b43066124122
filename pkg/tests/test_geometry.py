"""Scenario geometry: loading, generation, sectors, obstructions."""

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverage_twin.geometry import (
    BaseStation, Bin, Bounds, MapGenConfig, Point2D, ScenarioError,
    SurfacePolygon, SiteMap, assign_sector, bin_grid, generate_synthetic_map,
    load_scenario, save_scenario, segment_obstructions, sitemap_from_dict,
)


def minimal_doc(**overrides):
    doc = {
        "bounds": {"min_x": 0, "min_y": 0, "max_x": 10, "max_y": 10},
        "polygons": [],
        "bs": {"x": 5, "y": 5, "azimuths": [0, 120, 240]},
        "bin_extent_m": 10,
    }
    doc.update(overrides)
    return doc


def square(x0, y0, x1, y1, kind="building"):
    return {"kind": kind, "vertices": [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]}


class TestLoadScenario:
    def test_minimal_empty_map(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(minimal_doc()))
        site = load_scenario(path)
        assert site.polygons == ()
        assert len(site.bins) == 1

    def test_square_building_area(self):
        site = sitemap_from_dict(minimal_doc(polygons=[square(0, 0, 10, 10)]))
        assert len(site.polygons) == 1
        # shoelace oracle
        assert site.polygons[0].area() == pytest.approx(100.0)

    def test_two_vertex_polygon_named_in_error(self):
        doc = minimal_doc(polygons=[{"kind": "building",
                                     "vertices": [[0, 0], [1, 1]]}])
        with pytest.raises(ScenarioError, match="polygon 0"):
            sitemap_from_dict(doc)

    def test_self_intersecting_rejected(self):
        bowtie = {"kind": "building",
                  "vertices": [[0, 0], [4, 4], [4, 0], [0, 4]]}
        with pytest.raises(ScenarioError, match="self-intersecting"):
            sitemap_from_dict(minimal_doc(polygons=[bowtie]))

    def test_bs_outside_bounds_rejected(self):
        with pytest.raises(ScenarioError, match="outside bounds"):
            sitemap_from_dict(minimal_doc(bs={"x": 50, "y": 5,
                                              "azimuths": [0, 120, 240]}))

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ScenarioError, match="cannot parse"):
            load_scenario(path)

    def test_roundtrip(self, tmp_path):
        site = generate_synthetic_map(3, MapGenConfig(
            bounds=Bounds(0, 0, 100, 100), n_buildings=3, n_foliage=2,
            building_size_m=(5, 15), foliage_radius_m=(3, 8)))
        save_scenario(site, tmp_path / "s.json")
        again = load_scenario(tmp_path / "s.json")
        assert again == site


class TestGenerateSyntheticMap:
    def test_empty_counts(self):
        cfg = MapGenConfig(bounds=Bounds(0, 0, 100, 100), n_buildings=0,
                           n_foliage=0, bin_extent_m=10)
        site = generate_synthetic_map(1, cfg)
        assert len(site.bins) == 100
        assert site.polygons == ()

    def test_deterministic(self):
        cfg = MapGenConfig(bounds=Bounds(0, 0, 200, 200), n_buildings=5,
                           n_foliage=3, building_size_m=(10, 30),
                           foliage_radius_m=(5, 15))
        assert generate_synthetic_map(1, cfg) == generate_synthetic_map(1, cfg)

    def test_seeds_differ(self):
        cfg = MapGenConfig(bounds=Bounds(0, 0, 500, 500), n_buildings=20)
        a = generate_synthetic_map(1, cfg)
        b = generate_synthetic_map(2, cfg)
        assert [p.vertices for p in a.polygons] != [p.vertices for p in b.polygons]

    def test_no_pairwise_overlap(self):
        cfg = MapGenConfig(bounds=Bounds(0, 0, 300, 300), n_buildings=10,
                           n_foliage=5, building_size_m=(10, 40))
        site = generate_synthetic_map(7, cfg)
        shapes = [p.shapely() for p in site.polygons]
        for i in range(len(shapes)):
            for j in range(i + 1, len(shapes)):
                assert shapes[i].intersection(shapes[j]).area == 0.0

    def test_infeasible_params(self):
        cfg = MapGenConfig(bounds=Bounds(0, 0, 50, 50), n_buildings=100,
                           building_size_m=(20, 40), max_retries=50)
        with pytest.raises(ScenarioError, match="could not place"):
            generate_synthetic_map(1, cfg)

    def test_positive_areas(self):
        site = generate_synthetic_map(11, MapGenConfig(
            bounds=Bounds(0, 0, 300, 300), n_buildings=8, n_foliage=8))
        assert all(p.area() > 0 for p in site.polygons)


class TestAssignSector:
    BS = BaseStation(position=Point2D(0, 0), sector_azimuths_deg=(0, 120, 240))

    def test_due_north(self):
        assert assign_sector(self.BS, Point2D(0, 10)) == 0

    def test_bearing_130(self):
        rad = math.radians(130)
        p = Point2D(10 * math.sin(rad), 10 * math.cos(rad))
        assert assign_sector(self.BS, p) == 1

    def test_full_sweep_balanced(self):
        counts = [0, 0, 0]
        for deg in range(360):
            rad = math.radians(deg)
            counts[assign_sector(self.BS, Point2D(math.sin(rad),
                                                  math.cos(rad)))] += 1
        assert counts == [120, 120, 120]

    def test_coincident_rejected(self):
        with pytest.raises(ScenarioError):
            assign_sector(self.BS, Point2D(0, 0))

    def test_rotated_boundaries(self):
        bs = BaseStation(position=Point2D(0, 0),
                         sector_azimuths_deg=(30, 150, 270))
        assert assign_sector(bs, Point2D(0, 10)) == 2   # bearing 0 in [270,30)

    def test_unequal_wedges_rejected(self):
        with pytest.raises(ScenarioError):
            BaseStation(position=Point2D(0, 0),
                        sector_azimuths_deg=(0, 100, 240))


class TestSegmentObstructions:
    def make_site(self, polygons=()):
        return SiteMap(bounds=Bounds(-50, -50, 50, 50),
                       polygons=tuple(polygons),
                       bs=BaseStation(Point2D(0, 0), (0, 120, 240)),
                       bins=bin_grid(Bounds(-50, -50, 50, 50), 10),
                       bin_extent_m=10)

    def test_empty_map(self):
        obs = segment_obstructions(self.make_site(), Point2D(-5, 5),
                                   Point2D(15, 5))
        assert (obs.buildings_crossed, obs.foliage_crossed) == (0, 0)
        assert obs.building_inside_m == 0.0

    def test_square_crossing(self):
        sq = SurfacePolygon("building", (Point2D(0, 0), Point2D(10, 0),
                                         Point2D(10, 10), Point2D(0, 10)))
        obs = segment_obstructions(self.make_site([sq]), Point2D(-5, 5),
                                   Point2D(15, 5))
        assert obs.buildings_crossed == 1
        assert obs.building_inside_m == pytest.approx(10.0)

    def test_segment_inside_foliage(self):
        poly = SurfacePolygon("foliage", (Point2D(-20, -20), Point2D(20, -20),
                                          Point2D(20, 20), Point2D(-20, 20)))
        a, b = Point2D(-5, 1), Point2D(5, 2)
        obs = segment_obstructions(self.make_site([poly]), a, b)
        assert obs.foliage_crossed == 1
        assert obs.foliage_inside_m == pytest.approx(a.distance(b))

    def test_endpoint_outside_bounds(self):
        with pytest.raises(ScenarioError):
            segment_obstructions(self.make_site(), Point2D(-500, 0),
                                 Point2D(0, 0))

    @settings(max_examples=50, deadline=None)
    @given(st.tuples(*(st.floats(-49, 49) for _ in range(4))))
    def test_inside_length_bounded_by_segment(self, coords):
        site = generate_synthetic_map(5, MapGenConfig(
            bounds=Bounds(-50, -50, 50, 50), n_buildings=4, n_foliage=3,
            building_size_m=(5, 20), foliage_radius_m=(3, 10)))
        ax, ay, bx, by = coords
        a, b = Point2D(ax, ay), Point2D(bx, by)
        obs = segment_obstructions(site, a, b)
        seg_len = a.distance(b) + 1e-9
        assert obs.building_inside_m <= seg_len
        assert obs.foliage_inside_m <= seg_len


class TestBinGrid:
    def test_tiles_bounds(self):
        bins = bin_grid(Bounds(0, 0, 100, 50), 10)
        assert len(bins) == 50
        assert bins[0].center == Point2D(5, 5)
        assert len({b.id for b in bins}) == 50

    def test_bad_extent(self):
        with pytest.raises(ScenarioError):
            Bin(id=0, center=Point2D(0, 0), extent_m=0)
