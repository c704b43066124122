"""Cross-validated model comparison and report emission."""

import numpy as np
import pytest

from coverage_twin.evaluate import (
    MODELS, FoldResult, emit_report, five_number_summary, mae,
    mean_mae_by_model, run_comparison,
)
from coverage_twin.geometry import (
    BaseStation, Bounds, Point2D, SiteMap, bin_grid,
)
from coverage_twin.likelihood import TrainConfig
from coverage_twin.propagation import PropagationParams, sample_measurements

FAST = TrainConfig(batch_size=256, patience=2, max_epochs=3)


def small_setup(sigma=1.0, seed=0):
    bounds = Bounds(0, 0, 60, 60)
    site = SiteMap(bounds=bounds, polygons=(),
                   bs=BaseStation(Point2D(31, 29), (0, 120, 240)),
                   bins=bin_grid(bounds, 10), bin_extent_m=10)
    params = PropagationParams(shadow_sigma_db=0.0, sample_sigma_db=sigma)
    ds = sample_measurements(site, params, [1, 8], 4, seed=seed)
    z_table = {b.id: (b.center.x / 60.0, b.center.y / 60.0) for b in site.bins}
    return site, ds, z_table


class TestMae:
    def test_hand_value(self):
        assert mae([0.0, 2.0], [1.0, -1.0]) == pytest.approx(2.0)

    def test_zero_for_identical(self):
        assert mae([3.0, -5.0], [3.0, -5.0]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mae([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            mae([], [])


class TestFiveNumberSummary:
    def test_hand_quartiles(self):
        s = five_number_summary([1.0, 2.0, 3.0, 4.0, 5.0])
        assert s["median"] == 3.0
        assert s["q1"] == 2.0 and s["q3"] == 4.0
        assert s["min"] == 1.0 and s["max"] == 5.0
        assert s["outliers"] == []

    def test_tukey_outlier(self):
        s = five_number_summary([1.0, 2.0, 3.0, 4.0, 100.0])
        assert s["outliers"] == [100.0]
        assert s["max"] == 100.0

    def test_order_invariant(self, rng):
        v = rng.normal(0, 1, 40)
        assert five_number_summary(v) == five_number_summary(v[::-1])


class TestFoldResult:
    def test_negative_mae_rejected(self):
        with pytest.raises(ValueError):
            FoldResult(fold=0, model="Empirical", sector=0, month=1,
                       mae_dbm=-1.0, n_validation=3, seed=0)


class TestRunComparison:
    def test_cardinality_and_split_discipline(self):
        site, ds, z_table = small_setup()
        report = run_comparison(ds, site, z_table, master_seeds=[0], folds=2,
                                train_cfg=FAST)
        assert report.seeds == [0]
        # every fold result belongs to a known model / sector / month
        for fr in report.fold_results:
            assert fr.model in MODELS
            assert fr.month in (1, 8)
            assert 0 <= fr.sector <= 2
        # held-out records never appear in the fold's training records,
        # and together they cover all 36 bins x 2 months x 4 samples
        for plan in report.split_plans.values():
            for fold in plan.values():
                assert not set(fold["train"]) & set(fold["val"])
                assert len(fold["train"]) + len(fold["val"]) == 288

    def test_three_models_per_cell(self):
        site, ds, z_table = small_setup()
        report = run_comparison(ds, site, z_table, master_seeds=[0], folds=2,
                                train_cfg=FAST)
        seen = {}
        for fr in report.fold_results:
            seen.setdefault((fr.fold, fr.sector, fr.month), set()).add(fr.model)
        for models in seen.values():
            assert models == set(MODELS)

    def test_summary_is_mean_of_folds(self):
        site, ds, z_table = small_setup()
        report = run_comparison(ds, site, z_table, master_seeds=[0, 1],
                                folds=2, train_cfg=FAST)
        for key, value in report.summary.items():
            values = [fr.mae_dbm for fr in report.fold_results
                      if (fr.model, fr.sector, fr.month) == key]
            assert value == pytest.approx(np.mean(values))
            assert report.boxplots[key]["median"] == pytest.approx(
                np.median(values))

    def test_noiseless_truth_bounds_empirical(self):
        """With zero noise and an open map the data follow the LDPL exactly,
        so the empirical fit should be near-perfect on held-out bins."""
        site, ds, z_table = small_setup(sigma=0.0)
        report = run_comparison(ds, site, z_table, master_seeds=[3], folds=2,
                                train_cfg=FAST)
        emp = mean_mae_by_model(report)["Empirical"]
        assert emp < 0.05

    def test_mean_mae_by_model_filters_seed(self):
        site, ds, z_table = small_setup()
        report = run_comparison(ds, site, z_table, master_seeds=[0, 1],
                                folds=2, train_cfg=FAST)
        overall = mean_mae_by_model(report)
        per_seed = [mean_mae_by_model(report, seed=s) for s in (0, 1)]
        assert set(overall) == set(MODELS)
        for m in MODELS:
            lo = min(p[m] for p in per_seed)
            hi = max(p[m] for p in per_seed)
            assert lo - 1e-12 <= overall[m] <= hi + 1e-12

    def test_deterministic(self):
        site, ds, z_table = small_setup()
        a = run_comparison(ds, site, z_table, master_seeds=[5], folds=2,
                           train_cfg=FAST)
        b = run_comparison(ds, site, z_table, master_seeds=[5], folds=2,
                           train_cfg=FAST)
        assert a.fold_results == b.fold_results
        assert a.summary == b.summary


class TestEmitReport:
    def make_report(self):
        site, ds, z_table = small_setup()
        return run_comparison(ds, site, z_table, master_seeds=[0], folds=2,
                              train_cfg=FAST)

    def test_files_written(self, tmp_path):
        emit_report(self.make_report(), tmp_path)
        for name in ("summary.md", "folds.csv", "boxplot.csv", "config.json",
                     "splits.json"):
            assert (tmp_path / name).exists()

    def test_folds_csv_header_and_rows(self, tmp_path):
        report = self.make_report()
        emit_report(report, tmp_path)
        lines = (tmp_path / "folds.csv").read_text().splitlines()
        assert lines[0] == "fold,model,sector,month,mae,n,seed"
        assert len(lines) == 1 + len(report.fold_results)
        first = lines[1].split(",")
        assert first[1] in MODELS
        assert float(first[4]) >= 0.0

    def test_reemission_byte_identical(self, tmp_path):
        report = self.make_report()
        emit_report(report, tmp_path / "a")
        emit_report(report, tmp_path / "b")
        for name in ("summary.md", "folds.csv", "boxplot.csv", "config.json",
                     "splits.json"):
            assert (tmp_path / "a" / name).read_bytes() \
                == (tmp_path / "b" / name).read_bytes()

    def test_summary_table_shape(self, tmp_path):
        emit_report(self.make_report(), tmp_path)
        lines = (tmp_path / "summary.md").read_text().splitlines()
        assert lines[0].startswith("| Month | Sector |")
        body = [l for l in lines[2:] if l.startswith("|")]
        assert body     # one row per (month, sector) cell
        for row in body:
            cells = [c.strip() for c in row.strip("|").split("|")]
            assert len(cells) == 5
