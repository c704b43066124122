"""Cross-validated comparison of the empirical, baseline-MLP and two-tier
models, with Table-style summaries and boxplot statistics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import SiteMap, assign_sector
from .likelihood import TrainConfig, predict_bins, train_baseline_mlp, \
    train_likelihood
from .preprocess import make_splits
from .propagation import BinDataset, fit_empirical_baseline, predict_empirical

MODELS = ("Empirical", "BaselineMLP", "TwoTier")


@dataclass(frozen=True)
class FoldResult:
    fold: int
    model: str
    sector: int
    month: int
    mae_dbm: float
    n_validation: int
    seed: int

    def __post_init__(self):
        if self.mae_dbm < 0:
            raise ValueError("MAE cannot be negative")


@dataclass
class EvalReport:
    fold_results: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)       # (model, sector, month) -> mean MAE
    boxplots: dict = field(default_factory=dict)      # (model, sector, month) -> stats dict
    config: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    split_plans: dict = field(default_factory=dict)   # seed -> fold -> {train, val} record indices
    warnings: list = field(default_factory=list)


def mae(truth, pred) -> float:
    """Mean absolute error between matched value lists."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape or truth.size == 0:
        raise ValueError("mae needs two equal-length nonempty vectors")
    return float(np.mean(np.abs(truth - pred)))


def five_number_summary(values) -> dict:
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    return {"min": float(v[0]), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v[-1]),
            "outliers": [float(x) for x in v if x < lo or x > hi]}


def run_comparison(dataset: BinDataset, site: SiteMap, z_table,
                   master_seeds, folds: int = 5, train_fraction: float = 0.8,
                   split_mode: str = "repeated_holdout",
                   train_cfg: TrainConfig | None = None) -> EvalReport:
    """Per fold: empirical fit, fresh baseline MLP and fresh two-tier model
    (shared pre-extracted VAE latents) trained on the training records and
    scored against held-out records, per sector and month.

    Splits are over records (samples), mirroring drive-test practice where
    every tile keeps contributing fresh measurements. Ground truth per
    (bin, month) is the mean of that bin's held-out samples.
    """
    train_cfg = train_cfg or TrainConfig()
    records = list(dataset.records)
    months = sorted({r.month for r in records})
    sector_of = {b.id: assign_sector(site.bs, b.center) for b in site.bins}
    bins_by_id = {b.id: b for b in site.bins}

    report = EvalReport(seeds=list(master_seeds))
    report.config = {"folds": folds, "train_fraction": train_fraction,
                     "split_mode": split_mode,
                     "train_cfg": asdict(train_cfg)}

    for seed in master_seeds:
        plan = make_splits(len(records), mode=split_mode, folds=folds,
                           train_fraction=train_fraction, k=folds, seed=seed)
        plan_doc = {}
        for fold_i, (tr_idx, val_idx) in enumerate(plan.folds):
            plan_doc[fold_i] = {"train": list(tr_idx), "val": list(val_idx)}
            train_records = [records[i] for i in tr_idx]
            val_records = [records[i] for i in val_idx]
            truth_cells: dict[tuple[int, int], list[float]] = {}
            for r in val_records:
                truth_cells.setdefault((r.bin_id, r.month), []).append(r.rsrp_dbm)
            val_bins = sorted({r.bin_id for r in val_records})

            try:
                emp = fit_empirical_baseline(BinDataset(tuple(train_records)),
                                             site.bs.position)
            except ValueError as err:
                report.warnings.append(
                    f"seed {seed} fold {fold_i} skipped: {err}")
                continue
            fold_seed = int(np.random.SeedSequence(
                entropy=(seed, fold_i)).generate_state(1)[0])
            mlp, _ = train_baseline_mlp(train_records, train_cfg, fold_seed)
            twotier, _ = train_likelihood(train_records, z_table, train_cfg,
                                          fold_seed + 1)

            val_bin_objs = [bins_by_id[b] for b in val_bins]
            for month in months:
                preds = {
                    "Empirical": {b.id: predict_empirical(
                        emp, site.bs.position.distance(b.center))
                        for b in val_bin_objs},
                    "BaselineMLP": {bid: p.mean_dbm for bid, p in predict_bins(
                        mlp, site, val_bin_objs, month).items()},
                    "TwoTier": {bid: p.mean_dbm for bid, p in predict_bins(
                        twotier, site, val_bin_objs, month, z_table).items()},
                }
                sectors = sorted({sector_of[b] for b in val_bins})
                for sector in sectors:
                    cell_bins = [b for b in val_bins
                                 if sector_of[b] == sector
                                 and (b, month) in truth_cells]
                    if not cell_bins:
                        continue
                    truth = [float(np.mean(truth_cells[(b, month)]))
                             for b in cell_bins]
                    for model in MODELS:
                        pred = [preds[model][b] for b in cell_bins]
                        report.fold_results.append(FoldResult(
                            fold=fold_i, model=model, sector=sector,
                            month=month, mae_dbm=mae(truth, pred),
                            n_validation=len(cell_bins), seed=seed))
        report.split_plans[seed] = plan_doc

    cells: dict[tuple, list[float]] = {}
    for fr in report.fold_results:
        cells.setdefault((fr.model, fr.sector, fr.month), []).append(fr.mae_dbm)
    for key, values in cells.items():
        report.summary[key] = float(np.mean(values))
        report.boxplots[key] = five_number_summary(values)
    return report


def mean_mae_by_model(report: EvalReport, seed=None) -> dict[str, float]:
    """Mean MAE over all fold results per model, optionally for one seed."""
    acc: dict[str, list[float]] = {m: [] for m in MODELS}
    for fr in report.fold_results:
        if seed is None or fr.seed == seed:
            acc[fr.model].append(fr.mae_dbm)
    return {m: float(np.mean(v)) for m, v in acc.items() if v}


def emit_report(report: EvalReport, out_dir) -> None:
    """Writes summary.md, folds.csv, boxplot.csv, config.json, splits.json.
    Re-emission of the same report is byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["| Month | Sector | Empirical | MLP | Proposed Model |",
             "|---|---|---|---|---|"]
    keys = sorted({(m, s) for (_, s, m) in report.summary})
    for month, sector in keys:
        row = [str(month), chr(ord("A") + sector)]
        for model in MODELS:
            v = report.summary.get((model, sector, month))
            row.append("-" if v is None else f"{v:.3f}")
        lines.append("| " + " | ".join(row) + " |")
    if report.warnings:
        lines.append("")
        for w in report.warnings:
            lines.append(f"- warning: {w}")
    (out_dir / "summary.md").write_text("\n".join(lines) + "\n")

    fold_lines = ["fold,model,sector,month,mae,n,seed"]
    for fr in report.fold_results:
        fold_lines.append(f"{fr.fold},{fr.model},{fr.sector},{fr.month},"
                          f"{fr.mae_dbm!r},{fr.n_validation},{fr.seed}")
    (out_dir / "folds.csv").write_text("\n".join(fold_lines) + "\n")

    box_lines = ["model,sector,month,min,q1,median,q3,max,outliers"]
    for (model, sector, month) in sorted(report.boxplots,
                                         key=lambda k: (k[2], k[1], MODELS.index(k[0]))):
        s = report.boxplots[(model, sector, month)]
        outliers = ";".join(repr(v) for v in s["outliers"])
        box_lines.append(f"{model},{sector},{month},{s['min']!r},{s['q1']!r},"
                         f"{s['median']!r},{s['q3']!r},{s['max']!r},{outliers}")
    (out_dir / "boxplot.csv").write_text("\n".join(box_lines) + "\n")

    (out_dir / "config.json").write_text(
        json.dumps({"config": report.config, "seeds": report.seeds},
                   sort_keys=True, indent=1) + "\n")
    (out_dir / "splits.json").write_text(
        json.dumps({str(seed): plan for seed, plan in report.split_plans.items()},
                   sort_keys=True) + "\n")
