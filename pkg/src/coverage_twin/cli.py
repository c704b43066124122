"""Command-line frontend: coverage-twin <subcommand> --config cfg.json.

Subcommands chain through artifacts under the output root:
  gen-scenario      scenario.json
  gen-data          dataset.csv
  render            images/*.png + images/index.csv
  train-vae         vae.json / vae.bin + vae_history.csv
  extract-latents   latents.csv
  train-likelihood  likelihood.json / likelihood.bin
  evaluate          report/{summary.md, folds.csv, boxplot.csv, ...}

Exit codes: 0 success, 2 config error, 3 missing upstream artifact,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import geometry, propagation, raster, vae as vae_mod
from .evaluate import emit_report, run_comparison
from .geometry import Bounds, MapGenConfig, ScenarioError
from .likelihood import TrainConfig, save_likelihood, train_likelihood
from .preprocess import filter_outliers
from .propagation import PropagationParams
from .raster import RasterConfig
from .vae import VAEConfig

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_INVARIANT = 4


class ConfigError(Exception):
    pass


class MissingArtifact(Exception):
    pass


def _load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err


def _section(cfg: dict, name: str) -> dict:
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return value


def _build(cls, doc: dict, name: str, **extra):
    try:
        return cls(**{**doc, **extra})
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid {name} config: {err}") from err


def _out_root(cfg: dict, args) -> Path:
    out = os.environ.get("COVERAGE_TWIN_OUT") or args.out or cfg.get("out")
    if not out:
        raise ConfigError("no output root: set 'out' in the config, --out, "
                          "or COVERAGE_TWIN_OUT")
    return Path(out)


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing {what}: {path} (run the upstream "
                              "subcommand first)")
    return path


def _scenario_cfg(cfg: dict, seed_override):
    doc = dict(_section(cfg, "scenario"))
    source = doc.pop("source", "generate")
    seed = doc.pop("seed", 0)
    if seed_override is not None:
        seed = seed_override
    path = doc.pop("path", None)
    if source == "file":
        if not path:
            raise ConfigError("scenario.source='file' requires scenario.path")
        return source, path, seed, None
    if "bounds" in doc:
        doc["bounds"] = _build(Bounds, dict(zip(
            ("min_x", "min_y", "max_x", "max_y"), doc["bounds"])), "bounds")
    for key in ("building_size_m", "foliage_radius_m"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return source, path, seed, _build(MapGenConfig, doc, "scenario")


def _prop_params(cfg: dict):
    doc = dict(_section(cfg, "propagation"))
    months = doc.pop("months", [1])
    samples = doc.pop("samples_per_bin", 10)
    seed = doc.pop("seed", 0)
    if "month_offsets_db" in doc:
        doc["month_offsets_db"] = tuple(doc["month_offsets_db"])
    return _build(PropagationParams, doc, "propagation"), months, samples, seed


def _write_effective_config(cfg: dict, root: Path, command: str, seed) -> None:
    root.mkdir(parents=True, exist_ok=True)
    effective = dict(cfg)
    effective["_invocation"] = {"command": command, "seed_override": seed,
                                "out": str(root)}
    (root / "config.effective.json").write_text(
        json.dumps(effective, sort_keys=True, indent=1) + "\n")


# -- subcommands ----------------------------------------------------------

def cmd_gen_scenario(cfg, args, root: Path):
    source, path, seed, gen_cfg = _scenario_cfg(cfg, args.seed)
    if args.dry_run:
        print(f"would write {root / 'scenario.json'} (source={source})")
        return
    if source == "file":
        site = geometry.load_scenario(_require(Path(path), "scenario input"))
    else:
        site = geometry.generate_synthetic_map(seed, gen_cfg)
    _write_effective_config(cfg, root, "gen-scenario", args.seed)
    geometry.save_scenario(site, root / "scenario.json")
    print(f"scenario: {len(site.polygons)} polygons, {len(site.bins)} bins "
          f"-> {root / 'scenario.json'}")


def cmd_gen_data(cfg, args, root: Path):
    params, months, samples, seed = _prop_params(cfg)
    if args.seed is not None:
        seed = args.seed
    if args.dry_run:
        print(f"would write {root / 'dataset.csv'} "
              f"(months={months}, samples_per_bin={samples})")
        return
    site = geometry.load_scenario(_require(root / "scenario.json", "scenario"))
    ds = propagation.sample_measurements(site, params, months, samples, seed)
    _write_effective_config(cfg, root, "gen-data", args.seed)
    propagation.save_dataset(ds, root / "dataset.csv")
    print(f"dataset: {len(ds.records)} records -> {root / 'dataset.csv'}")


def cmd_render(cfg, args, root: Path):
    rcfg = _build(RasterConfig, _section(cfg, "raster"), "raster")
    if args.dry_run:
        print(f"would render images into {root / 'images'} "
              f"at resolution {rcfg.resolution}")
        return
    site = geometry.load_scenario(_require(root / "scenario.json", "scenario"))
    _write_effective_config(cfg, root, "render", args.seed)
    index = raster.render_dataset(site, site.bins, rcfg, root / "images")
    print(f"rendered {len(index)} images -> {root / 'images'}")


def _vae_cfg(cfg) -> tuple[VAEConfig, int, int | None]:
    doc = dict(_section(cfg, "vae"))
    seed = doc.pop("seed", 0)
    train_images = doc.pop("train_images", None)
    doc.setdefault("resolution",
                   _section(cfg, "raster").get("resolution", 64))
    return _build(VAEConfig, doc, "vae"), seed, train_images


def cmd_train_vae(cfg, args, root: Path):
    import numpy as np
    vcfg, seed, train_images = _vae_cfg(cfg)
    if args.seed is not None:
        seed = args.seed
    if args.dry_run:
        print(f"would train the VAE ({vcfg.epochs} epochs, "
              f"batch {vcfg.batch_size}) -> {root / 'vae.json'}")
        return
    index_path = _require(root / "images" / "index.csv", "image index")
    index = _read_index(index_path)
    bin_ids = sorted(index)
    if train_images is not None:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 99)))
        order = rng.permutation(len(bin_ids))[:train_images]
        bin_ids = [bin_ids[i] for i in sorted(order)]
    images = np.stack([
        raster.image_to_tensor(raster.load_image(index[b])) for b in bin_ids])
    _write_effective_config(cfg, root, "train-vae", args.seed)
    model, history = vae_mod.train_vae(images, vcfg, seed)
    vae_mod.save_vae(model, root / "vae")
    (root / "vae_history.csv").write_text(
        "epoch,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(history)))
    print(f"VAE trained on {len(images)} images; "
          f"loss {history[0]:.1f} -> {history[-1]:.1f}")


def _read_index(index_path: Path) -> dict[int, str]:
    import csv as _csv
    index = {}
    with index_path.open(newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        next(reader)
        for row in reader:
            index[int(row[0])] = str(index_path.parent / row[1])
    return index


def cmd_extract_latents(cfg, args, root: Path):
    if args.dry_run:
        print(f"would write {root / 'latents.csv'}")
        return
    _require(root / "vae.json", "trained VAE checkpoint")
    model = vae_mod.load_vae(root / "vae")
    index = _read_index(_require(root / "images" / "index.csv", "image index"))
    _write_effective_config(cfg, root, "extract-latents", args.seed)
    table = vae_mod.extract_features(model, index)
    vae_mod.save_latents(table, root / "latents.csv")
    print(f"latents: {len(table)} bins -> {root / 'latents.csv'}")


def _train_cfg(cfg) -> tuple[TrainConfig, int]:
    doc = dict(_section(cfg, "likelihood"))
    seed = doc.pop("seed", 0)
    return _build(TrainConfig, doc, "likelihood"), seed


def cmd_train_likelihood(cfg, args, root: Path):
    tcfg, seed = _train_cfg(cfg)
    if args.seed is not None:
        seed = args.seed
    if args.dry_run:
        print(f"would train the likelihood model -> {root / 'likelihood.json'}")
        return
    ds = propagation.load_dataset(_require(root / "dataset.csv", "dataset"))
    table = vae_mod.load_latents(_require(root / "latents.csv", "latent table"))
    _write_effective_config(cfg, root, "train-likelihood", args.seed)
    ds = filter_outliers(ds)
    model, history = train_likelihood(ds.records, table, tcfg, seed)
    save_likelihood(model, root / "likelihood")
    print(f"likelihood model trained; best epoch {history.best_epoch}, "
          f"val NLL {min(history.val_nll):.3f}")


def cmd_evaluate(cfg, args, root: Path):
    tcfg, _ = _train_cfg(cfg)
    split = dict(_section(cfg, "split"))
    eval_cfg = dict(_section(cfg, "eval"))
    master_seeds = eval_cfg.get("master_seeds", [0])
    if args.dry_run:
        print(f"would evaluate {len(master_seeds)} master seeds "
              f"-> {root / 'report'}")
        return
    site = geometry.load_scenario(_require(root / "scenario.json", "scenario"))
    ds = propagation.load_dataset(_require(root / "dataset.csv", "dataset"))
    table = vae_mod.load_latents(_require(root / "latents.csv", "latent table"))
    _write_effective_config(cfg, root, "evaluate", args.seed)
    ds = filter_outliers(ds)
    report = run_comparison(
        ds, site, table, master_seeds,
        folds=split.get("folds", 5),
        train_fraction=split.get("train_fraction", 0.8),
        split_mode=split.get("mode", "repeated_holdout"),
        train_cfg=tcfg)
    emit_report(report, root / "report")
    print(f"report: {len(report.fold_results)} fold results "
          f"-> {root / 'report'}")


COMMANDS = {
    "gen-scenario": cmd_gen_scenario,
    "gen-data": cmd_gen_data,
    "render": cmd_render,
    "train-vae": cmd_train_vae,
    "extract-latents": cmd_extract_latents,
    "train-likelihood": cmd_train_likelihood,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coverage-twin")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--dry-run", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        root = _out_root(cfg, args)
        COMMANDS[args.command](cfg, args, root)
    except (ConfigError, ScenarioError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, KeyError, AssertionError) as err:
        print(f"internal invariant violated: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
