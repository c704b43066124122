"""Outlier filtering, feature assembly, normalization and split planning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagation import BinDataset, MeasurementRecord


def hampel_mask(values, k: float = 4.5) -> np.ndarray:
    """Keep-mask: False where |v - median| > k * MAD. Ties are kept."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("hampel_mask needs a nonempty input")
    med = np.median(values)
    dev = np.abs(values - med)
    mad = np.median(dev)
    return ~(dev > k * mad)


def filter_outliers(ds: BinDataset, k: float = 4.5) -> BinDataset:
    """Hampel filter on x_loc, then on y_loc of the survivors."""
    records = list(ds.records)
    if not records:
        raise ValueError("cannot filter an empty dataset")
    keep_x = hampel_mask([r.x_loc for r in records], k)
    records = [r for r, keep in zip(records, keep_x) if keep]
    if records:
        keep_y = hampel_mask([r.y_loc for r in records], k)
        records = [r for r, keep in zip(records, keep_y) if keep]
    return BinDataset(records=tuple(records), scenario_ref=ds.scenario_ref,
                      provenance=ds.provenance)


def assemble_features(record: MeasurementRecord, z=None) -> np.ndarray:
    """(x_loc, y_loc, sector, month[, z1, z2]); 6-dim with latents, 4 without."""
    base = [record.x_loc, record.y_loc, float(record.sector), float(record.month)]
    if z is not None:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (2,):
            raise ValueError(f"latent vector must have shape (2,), got {z.shape}")
        base.extend(z.tolist())
    return np.array(base, dtype=np.float64)


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(mean=np.asarray(doc["mean"], dtype=np.float64),
                   std=np.asarray(doc["std"], dtype=np.float64))


def normalize_fit(train_vectors) -> NormalizationStats:
    """Per-feature mean/std on training data; constant features get std 1."""
    x = np.asarray(train_vectors, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return NormalizationStats(mean=mean, std=std)


def normalize_apply(stats: NormalizationStats, vectors) -> np.ndarray:
    return (np.asarray(vectors, dtype=np.float64) - stats.mean) / stats.std


def normalize_unapply(stats: NormalizationStats, vectors) -> np.ndarray:
    return np.asarray(vectors, dtype=np.float64) * stats.std + stats.mean


@dataclass(frozen=True)
class SplitPlan:
    mode: str                      # "repeated_holdout" | "kfold"
    seed: int
    folds: tuple                   # ((train_idx, val_idx), ...) as tuples


def make_splits(n_records: int, mode: str = "repeated_holdout",
                folds: int = 20, train_fraction: float = 0.8,
                k: int = 20, seed: int = 0) -> SplitPlan:
    """Repeated seeded 80/20 holdouts, or disjoint k-fold validation sets."""
    if n_records < 10:
        raise ValueError("need at least 10 records to split")
    out = []
    if mode == "repeated_holdout":
        n_train = int(round(n_records * train_fraction))
        if not 0 < n_train < n_records:
            raise ValueError("train fraction leaves an empty fold")
        for f in range(folds):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, f)))
            perm = rng.permutation(n_records)
            out.append((tuple(int(i) for i in np.sort(perm[:n_train])),
                        tuple(int(i) for i in np.sort(perm[n_train:]))))
    elif mode == "kfold":
        if k < 2 or n_records // k < 1:
            raise ValueError(f"cannot make {k} folds from {n_records} records")
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed,)))
        perm = rng.permutation(n_records)
        parts = np.array_split(perm, k)
        for f in range(k):
            val = parts[f]
            train = np.concatenate([parts[j] for j in range(k) if j != f])
            out.append((tuple(int(i) for i in np.sort(train)),
                        tuple(int(i) for i in np.sort(val))))
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return SplitPlan(mode=mode, seed=seed, folds=tuple(out))
