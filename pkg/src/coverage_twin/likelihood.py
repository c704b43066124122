"""Heteroscedastic RSRP predictor and the plain-MLP baseline.

Architecture: dense(in->100, ReLU) -> dense(100->50, ReLU) -> two heads,
each dense(50->50, ReLU) -> dense(50->1), emitting the predictive mean
and log-variance. Trained with the Gaussian negative log-likelihood;
the variance is exp(logvar) and therefore always positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import Tensor
from .geometry import SiteMap, assign_sector
from .preprocess import NormalizationStats, assemble_features, normalize_apply, \
    normalize_fit
from .propagation import MeasurementRecord

LOGVAR_LIMIT = 10.0


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 3000
    patience: int = 8
    max_epochs: int = 60
    val_fraction: float = 0.1
    learning_rate: float = 1e-3


@dataclass(frozen=True)
class PredictiveDistribution:
    mean_dbm: float
    variance_db2: float

    def __post_init__(self):
        if self.variance_db2 <= 0:
            raise ValueError("predictive variance must be positive")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_nll: list = field(default_factory=list)
    best_epoch: int = -1


class EarlyStopper:
    """Stops after `patience` non-improving epochs, keeps the best snapshot."""

    def __init__(self, patience: int = 8):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = -1
        self.best_snapshot = None

    def update(self, epoch: int, value: float, snapshot) -> bool:
        """Record one epoch; returns True when training should stop."""
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.best_snapshot = snapshot
        return epoch - self.best_epoch >= self.patience


class LikelihoodModel:
    def __init__(self, input_dim: int, params: dict[str, Tensor],
                 stats: NormalizationStats,
                 y_mean: float = 0.0, y_std: float = 1.0):
        if y_std <= 0:
            raise ValueError("label scale must be positive")
        self.input_dim = input_dim
        self.params = params
        self.stats = stats
        self.y_mean = y_mean
        self.y_std = y_std

    @classmethod
    def init(cls, input_dim: int, stats: NormalizationStats, seed: int) -> "LikelihoodModel":
        if input_dim not in (4, 6):
            raise ValueError(f"input_dim must be 4 or 6, got {input_dim}")
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 10)))
        p: dict[str, Tensor] = {}

        def fc(name, m, n):
            std = np.sqrt(2.0 / n)
            p[f"{name}_w"] = Tensor(rng.standard_normal((m, n)) * std,
                                    requires_grad=True)
            p[f"{name}_b"] = Tensor(np.zeros(m), requires_grad=True)

        fc("l1", 100, input_dim)
        fc("l2", 50, 100)
        fc("mean_h", 50, 50)
        fc("mean_out", 1, 50)
        fc("var_h", 50, 50)
        fc("var_out", 1, 50)
        return cls(input_dim, p, stats)

    def _heads(self, x: Tensor) -> tuple[Tensor, Tensor]:
        p = self.params
        h = nn.relu(nn.dense(x, p["l1_w"], p["l1_b"]))
        h = nn.relu(nn.dense(h, p["l2_w"], p["l2_b"]))
        mh = nn.relu(nn.dense(h, p["mean_h_w"], p["mean_h_b"]))
        mean = nn.dense(mh, p["mean_out_w"], p["mean_out_b"])
        vh = nn.relu(nn.dense(h, p["var_h_w"], p["var_h_b"]))
        logvar = nn.clip(nn.dense(vh, p["var_out_w"], p["var_out_b"]),
                         -LOGVAR_LIMIT, LOGVAR_LIMIT)
        n = mean.data.shape[0]
        return mean.reshape((n,)), logvar.reshape((n,))

    def forward_batch(self, x_norm: np.ndarray) -> tuple[Tensor, Tensor]:
        """Mean and logvar tensors for a batch of normalized features."""
        x_norm = np.atleast_2d(np.asarray(x_norm, dtype=np.float64))
        if x_norm.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, "
                             f"got {x_norm.shape[1]}")
        return self._heads(Tensor(x_norm))

    def forward(self, feature_vector) -> PredictiveDistribution:
        """Prediction for one raw (unnormalized) feature vector.

        The network operates in standardized label space; the output is
        mapped back to dBm via the stored label mean and scale.
        """
        x = normalize_apply(self.stats, np.atleast_2d(feature_vector))
        mean, logvar = self.forward_batch(x)
        return PredictiveDistribution(
            mean_dbm=self.y_mean + self.y_std * float(mean.data[0]),
            variance_db2=self.y_std ** 2 * float(np.exp(logvar.data[0])))


def _loss_on(model: LikelihoodModel, x_norm, y) -> Tensor:
    mean, logvar = model.forward_batch(x_norm)
    return nn.gaussian_nll(mean, nn.exp(logvar), y) * (1.0 / len(y))


def _eval_nll(model: LikelihoodModel, x_norm, y) -> float:
    return float(_loss_on(model, x_norm, y).data)


def train_likelihood(train_records, z_table, cfg: TrainConfig,
                     seed: int) -> tuple[LikelihoodModel, TrainHistory]:
    """Train on per-sample RSRP labels; early stopping watches the NLL of
    an inner seeded 90/10 record split and restores the best weights;
    the inner split mirrors the record-level outer evaluation protocol."""
    train_records = list(train_records)
    if not train_records:
        raise ValueError("no training records")
    use_z = z_table is not None
    feats = []
    for r in train_records:
        if use_z:
            if r.bin_id not in z_table:
                raise KeyError(f"no latent features for bin {r.bin_id}")
            feats.append(assemble_features(r, z_table[r.bin_id]))
        else:
            feats.append(assemble_features(r))
    feats = np.stack(feats)
    labels = np.array([r.rsrp_dbm for r in train_records])

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 20)))
    perm = rng.permutation(len(feats))
    n_val = max(1, int(round(len(feats) * cfg.val_fraction)))
    if n_val >= len(feats):
        raise ValueError("validation fraction leaves no training data")
    val_idx, tr_idx = perm[:n_val], perm[n_val:]

    stats = normalize_fit(feats[tr_idx])
    x_tr = normalize_apply(stats, feats[tr_idx])
    x_val = normalize_apply(stats, feats[val_idx])
    # standardized labels keep the randomly initialized heads well inside
    # the useful range of the NLL surface
    y_mean = float(labels[tr_idx].mean())
    y_std = float(labels[tr_idx].std())
    if y_std < 1e-9:
        y_std = 1.0
    y_tr = (labels[tr_idx] - y_mean) / y_std
    y_val = (labels[val_idx] - y_mean) / y_std

    model = LikelihoodModel.init(6 if use_z else 4, stats, seed)
    model.y_mean, model.y_std = y_mean, y_std
    opt = nn.Adam(model.params, alpha=cfg.learning_rate)
    batch = min(cfg.batch_size, len(x_tr))
    stopper = EarlyStopper(patience=cfg.patience)
    history = TrainHistory()
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(x_tr))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), batch):
            idx = order[start:start + batch]
            opt.zero_grad()
            loss = _loss_on(model, x_tr[idx], y_tr[idx])
            loss.backward()
            opt.step()
            epoch_loss += float(loss.data)
            n_batches += 1
        history.train_loss.append(epoch_loss / n_batches)
        val_nll = _eval_nll(model, x_val, y_val)
        history.val_nll.append(val_nll)
        snapshot = {k: v.data.copy() for k, v in model.params.items()}
        if stopper.update(epoch, val_nll, snapshot):
            break
    for k, v in stopper.best_snapshot.items():
        model.params[k].data = v
    history.best_epoch = stopper.best_epoch
    return model, history


def train_baseline_mlp(train_records, cfg: TrainConfig,
                       seed: int) -> tuple[LikelihoodModel, TrainHistory]:
    """Same architecture and protocol without the environmental features."""
    return train_likelihood(train_records, None, cfg, seed)


def predict_bins(model: LikelihoodModel, site: SiteMap, bins, month: int,
                 z_table=None) -> dict[int, PredictiveDistribution]:
    """Per-bin predictive distributions for the given month."""
    out = {}
    for b in bins:
        sector = assign_sector(site.bs, b.center)
        record = MeasurementRecord(bin_id=b.id, x_loc=b.center.x,
                                   y_loc=b.center.y, sector=sector,
                                   month=month, rsrp_dbm=0.0)
        if model.input_dim == 6:
            if z_table is None or b.id not in z_table:
                raise KeyError(f"no latent features for bin {b.id}")
            vec = assemble_features(record, z_table[b.id])
        else:
            vec = assemble_features(record)
        out[b.id] = model.forward(vec)
    return out


def save_likelihood(model: LikelihoodModel, path) -> None:
    nn.save_params(model.params, path,
                   meta={"input_dim": model.input_dim,
                         "stats": model.stats.to_dict(),
                         "y_mean": model.y_mean, "y_std": model.y_std})


def load_likelihood(path) -> LikelihoodModel:
    params, meta = nn.load_params(path)
    return LikelihoodModel(meta["input_dim"], params,
                           NormalizationStats.from_dict(meta["stats"]),
                           y_mean=meta["y_mean"], y_std=meta["y_std"])
