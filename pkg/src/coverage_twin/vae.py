"""Convolutional VAE over association images.

Encoder: three parallel conv stems (3x3, 5x5, 7x7) -> concat -> maxpool
-> conv+maxpool -> conv+maxpool -> flatten -> dropout(0.25) -> dense(64)
-> 2-unit mu and logvar heads. Decoder mirrors it with nearest-neighbour
upsampling. The trained encoder's posterior mean is the 2-d environmental
feature extractor.

The posterior mean is batch-normalized with a fixed unit scale. Tying the
aggregate posterior to zero mean / unit variance is a standard remedy for
posterior collapse: the reconstruction path can no longer win by silencing
the code, so the latents keep encoding the image content.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .nn import Tensor
from .raster import image_to_tensor, load_image

LATENT_DIM = 2
LOGVAR_LIMIT = 10.0
BN_EPS = 1e-8
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class VAEConfig:
    resolution: int = 64
    stem_channels: int = 8
    mid_channels: int = 32
    dense_units: int = 64
    dropout_rate: float = 0.25
    epochs: int = 20
    batch_size: int = 50
    learning_rate: float = 3e-3
    kl_warmup_epochs: int = 10

    def __post_init__(self):
        if self.resolution % 8:
            raise ValueError("resolution must be divisible by 8")

    @property
    def feat_side(self) -> int:
        return self.resolution // 8

    @property
    def flat_dim(self) -> int:
        return self.mid_channels * self.feat_side ** 2


class VAEModel:
    def __init__(self, cfg: VAEConfig, params: dict[str, Tensor]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: VAEConfig, seed: int) -> "VAEModel":
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0)))
        p: dict[str, Tensor] = {}

        def conv(name, co, ci, k):
            std = np.sqrt(2.0 / (ci * k * k))
            p[f"{name}_w"] = Tensor(rng.standard_normal((co, ci, k, k)) * std,
                                    requires_grad=True)
            p[f"{name}_b"] = Tensor(np.zeros(co), requires_grad=True)

        def fc(name, m, n, std=None):
            std = np.sqrt(2.0 / n) if std is None else std
            p[f"{name}_w"] = Tensor(rng.standard_normal((m, n)) * std,
                                    requires_grad=True)
            p[f"{name}_b"] = Tensor(np.zeros(m), requires_grad=True)

        sc, mc = cfg.stem_channels, cfg.mid_channels
        conv("stem3", sc, 3, 3)
        conv("stem5", sc, 3, 5)
        conv("stem7", sc, 3, 7)
        conv("enc_c1", mc, 3 * sc, 3)
        conv("enc_c2", mc, mc, 3)
        fc("enc_fc", cfg.dense_units, cfg.flat_dim)
        fc("mu", LATENT_DIM, cfg.dense_units, std=1.0)
        fc("logvar", LATENT_DIM, cfg.dense_units, std=0.01)
        p["logvar_b"].data[:] = -9.0
        # running statistics of the raw posterior-mean activations for the
        # eval-mode normalization (see encode)
        p["mu_bn_mean"] = Tensor(np.zeros(LATENT_DIM))
        p["mu_bn_var"] = Tensor(np.ones(LATENT_DIM))
        fc("dec_fc1", cfg.dense_units, LATENT_DIM)
        fc("dec_fc2", cfg.flat_dim, cfg.dense_units)
        conv("dec_c1", mc, mc, 3)
        conv("dec_c2", 3 * sc, mc, 3)
        conv("dec_c3", 3, 3 * sc, 3)
        return cls(cfg, p)

    # -- forward passes ---------------------------------------------------

    def encode(self, x, train: bool = False,
               rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
        """Returns (mu, logvar), each (N, 2). Deterministic in eval mode."""
        p = self.params
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.data.ndim == 3:
            x = x.reshape((1,) + x.data.shape)
        if x.data.shape[2] != self.cfg.resolution:
            raise ValueError(f"expected resolution {self.cfg.resolution}, "
                             f"got {x.data.shape[2]}")
        stems = [nn.relu(nn.conv2d(x, p[f"stem{k}_w"], p[f"stem{k}_b"], "same"))
                 for k in (3, 5, 7)]
        h = nn.maxpool2(nn.concat(stems, axis=1))
        h = nn.maxpool2(nn.relu(nn.conv2d(h, p["enc_c1_w"], p["enc_c1_b"], "same")))
        h = nn.maxpool2(nn.relu(nn.conv2d(h, p["enc_c2_w"], p["enc_c2_b"], "same")))
        flat = h.reshape((h.data.shape[0], self.cfg.flat_dim))
        flat = nn.dropout(flat, self.cfg.dropout_rate,
                          "train" if train else "eval", rng)
        f = nn.relu(nn.dense(flat, p["enc_fc_w"], p["enc_fc_b"]))
        mu = nn.dense(f, p["mu_w"], p["mu_b"])
        # scale-fixed normalization of the posterior mean: forcing the
        # aggregate posterior to zero mean / unit variance keeps the code
        # pathway alive (the decoder cannot silence it by shrinking the
        # encoder output), which is what otherwise collapses the posterior
        # to the prior on this image family. Training batches normalize by
        # their own statistics; eval mode uses the running averages.
        if train and mu.data.shape[0] > 1:
            m = mu.mean(axis=0)
            centered = mu - m
            var = (centered * centered).mean(axis=0)
            rm, rv = p["mu_bn_mean"].data, p["mu_bn_var"].data
            rm += BN_MOMENTUM * (m.data - rm)
            rv += BN_MOMENTUM * (var.data - rv)
            mu = centered * (var + BN_EPS) ** -0.5
        else:
            mu = (mu - p["mu_bn_mean"].data) \
                * (1.0 / np.sqrt(p["mu_bn_var"].data + BN_EPS))
        logvar = nn.clip(nn.dense(f, p["logvar_w"], p["logvar_b"]),
                         -LOGVAR_LIMIT, LOGVAR_LIMIT)
        return mu, logvar

    def decode(self, z: Tensor) -> Tensor:
        p = self.params
        g = nn.relu(nn.dense(z, p["dec_fc1_w"], p["dec_fc1_b"]))
        g = nn.relu(nn.dense(g, p["dec_fc2_w"], p["dec_fc2_b"]))
        side = self.cfg.feat_side
        g = g.reshape((g.data.shape[0], self.cfg.mid_channels, side, side))
        g = nn.relu(nn.conv2d(nn.upsample2(g), p["dec_c1_w"], p["dec_c1_b"], "same"))
        g = nn.relu(nn.conv2d(nn.upsample2(g), p["dec_c2_w"], p["dec_c2_b"], "same"))
        return nn.conv2d(nn.upsample2(g), p["dec_c3_w"], p["dec_c3_b"], "same")


def reparameterize(mu: Tensor, logvar: Tensor, eps) -> Tensor:
    """z = mu + exp(logvar / 2) * eps."""
    return mu + nn.exp(logvar * 0.5) * Tensor(np.asarray(eps, dtype=np.float64))


def vae_loss(model: VAEModel, batch, eps, train: bool = False,
             dropout_rng=None) -> tuple[Tensor, Tensor, Tensor]:
    """Negative ELBO over a batch: (total, reconstruction, KL).

    Reconstruction is the half-sum of squared errors (Gaussian decoder,
    unit variance); KL is the closed-form diagonal-Gaussian divergence.
    One eps draw per image gives the single-sample expectation estimate.
    """
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    if x.data.ndim == 3:
        x = x.reshape((1,) + x.data.shape)
    if x.data.shape[0] == 0:
        raise ValueError("empty batch")
    mu, logvar = model.encode(x, train=train, rng=dropout_rng)
    z = reparameterize(mu, logvar, eps)
    xhat = model.decode(z)
    diff = xhat - x
    recon = 0.5 * (diff * diff).sum()
    kl = nn.kl_diag_gaussian(mu, logvar)
    return recon + kl, recon, kl


def train_vae(images, cfg: VAEConfig, seed: int) -> tuple[VAEModel, list[float]]:
    """Train with Adam (default hyperparameters), dropout active.

    The optimized objective anneals the KL weight linearly from 0 to 1
    over the first kl_warmup_epochs epochs; without the warm-up the KL
    pull wins before the decoder learns to use the code and the posterior
    collapses to the prior. The reported history is always the full
    (unweighted) per-image loss, reconstruction + KL.

    Returns the model plus the per-epoch mean per-image loss history.
    Deterministic for fixed (images, cfg, seed).
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4 or images.shape[0] == 0:
        raise ValueError("images must be a nonempty N x 3 x res x res array")
    model = VAEModel.init(cfg, seed)
    opt = nn.Adam(model.params, alpha=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 1)))
    eps_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 2)))
    drop_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 3)))
    n = images.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        beta = min(1.0, epoch / cfg.kl_warmup_epochs) \
            if cfg.kl_warmup_epochs > 0 else 1.0
        perm = shuffle_rng.permutation(n)
        epoch_total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            batch = images[idx]
            eps = eps_rng.standard_normal((len(idx), LATENT_DIM))
            opt.zero_grad()
            total, recon, kl = vae_loss(model, batch, eps, train=True,
                                        dropout_rng=drop_rng)
            (recon + beta * kl).backward()
            opt.step()
            epoch_total += float(total.data)
        history.append(epoch_total / n)
    return model, history


def extract_features(model: VAEModel, image_index: dict[int, str],
                     batch_size: int = 50) -> dict[int, tuple[float, float]]:
    """Posterior means (eval mode) per bin; one (z1, z2) row per image."""
    bin_ids = sorted(image_index)
    table: dict[int, tuple[float, float]] = {}
    for start in range(0, len(bin_ids), batch_size):
        chunk = bin_ids[start:start + batch_size]
        tensors = []
        for bin_id in chunk:
            path = Path(image_index[bin_id])
            if not path.exists():
                raise FileNotFoundError(f"missing rendered image {path}")
            tensors.append(image_to_tensor(load_image(path)))
        mu, _ = model.encode(np.stack(tensors))
        for bin_id, row in zip(chunk, mu.data):
            table[bin_id] = (float(row[0]), float(row[1]))
    return table


def save_latents(table: dict[int, tuple[float, float]], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_id", "z1", "z2"])
        for bin_id in sorted(table):
            z1, z2 = table[bin_id]
            writer.writerow([bin_id, repr(z1), repr(z2)])


def load_latents(path) -> dict[int, tuple[float, float]]:
    table = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            table[int(row[0])] = (float(row[1]), float(row[2]))
    return table


def save_vae(model: VAEModel, path) -> None:
    from dataclasses import asdict
    nn.save_params(model.params, path, meta={"config": asdict(model.cfg)})


def load_vae(path) -> VAEModel:
    params, meta = nn.load_params(path)
    return VAEModel(VAEConfig(**meta["config"]), params)
