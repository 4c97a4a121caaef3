"""Training loops for the VAE and the next-basket Predictor.

Both loops log `(epoch, recon, kl, total)` rows (the predictor's kl column
is 0), step a reduce-on-plateau schedule on the epoch loss, and abort with
the epoch number if the loss stops being finite.  All randomness (init,
shuffling, reparameterization noise, dropout) derives from config.seed.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .io import SparseVectors
from .model import Predictor, Vae, VaeConfig, kl_divergence


class TrainingError(RuntimeError):
    pass


LossRow = tuple[int, float, float, float]


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_vae(vectors: SparseVectors, config: VaeConfig) -> tuple[Vae, list[LossRow]]:
    """Minimize reconstruction MSE + beta * KL over the exported vectors.

    Both loss terms are per-sample sums averaged over the batch: squared
    error summed over the full dense output (zeros included), KL summed
    over latent dims.  Matching scales keeps the encoder informative
    instead of collapsing onto the prior.
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    model = Vae(vectors.dim, config.latent_dim)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.vae_lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=config.plateau_factor, patience=config.plateau_patience
    )

    curve: list[LossRow] = []
    for epoch in range(1, config.vae_epochs + 1):
        recon_sum = kl_sum = 0.0
        n_batches = 0
        for batch_rows in _epoch_batches(vectors.n_users, config.batch_size, rng):
            x = torch.from_numpy(vectors.densify(batch_rows))
            optimizer.zero_grad()
            x_hat, mu, log_sigma = model(x)
            recon = (x_hat - x).pow(2).sum(dim=1).mean()
            kl = kl_divergence(mu, log_sigma)
            loss = recon + config.beta * kl
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite VAE loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            recon_sum += recon.item()
            kl_sum += kl.item()
            n_batches += 1
        recon_mean = recon_sum / n_batches
        kl_mean = kl_sum / n_batches
        total = recon_mean + config.beta * kl_mean
        curve.append((epoch, recon_mean, kl_mean, total))
        scheduler.step(total)
    model.eval()
    return model, curve


def train_predictor(
    latents: np.ndarray,
    target_items: list[np.ndarray],
    n_items: int,
    config: VaeConfig,
) -> tuple[Predictor, list[LossRow]]:
    """Fit latent -> next-basket logits with MSE against q-hot targets."""
    if len(latents) != len(target_items):
        raise ValueError(f"{len(latents)} latents vs {len(target_items)} targets")
    if len(latents) == 0:
        raise TrainingError("no training users for the predictor")
    torch.manual_seed(config.seed + 1)
    rng = np.random.default_rng(config.seed + 1)
    model = Predictor(n_items, config.latent_dim, config.dropout)
    model.train()
    optimizer = torch.optim.SGD(model.parameters(), lr=config.predictor_lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=config.plateau_factor, patience=config.plateau_patience
    )
    mse = nn.MSELoss()
    inputs = torch.from_numpy(np.asarray(latents, dtype=np.float32))

    curve: list[LossRow] = []
    for epoch in range(1, config.predictor_epochs + 1):
        loss_sum = 0.0
        n_batches = 0
        for batch_rows in _epoch_batches(len(target_items), config.batch_size, rng):
            q_hot = np.zeros((len(batch_rows), n_items), dtype=np.float32)
            for i, row in enumerate(batch_rows):
                q_hot[i, target_items[row]] = 1.0
            optimizer.zero_grad()
            logits = model(inputs[batch_rows])
            loss = mse(logits, torch.from_numpy(q_hot))
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite predictor loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            loss_sum += loss.item()
            n_batches += 1
        mean_loss = loss_sum / n_batches
        curve.append((epoch, mean_loss, 0.0, mean_loss))
        scheduler.step(mean_loss)
    model.eval()
    return model, curve
