"""Encoder/decoder/predictor networks and the training configuration.

The encoder maps a sparse user vector to a 128-dim Gaussian (mu and log
sigma); the mirrored decoder reconstructs the input through a final Tanh.
The predictor shares the decoder's shape, adds dropout per layer, and maps
a (possibly neighbor-fused) latent vector to item logits.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

HIDDEN_WIDTHS = (1024, 512, 256)
LATENT_DIM = 128

# Per-dataset latent-space neighbor counts that worked best.
KNN_K_PRESETS = {
    "instacart": 50,
    "dunnhumby": 20,
    "tmall": 250,
    "taobao": 150,
    "valuedshopper": 10,
    "tafeng": 10,
}


@dataclass
class VaeConfig:
    latent_dim: int = LATENT_DIM
    beta: float = 4.0
    vae_epochs: int = 50
    vae_lr: float = 0.005
    predictor_epochs: int = 50
    predictor_lr: float = 0.1
    plateau_factor: float = 0.5
    plateau_patience: int = 3
    dropout: float = 0.1
    batch_size: int = 128
    knn_k: int = 0  # 0 = no latent-space neighbors
    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.latent_dim <= 0:
            raise ValueError(f"latent_dim must be > 0, got {self.latent_dim}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.knn_k < 0:
            raise ValueError(f"knn_k must be >= 0, got {self.knn_k}")


class Encoder(nn.Module):
    """n_items -> 1024 -> 512 -> 256 -> latent_dim x 2 (mu, log sigma)."""

    def __init__(self, n_items: int, latent_dim: int = LATENT_DIM):
        super().__init__()
        widths = (n_items,) + HIDDEN_WIDTHS
        layers: list[nn.Module] = []
        for w_in, w_out in zip(widths, widths[1:]):
            layers += [nn.Linear(w_in, w_out), nn.LeakyReLU()]
        layers.append(nn.Linear(widths[-1], 2 * latent_dim))
        self.net = nn.Sequential(*layers)
        self.latent_dim = latent_dim

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        both = self.net(x)
        mu, log_sigma = both[:, : self.latent_dim], both[:, self.latent_dim :]
        return mu, log_sigma


class Decoder(nn.Module):
    """latent_dim -> 256 -> 512 -> 1024 -> n_items, Tanh output."""

    def __init__(self, n_items: int, latent_dim: int = LATENT_DIM):
        super().__init__()
        widths = (latent_dim,) + tuple(reversed(HIDDEN_WIDTHS))
        layers: list[nn.Module] = []
        for w_in, w_out in zip(widths, widths[1:]):
            layers += [nn.Linear(w_in, w_out), nn.LeakyReLU()]
        layers += [nn.Linear(widths[-1], n_items), nn.Tanh()]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


class Predictor(nn.Module):
    """Decoder shape with dropout per layer; outputs item logits."""

    def __init__(self, n_items: int, latent_dim: int = LATENT_DIM, dropout: float = 0.1):
        super().__init__()
        widths = (latent_dim,) + tuple(reversed(HIDDEN_WIDTHS))
        layers: list[nn.Module] = []
        for w_in, w_out in zip(widths, widths[1:]):
            layers += [nn.Linear(w_in, w_out), nn.LeakyReLU(), nn.Dropout(dropout)]
        layers += [nn.Linear(widths[-1], n_items), nn.Tanh(), nn.Dropout(dropout)]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


class Vae(nn.Module):
    def __init__(self, n_items: int, latent_dim: int = LATENT_DIM):
        super().__init__()
        self.encoder = Encoder(n_items, latent_dim)
        self.decoder = Decoder(n_items, latent_dim)
        self.n_items = n_items
        self.latent_dim = latent_dim

    def reparameterize(
        self, mu: torch.Tensor, log_sigma: torch.Tensor, sample: bool = True
    ) -> torch.Tensor:
        # h = mu + sigma (.) eps, eps ~ N(0, 1); eval-time encoding is mu.
        if not sample:
            return mu
        eps = torch.randn_like(mu)
        return mu + torch.exp(log_sigma) * eps

    def forward(self, x: torch.Tensor, sample: bool = True):
        mu, log_sigma = self.encoder(x)
        z = self.reparameterize(mu, log_sigma, sample=sample)
        return self.decoder(z), mu, log_sigma


def kl_divergence(mu: torch.Tensor, log_sigma: torch.Tensor) -> torch.Tensor:
    """Batch-mean KL(q(z|x) || N(0, I)); non-negative by construction."""
    per_sample = -0.5 * (1 + 2 * log_sigma - mu.pow(2) - torch.exp(2 * log_sigma)).sum(dim=1)
    return per_sample.mean()


def linear_shapes(module: nn.Module) -> list[tuple[int, int]]:
    """(in_features, out_features) of every Linear layer, in order."""
    return [
        (layer.in_features, layer.out_features)
        for layer in module.modules()
        if isinstance(layer, nn.Linear)
    ]


def expected_encoder_shapes(n_items: int, latent_dim: int = LATENT_DIM) -> list[tuple[int, int]]:
    return [
        (n_items, 1024), (1024, 512), (512, 256), (256, 2 * latent_dim),
    ]


def expected_decoder_shapes(n_items: int, latent_dim: int = LATENT_DIM) -> list[tuple[int, int]]:
    return [
        (latent_dim, 256), (256, 512), (512, 1024), (1024, n_items),
    ]


def save_checkpoint(
    module: nn.Module, kind: str, n_items: int, config: VaeConfig, path: str | Path
) -> None:
    """Self-describing checkpoint: weights plus config and layer shapes."""
    torch.save(
        {
            "kind": kind,
            "n_items": n_items,
            "config": asdict(config),
            "layer_shapes": linear_shapes(module),
            "state_dict": module.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str | Path, expected_kind: str) -> tuple[nn.Module, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != expected_kind:
        raise ValueError(f"{path}: checkpoint kind {payload.get('kind')!r}, wanted {expected_kind!r}")
    config = VaeConfig(**payload["config"])
    n_items = payload["n_items"]
    module: nn.Module
    if expected_kind == "vae":
        module = Vae(n_items, config.latent_dim)
    else:
        module = Predictor(n_items, config.latent_dim, config.dropout)
    module.load_state_dict(payload["state_dict"])
    module.eval()
    return module, payload
