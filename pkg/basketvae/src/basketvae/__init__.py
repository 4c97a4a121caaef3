"""Beta-VAE next-basket predictor over exported user-vector files."""

from .io import read_corpus_lines, read_latents, read_vectors, write_latents, write_predictions
from .latent import encode_users, fuse_all, latent_knn_fuse
from .model import KNN_K_PRESETS, Predictor, Vae, VaeConfig
from .predict import predict_baskets
from .train import TrainingError, train_predictor, train_vae

__all__ = [
    "KNN_K_PRESETS",
    "Predictor",
    "TrainingError",
    "Vae",
    "VaeConfig",
    "encode_users",
    "fuse_all",
    "latent_knn_fuse",
    "predict_baskets",
    "read_corpus_lines",
    "read_latents",
    "read_vectors",
    "train_predictor",
    "train_vae",
    "write_latents",
    "write_predictions",
]

__version__ = "0.1.0"
