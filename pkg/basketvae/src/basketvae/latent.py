"""Deterministic encoding and latent-space neighbor fusion."""

from __future__ import annotations

import numpy as np
import torch

from .io import SparseVectors
from .model import Vae

_CHUNK = 512


def encode_users(model: Vae, vectors: SparseVectors, batch_size: int = 256) -> dict[str, np.ndarray]:
    """z = mu(x): no sampling, so identical inputs give identical latents."""
    model.eval()
    out: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for start in range(0, vectors.n_users, batch_size):
            rows = np.arange(start, min(start + batch_size, vectors.n_users))
            x = torch.from_numpy(vectors.densify(rows))
            mu, _ = model.encoder(x)
            for i, row in enumerate(rows):
                out[vectors.user_ids[row]] = mu[i].numpy().copy()
    return out


def _neighbor_rows(matrix: np.ndarray, row: int, k: int) -> np.ndarray:
    """k nearest rows by Euclidean distance, self excluded, ties by row."""
    diffs = matrix - matrix[row]
    d2 = np.einsum("ij,ij->i", diffs, diffs)
    d2[row] = np.inf
    take = min(k, len(matrix) - 1)
    if take <= 0:
        return np.empty(0, dtype=np.int64)
    kth = np.partition(d2, take - 1)[take - 1]
    candidates = np.flatnonzero(d2 <= kth)
    order = np.lexsort((candidates, d2[candidates]))
    return candidates[order[:take]]


def latent_knn_fuse(
    latents: dict[str, np.ndarray], target: str, k: int, alpha: float
) -> np.ndarray:
    """alpha * own latent + (1 - alpha) * mean of k nearest latents.

    k = 0 is the no-neighbor variant: the fused vector is the user's own.
    Rows sort by user_id, so distance ties break lexicographically.
    """
    if target not in latents:
        raise KeyError(f"unknown user_id: {target!r}")
    user_ids = sorted(latents)
    if k == 0:
        return latents[target].copy()
    matrix = np.stack([latents[u] for u in user_ids]).astype(np.float64)
    row = user_ids.index(target)
    neighbors = _neighbor_rows(matrix, row, k)
    own = matrix[row]
    if len(neighbors) == 0:
        return own.astype(np.float32)
    mean = matrix[neighbors].mean(axis=0)
    return (alpha * own + (1.0 - alpha) * mean).astype(np.float32)


def fuse_all(latents: dict[str, np.ndarray], k: int, alpha: float) -> dict[str, np.ndarray]:
    """latent_knn_fuse across every user, with chunked distance blocks."""
    user_ids = sorted(latents)
    if k == 0:
        return {u: latents[u].copy() for u in user_ids}
    matrix = np.stack([latents[u] for u in user_ids]).astype(np.float64)
    norms = np.einsum("ij,ij->i", matrix, matrix)
    fused: dict[str, np.ndarray] = {}
    n = len(user_ids)
    take = min(k, n - 1)
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, n))
        gram = matrix[rows] @ matrix.T
        d2 = norms[rows][:, None] + norms[None, :] - 2.0 * gram
        np.maximum(d2, 0.0, out=d2)
        for offset, row in enumerate(rows):
            d2_row = d2[offset]
            d2_row[row] = np.inf
            if take <= 0:
                fused[user_ids[row]] = matrix[row].astype(np.float32)
                continue
            kth = np.partition(d2_row, take - 1)[take - 1]
            candidates = np.flatnonzero(d2_row <= kth)
            order = np.lexsort((candidates, d2_row[candidates]))
            neighbors = candidates[order[:take]]
            mean = matrix[neighbors].mean(axis=0)
            fused[user_ids[row]] = (alpha * matrix[row] + (1.0 - alpha) * mean).astype(
                np.float32
            )
    return fused
