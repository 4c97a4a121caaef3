"""Top-s item selection from predictor logits."""

from __future__ import annotations

import numpy as np
import torch

from .model import Predictor


def predict_baskets(
    model: Predictor,
    fused: dict[str, np.ndarray],
    s: int,
    batch_size: int = 256,
) -> dict[str, list[int]]:
    """Highest-s logits per user; ties break by ascending item index."""
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    model.eval()
    user_ids = sorted(fused)
    out: dict[str, list[int]] = {}
    with torch.no_grad():
        for start in range(0, len(user_ids), batch_size):
            chunk = user_ids[start : start + batch_size]
            z = torch.from_numpy(
                np.stack([fused[u] for u in chunk]).astype(np.float32)
            )
            logits = model(z).numpy()
            for i, user in enumerate(chunk):
                row = logits[i]
                take = min(s, len(row))
                kth = np.partition(-row, take - 1)[take - 1]
                candidates = np.flatnonzero(-row <= kth)
                order = np.lexsort((candidates, -row[candidates]))
                out[user] = [int(idx) for idx in candidates[order[:take]]]
    return out
