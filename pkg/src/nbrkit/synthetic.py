"""Deterministic synthetic transaction logs for desk-scale experiments.

Item popularity follows a Zipf-like skew so popularity-based analyses have
non-degenerate bins; skew 0 gives (approximately) uniform item draws.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Transaction
from .errors import ValidationError


def popularity_weights(n_items: int, skew: float) -> np.ndarray:
    """Normalized item-draw probabilities, weight[i] ~ 1/(i+1)^skew."""
    if n_items < 1:
        raise ValidationError("n_items must be >= 1")
    w = 1.0 / np.arange(1, n_items + 1, dtype=np.float64) ** skew
    return w / w.sum()


def generate_synthetic(
    seed: int,
    n_users: int = 500,
    n_items: int = 200,
    baskets_per_user_range: Sequence[int] = (4, 8),
    basket_size_range: Sequence[int] = (3, 10),
    popularity_skew: float = 0.6,
) -> list[Transaction]:
    """Generate a transaction stream, byte-identical for identical arguments.

    Each basket samples exactly its target size without replacement, so
    recomputed corpus statistics match the requested ranges.
    """
    lo_b, hi_b = int(baskets_per_user_range[0]), int(baskets_per_user_range[-1])
    lo_s, hi_s = int(basket_size_range[0]), int(basket_size_range[-1])
    if n_users < 1:
        raise ValidationError("n_users must be >= 1")
    if lo_b < 1 or hi_b < lo_b:
        raise ValidationError(f"bad baskets_per_user_range ({lo_b}, {hi_b})")
    if lo_s < 1 or hi_s < lo_s or hi_s > n_items:
        raise ValidationError(f"bad basket_size_range ({lo_s}, {hi_s}) for {n_items} items")

    rng = np.random.default_rng(seed)
    weights = popularity_weights(n_items, popularity_skew)
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0  # guard against cumulative rounding

    uw = len(str(n_users - 1))
    rows: list[Transaction] = []
    for u in range(n_users):
        user_id = f"u{u:0{uw}d}"
        n_baskets = int(rng.integers(lo_b, hi_b + 1))
        for b in range(n_baskets):
            size = int(rng.integers(lo_s, hi_s + 1))
            chosen: set[int] = set()
            # Weighted draws, rejecting duplicates in draw order, keep
            # baskets at their exact target size without biasing the mix.
            while len(chosen) < size:
                need = size - len(chosen)
                draws = np.searchsorted(cdf, rng.random(2 * need), side="right")
                for i in draws:
                    if len(chosen) == size:
                        break
                    chosen.add(int(i))
            basket_id = f"{user_id}-b{b:03d}"
            for item in sorted(chosen):
                rows.append(Transaction(user_id, basket_id, b, f"i{item:05d}"))
    return rows


def write_transactions_csv(rows: Sequence[Transaction], path: str | Path) -> None:
    """Write the standard transaction CSV with an explicit order column."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "basket_id", "basket_order", "item_id"])
        for row in rows:
            writer.writerow([row.user_id, row.basket_id, row.basket_order, row.item_id])
