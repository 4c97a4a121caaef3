"""Shared corpus builders for the tests."""

from __future__ import annotations

import random

from nbrkit.corpus import BasketCorpus, UserRecord, ingest, preprocess, split
from nbrkit.synthetic import generate_synthetic


def make_corpus(users: dict[str, list[list[int]]], n_items: int) -> BasketCorpus:
    """Split corpus from explicit index baskets; last basket becomes test."""
    records = []
    for user_id in sorted(users):
        baskets = [tuple(sorted(set(b))) for b in users[user_id]]
        records.append(
            UserRecord(user_id=user_id, history=tuple(baskets[:-1]), test_basket=baskets[-1])
        )
    return BasketCorpus(
        item_ids=tuple(f"i{i:05d}" for i in range(n_items)), users=tuple(records)
    )


def synthetic_corpus(
    seed: int,
    n_users: int = 200,
    n_items: int = 120,
    baskets_per_user_range=(4, 8),
    basket_size_range=(3, 9),
    popularity_skew: float = 0.6,
) -> BasketCorpus:
    """Generated, preprocessed (no-op thresholds) and split corpus."""
    rows = generate_synthetic(
        seed=seed,
        n_users=n_users,
        n_items=n_items,
        baskets_per_user_range=baskets_per_user_range,
        basket_size_range=basket_size_range,
        popularity_skew=popularity_skew,
    )
    return split(preprocess(ingest(rows), min_baskets=3, min_item_users=1, min_basket_size=1))


def random_sparse_vectors(
    seed: int, n_users: int, dim: int, max_nnz: int = 30
) -> dict[str, dict[int, float]]:
    rng = random.Random(seed)
    out = {}
    for u in range(n_users):
        nnz = rng.randint(1, max_nnz)
        idxs = rng.sample(range(dim), min(nnz, dim))
        out[f"u{u:05d}"] = {i: rng.uniform(0.01, 1.0) for i in idxs}
    return out
