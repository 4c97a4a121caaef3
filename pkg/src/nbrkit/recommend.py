"""Ranked next-basket predictions: Personal Top Frequency and TIFU-KNN.

TIFU-KNN scores items as alpha * u_t + (1 - alpha) * u_n, where u_t is the
target's time-decayed vector and u_n the mean of its k nearest neighbors'
vectors.  Personal Top Frequency ranks the user's own most frequent items.
Both pad short lists from global popularity unless padding is disabled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import BasketCorpus, UserRecord, global_popularity
from .errors import ValidationError
from .knn import KnnIndex, _CHUNK_ROWS
from .vectors import DecayParams, UserVector, decayed_user_vector, pif_vector

# Sparse item-index -> score map; finite values only.
PredictionScores = dict[int, float]

MODEL_TOP_PERSONAL = "top-personal"
MODEL_TIFU_KNN = "tifuknn"


@dataclass(frozen=True)
class HyperParams:
    k: int = 300
    decay: DecayParams = field(default_factory=DecayParams)
    alpha: float = 0.7
    basket_size: int = 20

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.basket_size < 1:
            raise ValidationError(f"basket_size must be >= 1, got {self.basket_size}")


# Published per-dataset optimum settings, shipped as named presets.
PRESETS: dict[str, HyperParams] = {
    "instacart": HyperParams(k=900, decay=DecayParams(0.9, 0.7, 3), alpha=0.9),
    "tafeng": HyperParams(k=300, decay=DecayParams(0.9, 0.7, 7), alpha=0.7),
    "dunnhumby": HyperParams(k=900, decay=DecayParams(0.9, 0.6, 3), alpha=0.2),
    "valuedshopper": HyperParams(k=300, decay=DecayParams(1.0, 0.6, 7), alpha=0.7),
    "tmall": HyperParams(k=100, decay=DecayParams(0.6, 0.8, 18), alpha=0.7),
    "taobao": HyperParams(k=300, decay=DecayParams(0.6, 0.8, 10), alpha=0.1),
}


@dataclass(frozen=True)
class PredictionList:
    user_id: str
    items: tuple[int, ...]
    model_tag: str

    def __post_init__(self) -> None:
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"duplicate items in prediction for {self.user_id!r}")


def select_top_s(
    scores: Mapping[int, float],
    s: int,
    popularity: Sequence[int] = (),
    pad: bool = True,
) -> list[int]:
    """Top-s item indices: positive scores ranked by (score desc, index asc);
    zero-score items can only enter through global-popularity padding."""
    if s < 1:
        raise ValidationError(f"s must be >= 1, got {s}")
    ranked = []
    for idx, value in scores.items():
        if not math.isfinite(value):
            raise ValidationError(f"non-finite score at item {idx}: {value}")
        if value > 0.0:
            ranked.append((-value, idx))
    ranked.sort()
    chosen = [idx for _, idx in ranked[:s]]
    if pad and len(chosen) < s:
        in_list = set(chosen)
        for item in popularity:
            if len(chosen) >= s:
                break
            if item not in in_list:
                chosen.append(item)
                in_list.add(item)
    return chosen


def top_personal(
    user: UserRecord,
    s: int,
    dim: int,
    popularity: Sequence[int] = (),
    pad: bool = True,
) -> PredictionList:
    """Rank the user's own most frequently purchased items."""
    counts = pif_vector(user.history, dim)
    items = select_top_s(counts.entries, s, popularity, pad=pad)
    return PredictionList(user_id=user.user_id, items=tuple(items), model_tag=MODEL_TOP_PERSONAL)


def tifu_knn_predict(target: str, index: KnnIndex, hp: HyperParams) -> PredictionScores:
    """Fused prediction scores for one user whose vector is in the index.

    u_n averages the k nearest neighbors' decayed vectors; with no
    neighbors available it is the zero vector.  alpha = 1 makes the
    neighbor search unnecessary and it is skipped.
    """
    row = index.row_of(target)
    u_t = {int(i): float(v) for i, v in zip(*index.row_entries(row))}
    if hp.alpha == 1.0:
        return dict(u_t)

    neighbor_rows = index.neighbors_batch(hp.k, targets=[target])[0]
    u_n: dict[int, float] = {}
    # Ascending row order fixes the accumulation order (and matches the
    # vectorized batch path bit for bit).
    for nbr in sorted(int(r) for r in neighbor_rows):
        idx, val = index.row_entries(nbr)
        for i, v in zip(idx, val):
            u_n[int(i)] = u_n.get(int(i), 0.0) + float(v)
    count = len(neighbor_rows)
    if count:
        for i in u_n:
            u_n[i] /= count

    scores: PredictionScores = {}
    for i in set(u_t) | set(u_n):
        scores[i] = hp.alpha * u_t.get(i, 0.0) + (1.0 - hp.alpha) * u_n.get(i, 0.0)
    return scores


def build_user_vectors(corpus: BasketCorpus, decay: DecayParams) -> dict[str, UserVector]:
    """Decayed history vectors for every corpus user."""
    return {
        rec.user_id: decayed_user_vector(rec.history, decay, corpus.n_items)
        for rec in corpus.users
    }


def _rank_score_row(
    scores: np.ndarray,
    s: int,
    popularity: Sequence[int],
    pad: bool,
) -> list[int]:
    """Vectorized select_top_s over a dense score row; identical tie rule."""
    positive = np.flatnonzero(scores > 0.0)
    if len(positive) > s:
        values = scores[positive]
        kth = -np.partition(-values, s - 1)[s - 1]
        keep = positive[values >= kth]
        order = np.lexsort((keep, -scores[keep]))
        chosen = [int(i) for i in keep[order[:s]]]
    else:
        order = np.lexsort((positive, -scores[positive]))
        chosen = [int(i) for i in positive[order]]
    if pad and len(chosen) < s:
        in_list = set(chosen)
        for item in popularity:
            if len(chosen) >= s:
                break
            if item not in in_list:
                chosen.append(item)
                in_list.add(item)
    return chosen


def recommend_batch(
    corpus: BasketCorpus,
    model: str,
    hp: HyperParams,
    threads: int = 1,
    pad: bool = True,
) -> list[PredictionList]:
    """Predictions for every corpus user, in user_id order."""
    corpus.require_split()
    popularity = global_popularity(corpus)
    s = hp.basket_size

    if model == MODEL_TOP_PERSONAL:
        return [
            top_personal(rec, s, corpus.n_items, popularity, pad=pad)
            for rec in corpus.users
        ]
    if model != MODEL_TIFU_KNN:
        raise ValidationError(f"unknown model {model!r}")

    vectors = build_user_vectors(corpus, hp.decay)
    index = KnnIndex.build(vectors)
    user_ids = [rec.user_id for rec in corpus.users]
    if list(index.user_ids) != user_ids:
        raise AssertionError("index/user ordering out of sync")

    matrix = index.matrix
    n = len(user_ids)
    neighbors = None
    if hp.alpha != 1.0:
        neighbors = index.neighbors_batch(hp.k, threads=threads)

    predictions: list[PredictionList] = []
    one_minus_alpha = 1.0 - hp.alpha
    for start in range(0, n, _CHUNK_ROWS):
        rows = np.arange(start, min(start + _CHUNK_ROWS, n))
        u_t = matrix[rows].toarray()
        if neighbors is None:  # alpha == 1, neighbor search skipped
            scores = u_t
        else:
            chunk_nbrs = [neighbors[r] for r in rows]
            counts = np.array([max(len(nb), 1) for nb in chunk_nbrs], dtype=np.float64)
            coo_rows = np.repeat(np.arange(len(rows)), [len(nb) for nb in chunk_nbrs])
            coo_cols = np.concatenate(chunk_nbrs) if chunk_nbrs and coo_rows.size else np.empty(0, dtype=np.int64)
            picker = sp.coo_matrix(
                (np.ones(coo_rows.size), (coo_rows, coo_cols)), shape=(len(rows), n)
            ).tocsr()
            u_n = (picker @ matrix).toarray()
            u_n /= counts[:, None]
            scores = hp.alpha * u_t + one_minus_alpha * u_n
        for offset, row in enumerate(rows):
            items = _rank_score_row(scores[offset], s, popularity, pad)
            predictions.append(
                PredictionList(
                    user_id=user_ids[row], items=tuple(items), model_tag=MODEL_TIFU_KNN
                )
            )
    return predictions


def write_predictions(predictions: Sequence[PredictionList], path: str | Path) -> None:
    """NDJSON: `{"user_id": ..., "items": [...], "model": ...}` per line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for pred in predictions:
            line = {"user_id": pred.user_id, "items": list(pred.items), "model": pred.model_tag}
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")


def read_predictions(path: str | Path) -> list[PredictionList]:
    """Inverse of write_predictions; malformed lines report their number."""
    out: list[PredictionList] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pred = PredictionList(
                    user_id=obj["user_id"],
                    items=tuple(int(i) for i in obj["items"]),
                    model_tag=str(obj.get("model", "")),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{line_no}: bad prediction line ({exc})") from None
            out.append(pred)
    if not out:
        raise ValidationError(f"{path}: no predictions")
    return out
