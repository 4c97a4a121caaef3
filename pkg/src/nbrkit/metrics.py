"""Ranking metrics for predicted baskets: Recall@K, NDCG@K, MRR@K, PHR@K.

All metrics score a ranked prediction list against the held-out test
basket.  NDCG uses binary relevance with the ideal gain truncated at
min(K, |truth|); MRR contributes 0 for users with no hit inside the top-K
list and is reported at K=10.  Recall divides by |truth| even when the
truth basket is larger than K.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Basket, BasketCorpus
from .errors import ValidationError
from .recommend import PredictionList

DEFAULT_KS = (10, 20)
MRR_K = 10


def recall_at_k(pred: Sequence[int], truth: Iterable[int], k: int) -> float:
    """|top-k ∩ truth| / |truth|."""
    truth_set = set(truth)
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    if not truth_set:
        raise ValidationError("empty truth basket")
    hits = sum(1 for item in pred[:k] if item in truth_set)
    return hits / len(truth_set)


def ndcg_at_k(pred: Sequence[int], truth: Iterable[int], k: int) -> float:
    """Binary-relevance DCG@k normalized by the ideal DCG."""
    truth_set = set(truth)
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    if not truth_set:
        raise ValidationError("empty truth basket")
    dcg = 0.0
    for rank, item in enumerate(pred[:k], start=1):
        if item in truth_set:
            dcg += 1.0 / math.log2(rank + 1)
    ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(k, len(truth_set)) + 1))
    return dcg / ideal


def reciprocal_rank_at_k(pred: Sequence[int], truth: Iterable[int], k: int) -> float:
    """1 / rank of the first relevant item in the top-k list, else 0."""
    truth_set = set(truth)
    for rank, item in enumerate(pred[:k], start=1):
        if item in truth_set:
            return 1.0 / rank
    return 0.0


def hit_at_k(pred: Sequence[int], truth: Iterable[int], k: int) -> int:
    truth_set = set(truth)
    return int(any(item in truth_set for item in pred[:k]))


def mrr_at_k(
    preds: Mapping[str, Sequence[int]], truths: Mapping[str, Basket], k: int
) -> float:
    """Mean reciprocal rank of the first hit, 0 for no-hit users."""
    if not truths:
        raise ValidationError("no users to score")
    total = 0.0
    for user_id in sorted(truths):
        total += reciprocal_rank_at_k(preds[user_id], truths[user_id], k)
    return total / len(truths)


def phr_at_k(
    preds: Mapping[str, Sequence[int]], truths: Mapping[str, Basket], k: int
) -> float:
    """Share of users with at least one hit in the top-k list."""
    if not truths:
        raise ValidationError("no users to score")
    hits = sum(hit_at_k(preds[user_id], truths[user_id], k) for user_id in sorted(truths))
    return hits / len(truths)


@dataclass(frozen=True)
class UserScores:
    user_id: str
    recall: dict[int, float]
    ndcg: dict[int, float]
    rr: float
    hit: dict[int, int]


@dataclass(frozen=True)
class MetricsReport:
    n_users: int
    ks: tuple[int, ...]
    mrr_k: int
    model: str
    means: dict[str, float]  # e.g. "recall@10" -> value
    per_user: tuple[UserScores, ...]

    def as_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "ks": list(self.ks),
            "mrr_k": self.mrr_k,
            "model": self.model,
            "metrics": dict(self.means),
        }

    def text_table(self) -> str:
        lines = [f"model: {self.model or '-'}    users: {self.n_users}"]
        header = "metric".ljust(8) + "".join(f"@{k}".rjust(12) for k in self.ks)
        lines.append(header)
        for name in ("recall", "ndcg", "phr"):
            row = name.ljust(8)
            for k in self.ks:
                row += f"{self.means[f'{name}@{k}']:12.6f}"
            lines.append(row)
        row = "mrr".ljust(8)
        for k in self.ks:
            row += f"{self.means[f'mrr@{self.mrr_k}']:12.6f}" if k == self.mrr_k else " " * 12
        lines.append(row)
        return "\n".join(lines) + "\n"


def evaluate(
    predictions: Sequence[PredictionList],
    corpus: BasketCorpus,
    ks: Sequence[int] = DEFAULT_KS,
) -> MetricsReport:
    """Score a prediction set against the corpus test baskets.

    Every test user must appear exactly once in the predictions; missing,
    duplicate, and unknown users are all reported by id.
    """
    corpus.require_split()
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise ValidationError(f"bad Ks: {ks}")
    mrr_k = MRR_K if MRR_K in ks else ks[0]

    truths = {rec.user_id: rec.test_basket for rec in corpus.users}
    by_user: dict[str, PredictionList] = {}
    duplicates = []
    for pred in predictions:
        if pred.user_id in by_user:
            duplicates.append(pred.user_id)
        by_user[pred.user_id] = pred
    missing = sorted(set(truths) - set(by_user))
    unknown = sorted(set(by_user) - set(truths))
    problems = []
    if duplicates:
        problems.append(f"duplicate predictions for: {sorted(set(duplicates))}")
    if missing:
        problems.append(f"missing predictions for: {missing}")
    if unknown:
        problems.append(f"predictions for unknown users: {unknown}")
    if problems:
        raise ValidationError("; ".join(problems))

    per_user = []
    sums: dict[str, float] = {}
    models = set()
    # Fixed summation order (by user_id) keeps float aggregation stable.
    for user_id in sorted(truths):
        pred = by_user[user_id]
        truth = truths[user_id]
        models.add(pred.model_tag)
        scores = UserScores(
            user_id=user_id,
            recall={k: recall_at_k(pred.items, truth, k) for k in ks},
            ndcg={k: ndcg_at_k(pred.items, truth, k) for k in ks},
            rr=reciprocal_rank_at_k(pred.items, truth, mrr_k),
            hit={k: hit_at_k(pred.items, truth, k) for k in ks},
        )
        per_user.append(scores)
        for k in ks:
            sums[f"recall@{k}"] = sums.get(f"recall@{k}", 0.0) + scores.recall[k]
            sums[f"ndcg@{k}"] = sums.get(f"ndcg@{k}", 0.0) + scores.ndcg[k]
            sums[f"phr@{k}"] = sums.get(f"phr@{k}", 0.0) + scores.hit[k]
        sums[f"mrr@{mrr_k}"] = sums.get(f"mrr@{mrr_k}", 0.0) + scores.rr

    n = len(per_user)
    means = {name: value / n for name, value in sums.items()}
    model = models.pop() if len(models) == 1 else "mixed"
    return MetricsReport(
        n_users=n, ks=ks, mrr_k=mrr_k, model=model, means=means, per_user=tuple(per_user)
    )


def write_report_json(report: MetricsReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")


def write_per_user_csv(report: MetricsReport, path: str | Path) -> None:
    """Per-user breakdown; the fairness module consumes this file."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["user_id"]
        header += [f"recall_at_{k}" for k in report.ks]
        header += [f"ndcg_at_{k}" for k in report.ks]
        header += [f"rr_at_{report.mrr_k}"]
        header += [f"hit_at_{k}" for k in report.ks]
        writer.writerow(header)
        for scores in report.per_user:
            row = [scores.user_id]
            row += [repr(scores.recall[k]) for k in report.ks]
            row += [repr(scores.ndcg[k]) for k in report.ks]
            row += [repr(scores.rr)]
            row += [str(scores.hit[k]) for k in report.ks]
            writer.writerow(row)


def read_per_user_recall(path: str | Path, k: int = 10) -> dict[str, float]:
    """user_id -> recall@k column of a per-user breakdown CSV."""
    column = f"recall_at_{k}"
    out: dict[str, float] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ValidationError(f"{path}: missing column {column!r}")
        for row in reader:
            out[row["user_id"]] = float(row[column])
    if not out:
        raise ValidationError(f"{path}: no rows")
    return out
