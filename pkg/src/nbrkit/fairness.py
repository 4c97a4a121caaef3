"""Per-user traits and binned Recall@10 reports across three fairness axes.

Users are characterized by average basket size, the share of popular items
in their past baskets, and the share of never-before-purchased items in
their test basket.  Each axis partitions users into bins; the report gives
mean Recall@10 and the user count per bin, enough to redraw the
recall-vs-trait bar/line figures with any plotting tool.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import BasketCorpus, global_popularity
from .errors import ValidationError

AXES = ("basket_size", "popular_share", "novelty_share")

POPULAR_TOP_FRACTION = 0.2
_BASKET_SIZE_CAP = 50  # unit-width bins [1,2) .. [49,50), then one open 50+ bin


@dataclass(frozen=True)
class UserTrait:
    user_id: str
    avg_basket_size: float  # mean history basket size, >= 1
    popular_share: float  # percent, mean over history baskets
    novelty_share: float  # percent of test items never purchased before


@dataclass(frozen=True)
class FairnessBins:
    axis: str
    # (label, mean recall@10 or None for empty bins, user count)
    bins: tuple[tuple[str, float | None, int], ...]

    def as_records(self) -> list[dict]:
        return [
            {"bin": label, "recall_at_10": recall, "user_count": count}
            for label, recall, count in self.bins
        ]


def popular_item_set(corpus: BasketCorpus) -> set[int]:
    """Top 20% of items by history-basket count (ties by ascending index)."""
    top_n = math.ceil(POPULAR_TOP_FRACTION * corpus.n_items)
    return set(global_popularity(corpus)[:top_n])


def compute_traits(corpus: BasketCorpus) -> list[UserTrait]:
    """Traits for every user of a split corpus; model-independent."""
    corpus.require_split()
    popular = popular_item_set(corpus)
    traits = []
    for rec in corpus.users:
        sizes = [len(b) for b in rec.history]
        shares = [100.0 * sum(1 for i in b if i in popular) / len(b) for b in rec.history]
        seen = set()
        for basket in rec.history:
            seen.update(basket)
        test = rec.test_basket or ()
        novel = sum(1 for i in test if i not in seen)
        traits.append(
            UserTrait(
                user_id=rec.user_id,
                avg_basket_size=sum(sizes) / len(sizes),
                popular_share=sum(shares) / len(shares),
                novelty_share=100.0 * novel / len(test),
            )
        )
    return traits


def _basket_size_bin(value: float) -> int:
    return min(int(value), _BASKET_SIZE_CAP)


def _percent_bin(value: float) -> int:
    return min(int(value // 10), 9)


def _basket_size_labels() -> list[str]:
    labels = [f"[{b},{b + 1})" for b in range(1, _BASKET_SIZE_CAP)]
    labels.append(f"{_BASKET_SIZE_CAP}+")
    return labels


def _percent_labels() -> list[str]:
    labels = [f"[{10 * d},{10 * (d + 1)})" for d in range(9)]
    labels.append("[90,100]")
    return labels


def bin_and_report(
    traits: Sequence[UserTrait],
    per_user_recalls: Mapping[str, float],
    axis: str,
) -> FairnessBins:
    """Partition users along one axis and average Recall@10 per bin.

    Basket size uses unit-width bins capped by an open 50+ bin; percent
    axes use decile bins with [90,100] closed.  Empty bins keep count 0
    and a null recall.
    """
    if axis not in AXES:
        raise ValidationError(f"unknown axis {axis!r}; expected one of {AXES}")
    missing = [t.user_id for t in traits if t.user_id not in per_user_recalls]
    if missing:
        raise ValidationError(f"no recall values for users: {missing[:10]}")

    labels = _basket_size_labels() if axis == "basket_size" else _percent_labels()
    sums = [0.0] * len(labels)
    counts = [0] * len(labels)
    for trait in sorted(traits, key=lambda t: t.user_id):
        if axis == "basket_size":
            b = _basket_size_bin(trait.avg_basket_size) - 1
        elif axis == "popular_share":
            b = _percent_bin(trait.popular_share)
        else:
            b = _percent_bin(trait.novelty_share)
        sums[b] += per_user_recalls[trait.user_id]
        counts[b] += 1

    bins = tuple(
        (label, (sums[i] / counts[i]) if counts[i] else None, counts[i])
        for i, label in enumerate(labels)
    )
    return FairnessBins(axis=axis, bins=bins)


def write_bins_csv(bins: FairnessBins, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_label", "recall_at_10", "user_count"])
        for label, recall, count in bins.bins:
            writer.writerow([label, "" if recall is None else repr(recall), count])


def write_bins_json(all_bins: Sequence[FairnessBins], n_users: int, path: str | Path) -> None:
    bundle = {
        "n_users": n_users,
        "axes": {bins.axis: bins.as_records() for bins in all_bins},
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=2)
        fh.write("\n")
