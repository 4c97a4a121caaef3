"""Transaction ingestion, preprocessing filters, and the history/test split.

The pipeline is: CSV rows -> Transaction records -> raw per-user basket
timelines (`ingest`) -> filtered corpus with a dense item vocabulary
(`preprocess`) -> leave-last-basket split (`split`).  A built corpus is
immutable and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError

# A basket is a set of item indices, stored sorted for determinism.
Basket = tuple[int, ...]

# Raw timeline: user_id -> chronological list of baskets of item-id strings.
RawCorpus = dict[str, list[frozenset[str]]]


@dataclass(frozen=True)
class Transaction:
    """One row of a transaction log: a single item in a single basket."""

    user_id: str
    basket_id: str
    basket_order: int
    item_id: str


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    history: tuple[Basket, ...]  # chronological, oldest first
    test_basket: Basket | None = None

    @property
    def baskets(self) -> tuple[Basket, ...]:
        """History plus test basket, when split."""
        if self.test_basket is None:
            return self.history
        return self.history + (self.test_basket,)


@dataclass(frozen=True)
class BasketCorpus:
    """Per-user basket timelines over a dense item vocabulary."""

    item_ids: tuple[str, ...]  # index -> item_id, contiguous
    users: tuple[UserRecord, ...]  # sorted by user_id

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def vocab(self) -> dict[str, int]:
        return {item: i for i, item in enumerate(self.item_ids)}

    @property
    def is_split(self) -> bool:
        return all(u.test_basket is not None for u in self.users)

    def require_split(self) -> None:
        if not self.is_split:
            raise ValidationError("corpus has no history/test split; run split first")

    def user(self, user_id: str) -> UserRecord:
        rec = self._by_id().get(user_id)
        if rec is None:
            raise ValidationError(f"unknown user_id: {user_id!r}")
        return rec

    def _by_id(self) -> dict[str, UserRecord]:
        cached = getattr(self, "_index", None)
        if cached is None:
            cached = {u.user_id: u for u in self.users}
            object.__setattr__(self, "_index", cached)
        return cached


@dataclass(frozen=True)
class CorpusStats:
    users: int
    items: int
    baskets: int
    avg_basket_size: float
    baskets_per_user: float
    min_basket_size: int
    max_basket_size: int

    def as_dict(self) -> dict:
        return {
            "users": self.users,
            "items": self.items,
            "baskets": self.baskets,
            "avg_basket_size": self.avg_basket_size,
            "baskets_per_user": self.baskets_per_user,
            "min_basket_size": self.min_basket_size,
            "max_basket_size": self.max_basket_size,
        }


# Per-dataset preprocessing thresholds: items bought by fewer than
# `min_item_users` distinct users are dropped, then baskets smaller than
# `min_basket_size`, then users left with fewer than `min_baskets` baskets.
PREPROCESS_PRESETS: dict[str, dict[str, int]] = {
    "instacart": {"min_baskets": 3, "min_item_users": 5, "min_basket_size": 1},
    "tafeng": {"min_baskets": 3, "min_item_users": 5, "min_basket_size": 1},
    "dunnhumby": {"min_baskets": 3, "min_item_users": 40, "min_basket_size": 1},
    "valuedshopper": {"min_baskets": 3, "min_item_users": 5, "min_basket_size": 1},
    "tmall": {"min_baskets": 3, "min_item_users": 5, "min_basket_size": 4},
    "taobao": {"min_baskets": 3, "min_item_users": 5, "min_basket_size": 1},
}


@dataclass(frozen=True)
class ColumnMap:
    """CSV column names; exactly one of `timestamp`/`basket_order` is used."""

    user_id: str = "user_id"
    basket_id: str = "basket_id"
    item_id: str = "item_id"
    timestamp: str = "timestamp"
    basket_order: str = "basket_order"


def _parse_timestamp(text: str, row_no: int) -> datetime:
    # ISO-8601; a trailing Z is normalized (fromisoformat rejects it on 3.10).
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError(f"row {row_no}: bad ISO-8601 timestamp {text!r}") from None


def read_transactions_csv(path: str | Path, columns: ColumnMap | None = None) -> list[Transaction]:
    """Read a transaction log, deriving each basket's chronological order.

    The file must carry `user_id,basket_id,item_id` plus exactly one of
    `timestamp` (ISO-8601) or `basket_order` (integer).  Baskets are ranked
    per user by their order value, ties broken by basket_id, and the rank
    becomes the dense basket_order.
    """
    columns = columns or ColumnMap()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for required in (columns.user_id, columns.basket_id, columns.item_id):
            if required not in header:
                raise ValidationError(f"missing required column {required!r} in {path}")
        has_ts = columns.timestamp in header
        has_order = columns.basket_order in header
        if has_ts == has_order:
            raise ValidationError(
                f"need exactly one of columns {columns.timestamp!r} or "
                f"{columns.basket_order!r} in {path}"
            )
        order_col = columns.timestamp if has_ts else columns.basket_order

        rows: list[tuple[str, str, object, str]] = []
        # (user, basket) -> (order value, first row number), to reject clashes
        basket_order_value: dict[tuple[str, str], tuple[object, int]] = {}
        for row_no, row in enumerate(reader, start=2):  # header is line 1
            user = (row.get(columns.user_id) or "").strip()
            basket = (row.get(columns.basket_id) or "").strip()
            item = (row.get(columns.item_id) or "").strip()
            raw_order = (row.get(order_col) or "").strip()
            if not user or not basket or not item or not raw_order:
                raise ValidationError(f"row {row_no}: missing field(s)")
            if has_ts:
                order_value: object = _parse_timestamp(raw_order, row_no)
            else:
                try:
                    order_value = int(raw_order)
                except ValueError:
                    raise ValidationError(
                        f"row {row_no}: basket_order must be an integer, got {raw_order!r}"
                    ) from None
                if order_value < 0:
                    raise ValidationError(f"row {row_no}: basket_order must be >= 0")
            key = (user, basket)
            seen = basket_order_value.get(key)
            if seen is None:
                basket_order_value[key] = (order_value, row_no)
            elif seen[0] != order_value:
                raise ValidationError(
                    f"row {row_no}: basket {basket!r} of user {user!r} has two "
                    f"order values (first at row {seen[1]})"
                )
            rows.append((user, basket, order_value, item))

    if not rows:
        raise ValidationError(f"no transaction rows in {path}")

    # Rank baskets per user by (order value, basket_id); mixed naive/aware
    # timestamps are not comparable and surface here as a validation error.
    per_user: dict[str, list[tuple[object, str]]] = {}
    for (user, basket), (order_value, _) in basket_order_value.items():
        per_user.setdefault(user, []).append((order_value, basket))
    rank: dict[tuple[str, str], int] = {}
    for user, entries in per_user.items():
        try:
            entries.sort()
        except TypeError as exc:
            raise ValidationError(f"user {user!r}: incomparable order values ({exc})") from None
        for pos, (_, basket) in enumerate(entries):
            rank[(user, basket)] = pos

    return [
        Transaction(user, basket, rank[(user, basket)], item)
        for user, basket, _, item in rows
    ]


def ingest(rows: Iterable[Transaction]) -> RawCorpus:
    """Group transactions into per-user basket timelines sorted by order.

    Duplicate items inside one basket collapse to a set.  A basket_id seen
    with two different basket_order values is rejected.
    """
    baskets: dict[tuple[str, str], set[str]] = {}
    orders: dict[tuple[str, str], int] = {}
    for row in rows:
        key = (row.user_id, row.basket_id)
        known = orders.get(key)
        if known is None:
            orders[key] = row.basket_order
            baskets[key] = set()
        elif known != row.basket_order:
            raise ValidationError(
                f"basket {row.basket_id!r} of user {row.user_id!r} has two "
                f"order values: {known} and {row.basket_order}"
            )
        baskets[key].add(row.item_id)

    timelines: dict[str, list[tuple[int, str]]] = {}
    for (user, basket), order in orders.items():
        timelines.setdefault(user, []).append((order, basket))

    out: RawCorpus = {}
    for user in sorted(timelines):
        # Order ties broken by basket_id for determinism.
        ordered = sorted(timelines[user])
        out[user] = [frozenset(baskets[(user, basket)]) for _, basket in ordered]
    return out


def preprocess(
    raw: Mapping[str, Sequence[Iterable[str]]],
    min_baskets: int = 3,
    min_item_users: int = 5,
    min_basket_size: int = 1,
) -> BasketCorpus:
    """Apply the filter cascade and build a dense-vocabulary corpus.

    Single pass, in order: drop items bought by fewer than `min_item_users`
    distinct users, then baskets smaller than `min_basket_size` (baskets
    emptied by the item filter always go), then users left with fewer than
    `min_baskets` baskets.  Not iterated to a fixpoint.
    """
    if min_baskets < 1:
        raise ValidationError("min_baskets must be >= 1")
    if min_item_users < 1 or min_basket_size < 1:
        raise ValidationError("min_item_users and min_basket_size must be >= 1")

    buyers: dict[str, set[str]] = {}
    for user, timeline in raw.items():
        for basket in timeline:
            for item in basket:
                buyers.setdefault(item, set()).add(user)
    kept_items = {item for item, users in buyers.items() if len(users) >= min_item_users}

    survivors: dict[str, list[frozenset[str]]] = {}
    for user in sorted(raw):
        timeline = []
        for basket in raw[user]:
            filtered = frozenset(basket) & kept_items
            if len(filtered) >= min_basket_size:
                timeline.append(filtered)
        if len(timeline) >= min_baskets:
            survivors[user] = timeline

    if not survivors:
        raise ValidationError("preprocessing removed every user; corpus is empty")

    # Vocabulary rebuilt dense over items actually present after filtering.
    present: set[str] = set()
    for timeline in survivors.values():
        for basket in timeline:
            present.update(basket)
    item_ids = tuple(sorted(present))
    index = {item: i for i, item in enumerate(item_ids)}

    users = tuple(
        UserRecord(
            user_id=user,
            history=tuple(
                tuple(sorted(index[item] for item in basket)) for basket in timeline
            ),
        )
        for user, timeline in survivors.items()
    )
    return BasketCorpus(item_ids=item_ids, users=users)


def split(corpus: BasketCorpus) -> BasketCorpus:
    """Make each user's chronologically last basket the test basket."""
    users = []
    for rec in corpus.users:
        if rec.test_basket is not None:
            raise ValidationError(f"user {rec.user_id!r} is already split")
        if len(rec.history) < 2:
            raise ValidationError(
                f"user {rec.user_id!r} has {len(rec.history)} basket(s); "
                "need at least 2 to split (preprocessing contract violated)"
            )
        users.append(
            UserRecord(
                user_id=rec.user_id,
                history=rec.history[:-1],
                test_basket=rec.history[-1],
            )
        )
    return BasketCorpus(item_ids=corpus.item_ids, users=tuple(users))


def corpus_stats(corpus: BasketCorpus) -> CorpusStats:
    """Exact corpus statistics; counts test baskets too on a split corpus."""
    if corpus.n_users == 0:
        raise ValidationError("empty corpus")
    sizes = [len(b) for u in corpus.users for b in u.baskets]
    n_baskets = len(sizes)
    return CorpusStats(
        users=corpus.n_users,
        items=corpus.n_items,
        baskets=n_baskets,
        avg_basket_size=sum(sizes) / n_baskets,
        baskets_per_user=n_baskets / corpus.n_users,
        min_basket_size=min(sizes),
        max_basket_size=max(sizes),
    )


def global_popularity(corpus: BasketCorpus) -> list[int]:
    """Item indices ranked by history-basket count, most popular first.

    Test baskets are excluded so downstream padding and popularity bins
    never leak evaluation data.  Ties break by ascending item index.
    """
    counts = [0] * corpus.n_items
    for rec in corpus.users:
        for basket in rec.history:
            for item in basket:
                counts[item] += 1
    return sorted(range(corpus.n_items), key=lambda i: (-counts[i], i))


def write_corpus(corpus: BasketCorpus, corpus_path: str | Path, vocab_path: str | Path) -> None:
    """Serialize as NDJSON (one user per line) plus a vocab.json mapping."""
    with Path(corpus_path).open("w", encoding="utf-8") as fh:
        for rec in corpus.users:
            line = {
                "user_id": rec.user_id,
                "history": [list(b) for b in rec.history],
                "test": list(rec.test_basket) if rec.test_basket is not None else None,
            }
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")
    with Path(vocab_path).open("w", encoding="utf-8") as fh:
        json.dump(corpus.vocab(), fh)


def read_corpus(corpus_path: str | Path, vocab_path: str | Path) -> BasketCorpus:
    """Inverse of write_corpus, with index-range validation."""
    with Path(vocab_path).open(encoding="utf-8") as fh:
        vocab: dict[str, int] = json.load(fh)
    n_items = len(vocab)
    if sorted(vocab.values()) != list(range(n_items)):
        raise ValidationError(f"{vocab_path}: vocabulary indices are not dense")
    item_ids = [""] * n_items
    for item, idx in vocab.items():
        item_ids[idx] = item

    users = []
    with Path(corpus_path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                user_id = obj["user_id"]
                history = obj["history"]
                test = obj.get("test")
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{corpus_path}:{line_no}: bad corpus line ({exc})") from None
            for basket in history + ([test] if test is not None else []):
                for idx in basket:
                    if not (0 <= idx < n_items):
                        raise ValidationError(
                            f"{corpus_path}:{line_no}: item index {idx} outside vocabulary"
                        )
            users.append(
                UserRecord(
                    user_id=user_id,
                    history=tuple(tuple(sorted(b)) for b in history),
                    test_basket=tuple(sorted(test)) if test is not None else None,
                )
            )
    if not users:
        raise ValidationError(f"{corpus_path}: no users")
    users.sort(key=lambda u: u.user_id)
    return BasketCorpus(item_ids=tuple(item_ids), users=tuple(users))


def transactions_to_corpus(
    rows: Iterable[Transaction],
    min_baskets: int = 3,
    min_item_users: int = 5,
    min_basket_size: int = 1,
) -> BasketCorpus:
    """ingest -> preprocess -> split in one call."""
    return split(
        preprocess(
            ingest(rows),
            min_baskets=min_baskets,
            min_item_users=min_item_users,
            min_basket_size=min_basket_size,
        )
    )
