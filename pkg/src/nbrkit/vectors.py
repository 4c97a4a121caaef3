"""Per-user item-frequency vectors and their time-decayed aggregates.

`pif_vector` counts, for every item, the number of history baskets that
contain it.  `decayed_user_vector` weights that count hierarchically:
history is cut into contiguous temporal groups, recent baskets outweigh
older ones inside a group, and recent groups outweigh older groups.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .corpus import Basket
from .errors import ValidationError


@dataclass(frozen=True)
class UserVector:
    """Sparse non-negative vector over the item vocabulary."""

    entries: dict[int, float]
    dim: int

    def __post_init__(self) -> None:
        for idx, value in self.entries.items():
            if not (0 <= idx < self.dim):
                raise ValueError(f"index {idx} outside dim {self.dim}")
            if value < 0:
                raise ValueError(f"negative entry at {idx}: {value}")

    def get(self, idx: int) -> float:
        return self.entries.get(idx, 0.0)

    def items(self) -> Iterator[tuple[int, float]]:
        return iter(sorted(self.entries.items()))


@dataclass(frozen=True)
class DecayParams:
    """within_decay shrinks older baskets inside a group, group_decay shrinks
    older groups, groups caps the number of temporal groups."""

    within_decay: float = 1.0
    group_decay: float = 1.0
    groups: int = 1

    def __post_init__(self) -> None:
        if not (0.0 < self.within_decay <= 1.0):
            raise ValidationError(f"within_decay must be in (0, 1], got {self.within_decay}")
        if not (0.0 < self.group_decay <= 1.0):
            raise ValidationError(f"group_decay must be in (0, 1], got {self.group_decay}")
        if self.groups < 1:
            raise ValidationError(f"groups must be >= 1, got {self.groups}")


def pif_vector(history: Sequence[Basket], dim: int) -> UserVector:
    """Count history baskets containing each item."""
    if not history:
        raise ValidationError("empty history")
    counts: dict[int, float] = {}
    for basket in history:
        for item in basket:
            counts[item] = counts.get(item, 0.0) + 1.0
    return UserVector(entries=counts, dim=dim)


def partition_history(n_baskets: int, groups: int) -> list[tuple[int, int]]:
    """Contiguous [start, end) group bounds, oldest group first.

    Groups are filled from the most recent basket backwards with
    ceil(n/groups') baskets each, groups' = min(groups, n); only the oldest
    group may be partial.  When the backward fill exhausts the baskets
    early (ceil(n/groups') * (groups' - 1) >= n), the result simply has
    fewer, never empty, groups.
    """
    m = min(groups, n_baskets)
    size = math.ceil(n_baskets / m)
    bounds = []
    end = n_baskets
    while end > 0:
        start = max(0, end - size)
        bounds.append((start, end))
        end = start
    bounds.reverse()
    return bounds


def decayed_user_vector(history: Sequence[Basket], params: DecayParams, dim: int) -> UserVector:
    """Hierarchically time-decayed user vector.

    Within group j of size L (positions p = 1..L, oldest first) a basket
    weighs within_decay^(L-p); the group vector is the weighted multi-hot
    sum divided by L.  Group j of m' (oldest first) weighs
    group_decay^(m'-j); the user vector is the weighted group sum divided
    by m'.  Every entry therefore lies in [0, 1].
    """
    if not history:
        raise ValidationError("empty history")
    bounds = partition_history(len(history), params.groups)
    m = len(bounds)
    out: dict[int, float] = {}
    for j, (start, end) in enumerate(bounds, start=1):
        group = history[start:end]
        size = end - start
        group_weight = params.group_decay ** (m - j)
        vec: dict[int, float] = {}
        for p, basket in enumerate(group, start=1):
            w = params.within_decay ** (size - p)
            for item in basket:
                vec[item] = vec.get(item, 0.0) + w
        scale = group_weight / size
        for item, value in vec.items():
            out[item] = out.get(item, 0.0) + value * scale
    for item in out:
        out[item] /= m
    return UserVector(entries=out, dim=dim)


def write_vectors(vectors: dict[str, UserVector], path: str | Path) -> None:
    """NDJSON export: one `{"user_id", "dim", "entries"}` object per line.

    Entries are sorted by index; float repr keeps full round-trip precision
    (well above the 9 significant digits the interchange requires).
    """
    with Path(path).open("w", encoding="utf-8") as fh:
        for user_id in sorted(vectors):
            vec = vectors[user_id]
            line = {
                "user_id": user_id,
                "dim": vec.dim,
                "entries": [[idx, value] for idx, value in vec.items()],
            }
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")


def read_vectors(path: str | Path) -> dict[str, UserVector]:
    """Inverse of write_vectors."""
    out: dict[str, UserVector] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                user_id = obj["user_id"]
                dim = int(obj["dim"])
                entries = {int(i): float(v) for i, v in obj["entries"]}
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{line_no}: bad vector line ({exc})") from None
            if user_id in out:
                raise ValidationError(f"{path}:{line_no}: duplicate user_id {user_id!r}")
            out[user_id] = UserVector(entries=entries, dim=dim)
    if not out:
        raise ValidationError(f"{path}: no vectors")
    return out
