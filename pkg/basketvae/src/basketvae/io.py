"""Interchange-file access: sparse user vectors, corpus lines, predictions.

This package talks to the recommendation toolkit exclusively through its
NDJSON/CSV file formats, so the readers and writers here are self-contained
on purpose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InterchangeError(ValueError):
    """Malformed interchange file."""


@dataclass
class SparseVectors:
    """Rows in user_id order, kept sparse until batched."""

    user_ids: list[str]
    dim: int
    indices: list[np.ndarray]  # per-user item indices
    values: list[np.ndarray]  # matching values

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    def densify(self, rows: np.ndarray) -> np.ndarray:
        out = np.zeros((len(rows), self.dim), dtype=np.float32)
        for i, row in enumerate(rows):
            out[i, self.indices[row]] = self.values[row]
        return out


def read_vectors(path: str | Path) -> SparseVectors:
    """Read the `{"user_id", "dim", "entries"}` NDJSON export."""
    user_ids: list[str] = []
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    dims = set()
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                user_ids.append(str(obj["user_id"]))
                dims.add(int(obj["dim"]))
                entries = obj["entries"]
                indices.append(np.asarray([int(i) for i, _ in entries], dtype=np.int64))
                values.append(np.asarray([float(v) for _, v in entries], dtype=np.float32))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InterchangeError(f"{path}:{line_no}: bad vector line ({exc})") from None
    if not user_ids:
        raise InterchangeError(f"{path}: no vectors")
    if len(dims) != 1:
        raise InterchangeError(f"{path}: vectors disagree on dim: {sorted(dims)}")
    order = np.argsort(np.asarray(user_ids))
    return SparseVectors(
        user_ids=[user_ids[i] for i in order],
        dim=dims.pop(),
        indices=[indices[i] for i in order],
        values=[values[i] for i in order],
    )


@dataclass
class CorpusLine:
    user_id: str
    history: list[list[int]]
    test: list[int] | None


def read_corpus_lines(path: str | Path) -> list[CorpusLine]:
    """Read the one-user-per-line corpus NDJSON."""
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(
                    CorpusLine(
                        user_id=str(obj["user_id"]),
                        history=[[int(i) for i in b] for b in obj["history"]],
                        test=[int(i) for i in obj["test"]] if obj.get("test") is not None else None,
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InterchangeError(f"{path}:{line_no}: bad corpus line ({exc})") from None
    if not out:
        raise InterchangeError(f"{path}: no users")
    out.sort(key=lambda rec: rec.user_id)
    return out


def write_predictions(
    items_by_user: dict[str, list[int]], path: str | Path, model_tag: str = "vae"
) -> None:
    """Emit the predictions NDJSON the primary `evaluate` command consumes."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for user_id in sorted(items_by_user):
            line = {"user_id": user_id, "items": list(items_by_user[user_id]), "model": model_tag}
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")


def write_latents(latents: dict[str, np.ndarray], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for user_id in sorted(latents):
            line = {"user_id": user_id, "z": [float(v) for v in latents[user_id]]}
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")


def read_latents(path: str | Path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[str(obj["user_id"])] = np.asarray(obj["z"], dtype=np.float32)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InterchangeError(f"{path}:{line_no}: bad latent line ({exc})") from None
    if not out:
        raise InterchangeError(f"{path}: no latents")
    return out


def write_loss_curve(rows: list[tuple[int, float, float, float]], path: str | Path) -> None:
    """CSV `epoch,recon,kl,total`."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("epoch,recon,kl,total\n")
        for epoch, recon, kl, total in rows:
            fh.write(f"{epoch},{recon!r},{kl!r},{total!r}\n")
