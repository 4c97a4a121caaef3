"""Brute-force Euclidean k-nearest-neighbor search over user vectors.

Distances use the sparse identity ||a-b||^2 = ||a||^2 + ||b||^2 - 2 a.b
with precomputed norms; the Gram matrix is evaluated in row chunks so the
full pairwise matrix is never materialized.  The index is immutable after
build and safe for concurrent queries.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .vectors import UserVector

_CHUNK_ROWS = 512


def vectors_to_csr(vectors: Mapping[str, UserVector]) -> tuple[list[str], sp.csr_matrix]:
    """CSR matrix with one row per user, rows ordered by user_id."""
    if not vectors:
        raise ValidationError("no vectors to index")
    user_ids = sorted(vectors)
    dims = {vectors[u].dim for u in user_ids}
    if len(dims) != 1:
        raise ValidationError(f"vectors disagree on dimension: {sorted(dims)}")
    dim = dims.pop()

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for user in user_ids:
        for idx, value in vectors[user].items():
            indices.append(idx)
            data.append(value)
        indptr.append(len(indices))
    matrix = sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), indptr),
        shape=(len(user_ids), dim),
    )
    return user_ids, matrix


class KnnIndex:
    """Immutable brute-force index; user_id ties resolve lexicographically.

    Rows are stored in ascending user_id order, so tie-breaking on distance
    reduces to tie-breaking on row index.
    """

    def __init__(self, user_ids: Sequence[str], matrix: sp.csr_matrix):
        self.user_ids: tuple[str, ...] = tuple(user_ids)
        self._matrix = matrix.tocsr()
        self._matrix.sort_indices()
        self._transpose = self._matrix.T.tocsr()
        self._norms_sq = np.asarray(self._matrix.multiply(self._matrix).sum(axis=1)).ravel()
        self._row_of = {u: i for i, u in enumerate(self.user_ids)}

    @classmethod
    def build(cls, vectors: Mapping[str, UserVector]) -> "KnnIndex":
        user_ids, matrix = vectors_to_csr(vectors)
        return cls(user_ids, matrix)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def matrix(self) -> sp.csr_matrix:
        """The indexed vectors, one row per user in user_id order."""
        return self._matrix

    def row_entries(self, row: int) -> tuple[np.ndarray, np.ndarray]:
        """(indices, values) of one stored vector row."""
        start, end = self._matrix.indptr[row], self._matrix.indptr[row + 1]
        return self._matrix.indices[start:end], self._matrix.data[start:end]

    def row_of(self, user_id: str) -> int:
        row = self._row_of.get(user_id)
        if row is None:
            raise ValidationError(f"unknown user_id: {user_id!r}")
        return row

    def _distance_sq_rows(self, rows: np.ndarray) -> np.ndarray:
        """Dense (len(rows) x n_users) squared-distance block."""
        gram = (self._matrix[rows] @ self._transpose).toarray()
        d2 = self._norms_sq[rows][:, None] + self._norms_sq[None, :] - 2.0 * gram
        np.maximum(d2, 0.0, out=d2)
        return d2

    def _select(self, d2_row: np.ndarray, self_row: int, k: int) -> np.ndarray:
        """Row indices of the k nearest candidates, self excluded.

        Ascending distance, exact distance ties broken by row index; returns
        all candidates when fewer than k exist.
        """
        d2_row = d2_row.copy()
        d2_row[self_row] = np.inf
        n_candidates = len(d2_row) - 1
        take = min(k, n_candidates)
        if take <= 0:
            return np.empty(0, dtype=np.int64)
        if take < n_candidates:
            kth = np.partition(d2_row, take - 1)[take - 1]
            candidates = np.flatnonzero(d2_row <= kth)
        else:
            candidates = np.flatnonzero(np.isfinite(d2_row))
        order = np.lexsort((candidates, d2_row[candidates]))
        return candidates[order[:take]]

    def query(self, target: str, k: int) -> list[tuple[str, float]]:
        """The k nearest users to `target`, as (user_id, distance) ascending."""
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        row = self.row_of(target)
        d2 = self._distance_sq_rows(np.asarray([row]))[0]
        picked = self._select(d2, row, k)
        return [(self.user_ids[i], float(np.sqrt(d2[i]))) for i in picked]

    def neighbors_batch(
        self,
        k: int,
        targets: Sequence[str] | None = None,
        threads: int = 1,
    ) -> list[np.ndarray]:
        """Neighbor row indices for many targets (index rows, not distances).

        Deterministic regardless of `threads`; chunk results land by
        position.
        """
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        if targets is None:
            rows = np.arange(self.n_users)
        else:
            rows = np.asarray([self.row_of(t) for t in targets])
        out: list[np.ndarray | None] = [None] * len(rows)

        def work(start: int) -> None:
            chunk = rows[start : start + _CHUNK_ROWS]
            d2 = self._distance_sq_rows(chunk)
            for offset, row in enumerate(chunk):
                out[start + offset] = self._select(d2[offset], int(row), k)

        starts = range(0, len(rows), _CHUNK_ROWS)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, starts))
        else:
            for start in starts:
                work(start)
        assert all(chunk is not None for chunk in out)
        return out  # type: ignore[return-value]
