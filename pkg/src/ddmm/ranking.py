"""Top-k ranking shared by every retriever.

All retrievers produce a :class:`RankedResult`: the k archive segments
with the smallest distances to the query, after excluding every segment
whose window overlaps the query window.  Ties are broken by ascending
time index so rankings are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RankedResult:
    """Ordered retrieval hits for one query."""

    query_index: int
    indices: np.ndarray    # segment time indices, best first
    distances: np.ndarray  # non-decreasing

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "distances", np.asarray(self.distances, dtype=np.float64))
        if self.indices.shape != self.distances.shape:
            raise ValueError("indices and distances must align")

    def __len__(self) -> int:
        return self.indices.size

    @property
    def hits(self) -> list[tuple[int, float]]:
        return [(int(t), float(d)) for t, d in zip(self.indices, self.distances)]

    def top(self, k: int) -> "RankedResult":
        if k > len(self):
            raise ValueError(f"k={k} exceeds hit count {len(self)}")
        return RankedResult(self.query_index, self.indices[:k], self.distances[:k])


def eligible_mask(times: np.ndarray, query_index: int, window: int) -> np.ndarray:
    """Segments whose windows do not overlap the query window."""
    return np.abs(times - int(query_index)) >= window


def rank_candidates(times: np.ndarray, distances: np.ndarray, query_index: int,
                    window: int, k: int) -> RankedResult:
    """Top-k by ascending distance among non-overlapping segments.

    ``times`` and ``distances`` cover the whole archive; overlap
    exclusion happens here so retrievers only supply raw distances.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    keep = eligible_mask(times, query_index, window)
    n_eligible = int(keep.sum())
    if n_eligible < k:
        raise ValueError(f"only {n_eligible} eligible segments for k={k}")
    t = times[keep]
    d = distances[keep]
    order = np.lexsort((t, d))[:k]
    return RankedResult(int(query_index), t[order], d[order])
