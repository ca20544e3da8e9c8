"""Sliding-window segments over a multivariate time series.

A segment at time ``t`` is the concatenation of the ``window``
consecutive m-vectors ending at row ``t``, flattened time-major into a
single vector of dimension ``m * window``.  Segments are addressed by
the time index of their last row, so valid indices run from
``window - 1`` to ``T - 1`` (stepping by ``stride``).  A segment's
label is the series label at its last row.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import TimeSeries

QUERY_MODES = ("all-with-label", "random-n", "random-n-excluding-label")


@dataclass
class SegmentStore:
    """Immutable sliding-window view over a :class:`TimeSeries`.

    Segment vectors are materialized lazily: individual lookups slice
    the underlying series, and :meth:`matrix` builds (and caches) the
    full segment matrix for hot loops.
    """

    source: TimeSeries
    window: int
    stride: int = 1

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.window > self.source.n_steps:
            raise ValueError(
                f"window {self.window} exceeds series length {self.source.n_steps}"
            )
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        self._matrix = None

    @property
    def times(self) -> np.ndarray:
        """Valid segment time indices (index of each window's last row)."""
        return np.arange(self.window - 1, self.source.n_steps, self.stride)

    @property
    def n_segments(self) -> int:
        return (self.source.n_steps - self.window) // self.stride + 1

    @property
    def dim(self) -> int:
        return self.source.n_sensors * self.window

    @property
    def n_sensors(self) -> int:
        return self.source.n_sensors

    @property
    def has_labels(self) -> bool:
        return self.source.labels is not None

    def _check_time(self, t: int) -> None:
        first = self.window - 1
        if t < first or t >= self.source.n_steps or (t - first) % self.stride != 0:
            raise IndexError(f"no segment at time {t} (window {self.window}, stride {self.stride})")

    def position(self, t: int) -> int:
        """Ordinal position of segment time ``t`` in :meth:`times`."""
        self._check_time(int(t))
        return (int(t) - (self.window - 1)) // self.stride

    def vector(self, t: int) -> np.ndarray:
        """The m*window segment vector ending at row ``t`` (time-major)."""
        self._check_time(int(t))
        return self.source.values[t - self.window + 1: t + 1].reshape(-1).copy()

    def label(self, t: int) -> int:
        """Class id of the segment at ``t``: the label of its last row."""
        if self.source.labels is None:
            raise ValueError("series has no labels")
        self._check_time(int(t))
        return int(self.source.labels[t])

    def labels(self) -> np.ndarray:
        """Labels for all segments, aligned with :meth:`times`."""
        if self.source.labels is None:
            raise ValueError("series has no labels")
        return self.source.labels[self.times]

    def matrix(self) -> np.ndarray:
        """All segment vectors as an (n_segments, dim) array, cached."""
        if self._matrix is None:
            win = np.lib.stride_tricks.sliding_window_view(
                self.source.values, self.window, axis=0)
            # (N_all, m, window) -> (N_all, window, m) -> flatten time-major
            full = win.transpose(0, 2, 1).reshape(-1, self.dim)
            self._matrix = np.ascontiguousarray(full[::self.stride])
        return self._matrix


def build_segments(ts: TimeSeries, window: int, stride: int = 1) -> SegmentStore:
    """Create the sliding-window store for a series."""
    return SegmentStore(ts, window, stride)


def segment_vector(store: SegmentStore, t: int) -> np.ndarray:
    return store.vector(t)


def segment_label(store: SegmentStore, t: int) -> int:
    return store.label(t)


def overlaps(t1: int, t2: int, window: int) -> bool:
    """True iff the windows ending at ``t1`` and ``t2`` share a time step."""
    return abs(int(t1) - int(t2)) <= window - 1


@dataclass(frozen=True)
class QuerySpec:
    """How to pick query segments from a store.

    ``all-with-label`` returns every segment carrying ``label`` in time
    order.  ``random-n`` samples ``n`` segments uniformly without
    replacement.  ``random-n-excluding-label`` does the same after
    removing segments carrying ``label``.
    """

    mode: str
    label: int | None = None
    n: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in QUERY_MODES:
            raise ValueError(f"unknown query mode {self.mode!r}; expected one of {QUERY_MODES}")
        if self.mode == "all-with-label" and self.label is None:
            raise ValueError("all-with-label mode requires a label")
        if self.mode.startswith("random") and (self.n is None or self.n < 1):
            raise ValueError(f"{self.mode} mode requires a positive n")
        if self.mode == "random-n-excluding-label" and self.label is None:
            raise ValueError("random-n-excluding-label mode requires a label")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "label": self.label, "n": self.n, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "QuerySpec":
        return cls(d["mode"], d.get("label"), d.get("n"), d.get("seed", 0))


def select_queries(store: SegmentStore, spec: QuerySpec) -> np.ndarray:
    """Pick query segment time indices per a :class:`QuerySpec`.

    Random modes sample without replacement with a generator seeded
    from ``spec.seed``, so the same spec always yields the same set.
    Returned indices are ascending.
    """
    times = store.times
    if spec.mode == "all-with-label":
        return times[store.labels() == spec.label]
    eligible = times
    if spec.mode == "random-n-excluding-label":
        eligible = times[store.labels() != spec.label]
    if spec.n > eligible.size:
        raise ValueError(f"requested {spec.n} queries but only {eligible.size} are eligible")
    rng = np.random.default_rng(spec.seed)
    picked = rng.choice(eligible, size=spec.n, replace=False)
    return np.sort(picked)


def save_queries(indices, path: str | Path) -> None:
    """Persist query time indices, one per line."""
    Path(path).write_text("".join(f"{int(t)}\n" for t in indices))


def load_queries(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text().split()
    return np.asarray([int(s) for s in lines], dtype=np.int64)
