"""DDMM: distance learning on segment difference vectors.

The autoencoder is trained on differences between randomly paired
segments, each pair weighted by 1 / (d^2 + delta) where d is the
Euclidean distance within the pair, so near-identical pairs dominate
the loss.  At retrieval time the squared reconstruction error of the
query-archive difference vector is the distance: well-learned (small,
familiar) differences reconstruct accurately and rank first.

Because every network layer ends in a sigmoid, raw signed differences
in [-1, 1] cannot be reproduced at the output.  The default
``affine-01`` mode maps differences through (d + 1) / 2 for both
training and retrieval; ``raw`` mode feeds them unchanged for a literal
reading.  Pair weights always use the unrescaled Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import NormalizationParams, minmax_scale, apply_minmax
from .neuralnet import (AdamState, MlpAutoencoder, TrainConfig, init_autoencoder,
                        pack_models, train_pair_step, train_step, unpack_models,
                        weighted_mse_loss)
from .ranking import RankedResult, rank_candidates
from .segment import SegmentStore

DDMM_RATIOS = (1.0, 0.75, 0.5, 0.75, 1.0)
RESCALE_MODES = ("affine-01", "raw")

# Slack for float roundoff when validating the affine-01 input range.
_RANGE_TOL = 1e-9


def difference_vector(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Componentwise a - b between two equally sized segment vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a - b


def pair_weight(distance, delta):
    """Training weight 1 / (distance^2 + delta); grows as pairs get closer."""
    distance = np.asarray(distance, dtype=np.float64)
    return 1.0 / (distance * distance + delta)


def rescale(d: np.ndarray, mode: str) -> np.ndarray:
    """Map a difference vector into the autoencoder's input range.

    ``affine-01`` sends [-1, 1] to [0, 1] via (d + 1) / 2 and rejects
    components outside [-1, 1]; ``raw`` is the identity.
    """
    if mode == "raw":
        return np.asarray(d, dtype=np.float64)
    if mode != "affine-01":
        raise ValueError(f"unknown rescale mode {mode!r}; expected one of {RESCALE_MODES}")
    d = np.asarray(d, dtype=np.float64)
    if d.size and (d.min() < -1.0 - _RANGE_TOL or d.max() > 1.0 + _RANGE_TOL):
        raise ValueError("difference component outside [-1, 1]; normalize the series first")
    return np.clip((d + 1.0) / 2.0, 0.0, 1.0)


def inverse_rescale(r: np.ndarray, mode: str) -> np.ndarray:
    if mode == "raw":
        return np.asarray(r, dtype=np.float64)
    if mode != "affine-01":
        raise ValueError(f"unknown rescale mode {mode!r}; expected one of {RESCALE_MODES}")
    return 2.0 * np.asarray(r, dtype=np.float64) - 1.0


@dataclass(frozen=True)
class PairBatch:
    """Matched anchor and positive segment vectors (S rows each)."""

    anchors: np.ndarray
    positives: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=np.float64)
        b = np.asarray(self.positives, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 2:
            raise ValueError(f"anchor/positive shape mismatch {a.shape} vs {b.shape}")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "positives", b)

    @property
    def size(self) -> int:
        return self.anchors.shape[0]


def epoch_pair_indices(n_segments: int, rng: np.random.Generator):
    """One epoch's pair plan: a shuffled disjoint pairing of all segments.

    Returns (anchor_positions, positive_positions), each of length
    floor(n/2); every segment appears in at most one pair per epoch.
    """
    perm = rng.permutation(n_segments)
    half = n_segments // 2
    return perm[:half], perm[half:2 * half]


def sample_pairs(store, batch_size: int, rng: np.random.Generator,
                 strategy: str = "shuffle") -> PairBatch:
    """Draw one batch of anchor/positive pairs from a store.

    ``shuffle`` takes the first batch of a fresh epoch plan (disjoint
    pairs); ``random`` samples positions independently and uniformly.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    n = store.n_segments
    if n < 2:
        raise ValueError("need at least 2 segments to form pairs")
    x = store.matrix()
    if strategy == "shuffle":
        a_pos, b_pos = epoch_pair_indices(n, rng)
        a_pos, b_pos = a_pos[:batch_size], b_pos[:batch_size]
    elif strategy == "random":
        a_pos = rng.integers(0, n, size=batch_size)
        b_pos = rng.integers(0, n, size=batch_size)
    else:
        raise ValueError(f"unknown pair strategy {strategy!r}")
    return PairBatch(x[a_pos], x[b_pos])


@dataclass
class EmbeddingStore:
    """Segment embeddings presented with the segment-store interface.

    Rows of ``vectors`` align with ``times``; ``window`` is carried from
    the source store so overlap exclusion still works on the original
    time axis.
    """

    times: np.ndarray
    vectors: np.ndarray
    window: int
    n_sensors: int
    segment_labels: np.ndarray | None = None

    @property
    def n_segments(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.segment_labels is not None

    def matrix(self) -> np.ndarray:
        return self.vectors

    def position(self, t: int) -> int:
        pos = int(np.searchsorted(self.times, int(t)))
        if pos >= self.times.size or self.times[pos] != int(t):
            raise IndexError(f"no segment at time {t}")
        return pos

    def vector(self, t: int) -> np.ndarray:
        return self.vectors[self.position(t)].copy()

    def label(self, t: int) -> int:
        if self.segment_labels is None:
            raise ValueError("store has no labels")
        return int(self.segment_labels[self.position(t)])

    def labels(self) -> np.ndarray:
        if self.segment_labels is None:
            raise ValueError("store has no labels")
        return self.segment_labels


@dataclass
class TrainingHistory:
    """Per-epoch mean training loss and validation loss (NaN when unused)."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def rows(self):
        return [(e, tr, va) for e, (tr, va) in
                enumerate(zip(self.train_loss, self.val_loss), start=1)]


@dataclass
class DdmmModel:
    """Trained difference autoencoder plus everything retrieval needs."""

    net: MlpAutoencoder
    delta: float
    rescale_mode: str
    input_space: str              # "segment" or "embedding"
    window: int
    n_sensors: int
    normalization: NormalizationParams | None = None
    front_end: "object | None" = None          # AeEmbedder for embedding space
    embed_norm: NormalizationParams | None = None
    history: TrainingHistory | None = None
    train_seed: int | None = None

    def __post_init__(self):
        if self.rescale_mode not in RESCALE_MODES:
            raise ValueError(f"unknown rescale mode {self.rescale_mode!r}")
        if self.input_space not in ("segment", "embedding"):
            raise ValueError(f"unknown input space {self.input_space!r}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.input_space == "embedding" and self.front_end is None:
            raise ValueError("embedding-space model requires a front-end embedder")

    def project(self, vectors: np.ndarray) -> np.ndarray:
        """Map raw segment vectors into the model's input space."""
        v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if self.input_space == "embedding":
            v = self.front_end.embed(v)
            if self.embed_norm is not None:
                v = apply_minmax(v, self.embed_norm)
        if v.shape[1] != self.net.input_dim:
            raise ValueError(f"vector dim {v.shape[1]} does not match "
                             f"model input dim {self.net.input_dim}")
        return v

    def distances(self, query: np.ndarray, archive: np.ndarray) -> np.ndarray:
        """DDM of one projected query against projected archive rows."""
        diff = query[None, :] - archive
        r = rescale(diff, self.rescale_mode)
        y = self.net.forward_batch(r)
        return np.sum((y - r) ** 2, axis=1)

    def save(self, path) -> None:
        from pathlib import Path
        Path(path).write_bytes(self.to_bytes())

    def to_bytes(self) -> bytes:
        meta = {
            "type": "ddmm",
            "delta": self.delta,
            "rescale_mode": self.rescale_mode,
            "input_space": self.input_space,
            "window": self.window,
            "n_sensors": self.n_sensors,
            "normalization": self.normalization.to_dict() if self.normalization else None,
            "embed_norm": self.embed_norm.to_dict() if self.embed_norm else None,
            "train_seed": self.train_seed,
        }
        nets = [("autoencoder", self.net)]
        if self.front_end is not None:
            nets.append(("front_end", self.front_end.net))
        return pack_models(nets, meta)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DdmmModel":
        from .baselines import AeEmbedder
        networks, meta = unpack_models(data)
        if meta.get("type") != "ddmm":
            raise ValueError(f"not a ddmm model file (type={meta.get('type')!r})")
        front = None
        if "front_end" in networks:
            front = AeEmbedder(networks["front_end"])
        norm = meta.get("normalization")
        enorm = meta.get("embed_norm")
        return cls(net=networks["autoencoder"], delta=meta["delta"],
                   rescale_mode=meta["rescale_mode"], input_space=meta["input_space"],
                   window=meta["window"], n_sensors=meta["n_sensors"],
                   normalization=NormalizationParams.from_dict(norm) if norm else None,
                   front_end=front,
                   embed_norm=NormalizationParams.from_dict(enorm) if enorm else None,
                   train_seed=meta.get("train_seed"))

    @classmethod
    def load(cls, path) -> "DdmmModel":
        from pathlib import Path
        return cls.from_bytes(Path(path).read_bytes())


def ddm_distance(model: DdmmModel, q: np.ndarray, w: np.ndarray) -> float:
    """Squared reconstruction error of the rescaled difference q - w."""
    q = np.asarray(q, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if q.shape != w.shape:
        raise ValueError(f"dimension mismatch {q.shape} vs {w.shape}")
    pq = model.project(q)[0]
    pw = model.project(w)[0]
    r = rescale(pq - pw, model.rescale_mode)
    y = model.net.forward(r)
    return float(np.sum((y - r) ** 2))


@dataclass
class PreparedArchive:
    """Archive segments projected once so many queries can reuse them."""

    times: np.ndarray
    projected: np.ndarray
    window: int


def prepare_archive(model: DdmmModel, store) -> PreparedArchive:
    return PreparedArchive(times=store.times, projected=model.project(store.matrix()),
                           window=store.window)


def retrieve_prepared(model: DdmmModel, prep: PreparedArchive, store,
                      q_index: int, k: int) -> RankedResult:
    q = model.project(store.vector(q_index))[0]
    dists = model.distances(q, prep.projected)
    return rank_candidates(prep.times, dists, q_index, prep.window, k)


def retrieve(model: DdmmModel, store, q_index: int, k: int) -> RankedResult:
    """Top-k most similar non-overlapping segments by DDM distance."""
    return retrieve_prepared(model, prepare_archive(model, store), store, q_index, k)


def _epoch_batches(x: np.ndarray, config: TrainConfig, rng: np.random.Generator):
    """Yield (anchor, positive, weight) batches for one epoch.

    The shuffle strategy pairs all segments disjointly, reserves the
    trailing validation_fraction of pairs for the validation loss and
    cuts the rest into minibatches.  Returns the validation pair
    positions alongside the batch iterator.
    """
    n = x.shape[0]
    if config.pair_strategy == "random":
        if config.iterations is None:
            iterations = max(1, -(-(n // 2) // config.batch_size))
        else:
            iterations = config.iterations
        batches = []
        for _ in range(iterations):
            a = rng.integers(0, n, size=config.batch_size)
            b = rng.integers(0, n, size=config.batch_size)
            batches.append((a, b))
        return batches, None
    a_pos, b_pos = epoch_pair_indices(n, rng)
    n_pairs = a_pos.size
    n_val = min(int(round(config.validation_fraction * n_pairs)), n_pairs - 1)
    n_train = n_pairs - n_val
    val = (a_pos[n_train:], b_pos[n_train:]) if n_val else None
    size = config.batch_size
    if config.iterations is None:
        # One pass over the epoch's training pairs; final batch may be partial.
        n_batches = max(1, -(-n_train // size))
        batches = [(a_pos[i * size:(i + 1) * size], b_pos[i * size:(i + 1) * size])
                   for i in range(n_batches)]
    else:
        # Explicit iteration count cycles over the epoch's pair plan.
        batches = []
        for i in range(config.iterations):
            sel = (i * size + np.arange(min(size, n_train))) % n_train
            batches.append((a_pos[sel], b_pos[sel]))
    return batches, val


def _difference_batch(x, a_pos, b_pos, delta, mode):
    diff = x[a_pos] - x[b_pos]
    dist = np.linalg.norm(diff, axis=1)
    weights = pair_weight(dist, delta)
    return rescale(diff, mode), weights


def train_ddmm(store, config: TrainConfig, ratios=DDMM_RATIOS,
               rescale_mode: str = "affine-01",
               normalization: NormalizationParams | None = None) -> DdmmModel:
    """Train the difference autoencoder over a segment (or embedding) store.

    Per epoch the pair plan is consumed batch by batch: difference
    vectors are formed, rescaled, weighted by the unrescaled pair
    distance and pushed through one Adam step each.  With epochs=0 the
    returned model is the seeded initialization, untrained.
    """
    if store.n_segments < 2:
        raise ValueError("need at least 2 segments to train")
    x = store.matrix()
    ss = np.random.SeedSequence(config.seed)
    seed_init, seed_pairs = ss.spawn(2)
    net = init_autoencoder(store.dim, ratios, seed_init)
    adam = AdamState.for_model(net, lr=config.lr)
    rng = np.random.default_rng(seed_pairs)
    history = TrainingHistory()
    for _epoch in range(config.epochs):
        batches, val = _epoch_batches(x, config, rng)
        losses = []
        for a_pos, b_pos in batches:
            batch, weights = _difference_batch(x, a_pos, b_pos, config.delta, rescale_mode)
            losses.append(train_step(net, adam, batch, weights))
        history.train_loss.append(float(np.mean(losses)))
        if val is not None and val[0].size:
            vbatch, vweights = _difference_batch(x, val[0], val[1], config.delta, rescale_mode)
            history.val_loss.append(weighted_mse_loss(net, vbatch, vweights))
        else:
            history.val_loss.append(float("nan"))
    return DdmmModel(net=net, delta=config.delta, rescale_mode=rescale_mode,
                     input_space="segment", window=store.window,
                     n_sensors=store.n_sensors, normalization=normalization,
                     history=history, train_seed=config.seed)


def train_ae_ddmm(store: SegmentStore, ae_config: TrainConfig,
                  ddmm_config: TrainConfig | None = None,
                  ratios=DDMM_RATIOS, ae_ratios=(1.0, 0.5, 1.0),
                  rescale_mode: str = "affine-01",
                  normalization: NormalizationParams | None = None) -> DdmmModel:
    """Combined model: DDMM over the embeddings of a plain autoencoder.

    Trains the reconstruction baseline first, embeds every segment with
    its middle layer, min-max normalizes the embeddings per dimension,
    then trains DDMM in that space.  The returned model carries the
    front-end so queries are embedded the same way at retrieval time.
    """
    from .baselines import train_ae_baseline
    if ddmm_config is None:
        ddmm_config = ae_config
    embedder = train_ae_baseline(store, ae_config, ratios=ae_ratios)
    emb = embedder.embed(store.matrix())
    emb01, params = minmax_scale(emb)
    estore = EmbeddingStore(times=store.times, vectors=emb01, window=store.window,
                            n_sensors=store.n_sensors,
                            segment_labels=store.labels() if store.has_labels else None)
    model = train_ddmm(estore, ddmm_config, ratios=ratios, rescale_mode=rescale_mode,
                       normalization=normalization)
    model.input_space = "embedding"
    model.front_end = embedder
    model.embed_norm = params
    return model


@dataclass
class ComparisonModel:
    """Encoder trained to shrink distances within weighted pairs.

    Shares DDMM's architecture and pair weighting but learns features
    of the pair members themselves; its distance is the squared
    Euclidean distance between encoded vectors, which is symmetric and
    exactly zero on identical inputs.
    """

    net: MlpAutoencoder
    delta: float
    window: int
    n_sensors: int
    history: TrainingHistory | None = None
    train_seed: int | None = None

    def encode(self, vectors: np.ndarray) -> np.ndarray:
        return self.net.forward_batch(np.atleast_2d(np.asarray(vectors, dtype=np.float64)))

    def save(self, path) -> None:
        from pathlib import Path
        meta = {"type": "comparison", "delta": self.delta, "window": self.window,
                "n_sensors": self.n_sensors, "train_seed": self.train_seed}
        Path(path).write_bytes(pack_models([("encoder", self.net)], meta))

    @classmethod
    def load(cls, path) -> "ComparisonModel":
        from pathlib import Path
        networks, meta = unpack_models(Path(path).read_bytes())
        if meta.get("type") != "comparison":
            raise ValueError(f"not a comparison model file (type={meta.get('type')!r})")
        return cls(net=networks["encoder"], delta=meta["delta"], window=meta["window"],
                   n_sensors=meta["n_sensors"], train_seed=meta.get("train_seed"))


def train_comparison_model(store, config: TrainConfig,
                           ratios=DDMM_RATIOS) -> ComparisonModel:
    """Train the encoded-pair ablation with DDMM's pair plan and weights."""
    if store.n_segments < 2:
        raise ValueError("need at least 2 segments to train")
    x = store.matrix()
    ss = np.random.SeedSequence(config.seed)
    seed_init, seed_pairs = ss.spawn(2)
    net = init_autoencoder(store.dim, ratios, seed_init)
    adam = AdamState.for_model(net, lr=config.lr)
    rng = np.random.default_rng(seed_pairs)
    history = TrainingHistory()
    for _epoch in range(config.epochs):
        batches, val = _epoch_batches(x, config, rng)
        losses = []
        for a_pos, b_pos in batches:
            dist = np.linalg.norm(x[a_pos] - x[b_pos], axis=1)
            weights = pair_weight(dist, config.delta)
            losses.append(train_pair_step(net, adam, x[a_pos], x[b_pos], weights))
        history.train_loss.append(float(np.mean(losses)))
        if val is not None and val[0].size:
            fa = net.forward_batch(x[val[0]])
            fb = net.forward_batch(x[val[1]])
            vw = pair_weight(np.linalg.norm(x[val[0]] - x[val[1]], axis=1), config.delta)
            history.val_loss.append(float((vw @ np.sum((fa - fb) ** 2, axis=1)) / vw.sum()))
        else:
            history.val_loss.append(float("nan"))
    return ComparisonModel(net=net, delta=config.delta, window=store.window,
                           n_sensors=store.n_sensors, history=history,
                           train_seed=config.seed)


def dc1_distance(model: ComparisonModel, q: np.ndarray, w: np.ndarray) -> float:
    """Squared Euclidean distance between the encoded query and archive vectors."""
    fq = model.encode(q)[0]
    fw = model.encode(w)[0]
    return float(np.sum((fq - fw) ** 2))


def comparison_retrieve(model: ComparisonModel, store, q_index: int, k: int) -> RankedResult:
    encoded = model.encode(store.matrix())
    fq = model.encode(store.vector(q_index))[0]
    dists = np.sum((encoded - fq[None, :]) ** 2, axis=1)
    return rank_candidates(store.times, dists, q_index, store.window, k)
