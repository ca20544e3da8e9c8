"""Reference retrievers: raw Euclidean distance and autoencoder embeddings.

Both honor the same overlap-exclusion and tie-break rules as the
learned retriever, so rankings are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neuralnet import (AdamState, MlpAutoencoder, TrainConfig, init_autoencoder,
                        pack_models, train_step, unpack_models, weighted_mse_loss)
from .ranking import RankedResult, rank_candidates

AE_RATIOS = (1.0, 0.5, 1.0)


def euclidean_retrieve(store, q_index: int, k: int) -> RankedResult:
    """Plain k-nearest segments by Euclidean distance on segment vectors."""
    x = store.matrix()
    q = store.vector(q_index)
    dists = np.linalg.norm(x - q[None, :], axis=1)
    return rank_candidates(store.times, dists, q_index, store.window, k)


@dataclass
class AeEmbedder:
    """Reconstruction autoencoder used for its middle-layer embeddings."""

    net: MlpAutoencoder
    history: "object | None" = None
    train_seed: int | None = None

    @property
    def embedding_dim(self) -> int:
        mid = len(self.net.layer_dims) // 2
        return self.net.layer_dims[mid]

    def embed(self, vectors: np.ndarray) -> np.ndarray:
        """Middle-layer activations for raw segment vectors."""
        mid = len(self.net.layer_dims) // 2
        return self.net.hidden(np.atleast_2d(np.asarray(vectors, dtype=np.float64)), mid)

    def save(self, path) -> None:
        from pathlib import Path
        meta = {"type": "ae-baseline", "train_seed": self.train_seed}
        Path(path).write_bytes(pack_models([("autoencoder", self.net)], meta))

    @classmethod
    def load(cls, path) -> "AeEmbedder":
        from pathlib import Path
        networks, meta = unpack_models(Path(path).read_bytes())
        if meta.get("type") != "ae-baseline":
            raise ValueError(f"not a baseline autoencoder file (type={meta.get('type')!r})")
        return cls(net=networks["autoencoder"], train_seed=meta.get("train_seed"))


def train_ae_baseline(store, config: TrainConfig, ratios=AE_RATIOS) -> AeEmbedder:
    """Train a plain reconstruction autoencoder on the segments.

    Uses unweighted mean squared error; each epoch is one shuffled pass
    over the segments with the trailing validation fraction held out
    for the reported validation loss.
    """
    from .model import TrainingHistory
    x = store.matrix()
    n = x.shape[0]
    ss = np.random.SeedSequence(config.seed)
    seed_init, seed_shuffle = ss.spawn(2)
    net = init_autoencoder(store.dim, ratios, seed_init)
    adam = AdamState.for_model(net, lr=config.lr)
    rng = np.random.default_rng(seed_shuffle)
    history = TrainingHistory()
    size = config.batch_size
    for _epoch in range(config.epochs):
        perm = rng.permutation(n)
        n_val = min(int(round(config.validation_fraction * n)), n - 1)
        n_train = n - n_val
        train_pos, val_pos = perm[:n_train], perm[n_train:]
        losses = []
        for i in range(max(1, -(-n_train // size))):
            sel = train_pos[i * size:(i + 1) * size]
            batch = x[sel]
            losses.append(train_step(net, adam, batch, np.ones(batch.shape[0])))
        history.train_loss.append(float(np.mean(losses)))
        if val_pos.size:
            history.val_loss.append(weighted_mse_loss(net, x[val_pos], np.ones(val_pos.size)))
        else:
            history.val_loss.append(float("nan"))
    return AeEmbedder(net=net, history=history, train_seed=config.seed)


def ae_embedding_retrieve(embedder: AeEmbedder, store, q_index: int, k: int) -> RankedResult:
    """k-nearest segments by Euclidean distance between embeddings."""
    emb = embedder.embed(store.matrix())
    q = embedder.embed(store.vector(q_index))[0]
    dists = np.linalg.norm(emb - q[None, :], axis=1)
    return rank_candidates(store.times, dists, q_index, store.window, k)
