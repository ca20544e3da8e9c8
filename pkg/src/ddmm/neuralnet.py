"""Fully connected autoencoder with sigmoid activations, trained from scratch.

Everything here is plain float64 numpy: forward passes, exact
backpropagation of the weighted mean-squared reconstruction loss, Adam
updates, and a small binary model format.  Layer ``l`` maps activations
``a`` to ``sigmoid(a @ W[l].T + b[l])``; the sigmoid is applied at every
hidden layer and at the output.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


def _round_half_away(x: float) -> int:
    return int(np.floor(x + 0.5))


def layer_sizes(input_dim: int, ratios) -> list[int]:
    """Layer widths from per-layer ratios of the input dimension."""
    return [max(1, _round_half_away(r * input_dim)) for r in ratios]


@dataclass
class MlpAutoencoder:
    """Encoder-decoder MLP; input and output dimensions are equal."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"bad layer dims {dims}")
        if dims[0] != dims[-1]:
            raise ValueError(f"input dim {dims[0]} != output dim {dims[-1]}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
                raise ValueError(f"layer {l} parameter shapes {w.shape}/{b.shape} "
                                 f"do not match dims {dims}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Reconstructions for a (S, input_dim) batch."""
        a = np.asarray(x, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != self.input_dim:
            raise ValueError(f"expected (S, {self.input_dim}) batch, got {a.shape}")
        for w, b in zip(self.weights, self.biases):
            a = expit(a @ w.T + b)
        return a

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Reconstruction of a single input vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected vector of dim {self.input_dim}, got shape {x.shape}")
        return self.forward_batch(x[None, :])[0]

    def activations(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-layer outputs for a batch, input included (len n_layers+1)."""
        a = np.asarray(x, dtype=np.float64)
        acts = [a]
        for w, b in zip(self.weights, self.biases):
            a = expit(a @ w.T + b)
            acts.append(a)
        return acts

    def hidden(self, x: np.ndarray, layer: int) -> np.ndarray:
        """Activation of one hidden layer for a (S, input_dim) batch."""
        a = np.asarray(x, dtype=np.float64)
        for w, b in zip(self.weights[:layer], self.biases[:layer]):
            a = expit(a @ w.T + b)
        return a

    def copy(self) -> "MlpAutoencoder":
        return MlpAutoencoder(self.layer_dims,
                              [w.copy() for w in self.weights],
                              [b.copy() for b in self.biases])

    def params_equal(self, other: "MlpAutoencoder") -> bool:
        return (self.layer_dims == other.layer_dims
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


def init_autoencoder(input_dim: int, ratios, seed) -> MlpAutoencoder:
    """Build a seeded autoencoder from layer ratios.

    Ratios must start and end with 1.0 so the network reconstructs its
    input space.  Weights use a symmetric uniform range of
    sqrt(6 / (fan_in + fan_out)); biases start at zero.
    """
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    ratios = tuple(float(r) for r in ratios)
    if ratios[0] != 1.0 or ratios[-1] != 1.0:
        raise ValueError(f"ratios must start and end with 1.0, got {ratios}")
    dims = layer_sizes(input_dim, ratios)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpAutoencoder(tuple(dims), weights, biases)


def _check_batch(model: MlpAutoencoder, batch: np.ndarray, weights: np.ndarray):
    batch = np.asarray(batch, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ValueError(f"expected (S, {model.input_dim}) batch, got {batch.shape}")
    if batch.shape[0] < 1:
        raise ValueError("empty batch")
    if weights.shape != (batch.shape[0],):
        raise ValueError(f"{weights.shape} weights for batch of {batch.shape[0]}")
    if np.any(weights <= 0.0):
        raise ValueError("sample weights must be positive")
    return batch, weights


def weighted_mse_loss(model: MlpAutoencoder, batch: np.ndarray,
                      weights: np.ndarray) -> float:
    """Weighted squared reconstruction error, normalized by the weight sum.

    loss = sum_s w_s * ||AE(x_s) - x_s||^2 / sum_s w_s.  The
    normalization makes the loss invariant to a uniform rescaling of
    the weights.
    """
    batch, weights = _check_batch(model, batch, weights)
    y = model.forward_batch(batch)
    sq = np.sum((y - batch) ** 2, axis=1)
    return float((weights @ sq) / weights.sum())


def backprop_from_output(model: MlpAutoencoder, acts: list[np.ndarray],
                         grad_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Parameter gradients given dLoss/dOutput for a batch.

    ``acts`` is the list from :meth:`MlpAutoencoder.activations`.  The
    sigmoid derivative a*(1-a) is folded in at every layer.
    """
    grads_w = [None] * model.n_layers
    grads_b = [None] * model.n_layers
    delta = grad_out * acts[-1] * (1.0 - acts[-1])
    for l in range(model.n_layers - 1, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * acts[l] * (1.0 - acts[l])
    return grads_w, grads_b


def reconstruction_loss_gradients(model: MlpAutoencoder, batch: np.ndarray,
                                  weights: np.ndarray):
    """Loss value and exact parameter gradients of the weighted MSE."""
    batch, weights = _check_batch(model, batch, weights)
    acts = model.activations(batch)
    resid = acts[-1] - batch
    wsum = weights.sum()
    loss = float((weights @ np.sum(resid * resid, axis=1)) / wsum)
    grad_out = (2.0 / wsum) * weights[:, None] * resid
    grads_w, grads_b = backprop_from_output(model, acts, grad_out)
    return loss, grads_w, grads_b


def pair_loss_gradients(model: MlpAutoencoder, anchors: np.ndarray,
                        positives: np.ndarray, weights: np.ndarray):
    """Loss and gradients for the encoded-pair objective.

    loss = sum_s w_s * ||f(a_s) - f(b_s)||^2 / sum_s w_s with f the full
    network.  Both passes share parameters, so the gradient is the sum
    of the two backward passes with opposite output gradients.
    """
    anchors, weights = _check_batch(model, anchors, weights)
    positives = np.asarray(positives, dtype=np.float64)
    if positives.shape != anchors.shape:
        raise ValueError(f"anchor/positive shape mismatch {anchors.shape} vs {positives.shape}")
    acts_a = model.activations(anchors)
    acts_b = model.activations(positives)
    resid = acts_a[-1] - acts_b[-1]
    wsum = weights.sum()
    loss = float((weights @ np.sum(resid * resid, axis=1)) / wsum)
    grad_out = (2.0 / wsum) * weights[:, None] * resid
    gw_a, gb_a = backprop_from_output(model, acts_a, grad_out)
    gw_b, gb_b = backprop_from_output(model, acts_b, -grad_out)
    grads_w = [ga + gb for ga, gb in zip(gw_a, gw_b)]
    grads_b = [ga + gb for ga, gb in zip(gb_a, gb_b)]
    return loss, grads_w, grads_b


@dataclass
class AdamState:
    """Adam moment buffers mirroring a model's parameter shapes."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_model(cls, model: MlpAutoencoder, lr: float = 0.001,
                  beta1: float = 0.9, beta2: float = 0.999,
                  epsilon: float = 1e-8) -> "AdamState":
        return cls(m_w=[np.zeros_like(w) for w in model.weights],
                   v_w=[np.zeros_like(w) for w in model.weights],
                   m_b=[np.zeros_like(b) for b in model.biases],
                   v_b=[np.zeros_like(b) for b in model.biases],
                   lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def apply(self, model: MlpAutoencoder, grads_w, grads_b) -> None:
        """One bias-corrected Adam update, in place."""
        self.step += 1
        c1 = 1.0 - self.beta1 ** self.step
        c2 = 1.0 - self.beta2 ** self.step
        for p, g, m, v in zip(model.weights + model.biases,
                              grads_w + grads_b,
                              self.m_w + self.m_b,
                              self.v_w + self.v_b):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


@dataclass
class TrainConfig:
    """Knobs shared by all trained models.

    ``iterations`` overrides the per-epoch batch count; when None it is
    derived from the epoch's sample plan and ``batch_size``.  ``delta``
    is the zero-division guard in the pair-weight 1 / (d^2 + delta).
    """

    epochs: int
    iterations: int | None = None
    batch_size: int = 256
    lr: float = 0.001
    delta: float = 1e-6
    seed: int = 0
    validation_fraction: float = 0.2
    pair_strategy: str = "shuffle"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(f"validation_fraction must be in [0, 1), got {self.validation_fraction}")
        if self.pair_strategy not in ("shuffle", "random"):
            raise ValueError(f"unknown pair_strategy {self.pair_strategy!r}")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "iterations": self.iterations,
                "batch_size": self.batch_size, "lr": self.lr,
                "delta": self.delta, "seed": self.seed,
                "validation_fraction": self.validation_fraction,
                "pair_strategy": self.pair_strategy}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def train_step(model: MlpAutoencoder, adam: AdamState, batch: np.ndarray,
               weights: np.ndarray) -> float:
    """One weighted-MSE gradient step; mutates model and Adam state.

    Raises FloatingPointError if any gradient entry is non-finite,
    which signals training divergence.
    """
    loss, grads_w, grads_b = reconstruction_loss_gradients(model, batch, weights)
    _check_finite_grads(grads_w, grads_b, adam.step + 1, loss)
    adam.apply(model, grads_w, grads_b)
    return loss


def train_pair_step(model: MlpAutoencoder, adam: AdamState, anchors: np.ndarray,
                    positives: np.ndarray, weights: np.ndarray) -> float:
    """One gradient step of the encoded-pair objective."""
    loss, grads_w, grads_b = pair_loss_gradients(model, anchors, positives, weights)
    _check_finite_grads(grads_w, grads_b, adam.step + 1, loss)
    adam.apply(model, grads_w, grads_b)
    return loss


def _check_finite_grads(grads_w, grads_b, step: int, loss: float) -> None:
    for l, g in enumerate(grads_w):
        if not np.isfinite(g).all():
            raise FloatingPointError(
                f"non-finite weight gradient in layer {l} at step {step} (loss={loss!r})")
    for l, g in enumerate(grads_b):
        if not np.isfinite(g).all():
            raise FloatingPointError(
                f"non-finite bias gradient in layer {l} at step {step} (loss={loss!r})")


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------
#
#   bytes 0..7   magic "DDMMMODL"
#   bytes 8..15  two little-endian uint32: format version, metadata length
#   metadata     UTF-8 JSON; its "networks" list gives each network's
#                name and layer_dims in file order
#   parameters   float64 little-endian, per network, per layer:
#                weight matrix row-major, then bias vector

MAGIC = b"DDMMMODL"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Corrupt, truncated or version-mismatched model payload."""


def pack_models(networks: list[tuple[str, MlpAutoencoder]], metadata: dict) -> bytes:
    """Serialize named networks plus JSON metadata to bytes."""
    meta = dict(metadata)
    meta["networks"] = [{"name": name, "layer_dims": list(net.layer_dims)}
                        for name, net in networks]
    body = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(body)), body]
    for _, net in networks:
        for w, b in zip(net.weights, net.biases):
            parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def unpack_models(data: bytes) -> tuple[dict[str, MlpAutoencoder], dict]:
    """Inverse of :func:`pack_models`; validates magic, version and size."""
    header = len(MAGIC) + 8
    if len(data) < header or data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model payload (bad magic)")
    version, meta_len = struct.unpack("<II", data[len(MAGIC):header])
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if len(data) < header + meta_len:
        raise ModelFormatError("truncated metadata block")
    try:
        meta = json.loads(data[header:header + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable metadata: {exc}") from exc
    offset = header + meta_len
    networks: dict[str, MlpAutoencoder] = {}
    for entry in meta.get("networks", []):
        dims = [int(d) for d in entry["layer_dims"]]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            n = fan_out * fan_in
            if offset + 8 * (n + fan_out) > len(data):
                raise ModelFormatError("truncated parameter block")
            weights.append(np.frombuffer(data, dtype="<f8", count=n,
                                         offset=offset).reshape(fan_out, fan_in).copy())
            offset += 8 * n
            biases.append(np.frombuffer(data, dtype="<f8", count=fan_out,
                                        offset=offset).copy())
            offset += 8 * fan_out
        networks[entry["name"]] = MlpAutoencoder(tuple(dims), weights, biases)
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after parameters")
    return networks, meta


def persist_model(model: MlpAutoencoder, metadata: dict) -> bytes:
    """Serialize one network with metadata; round-trip is bit-exact."""
    return pack_models([("model", model)], metadata)


def restore_model(data: bytes) -> tuple[MlpAutoencoder, dict]:
    networks, meta = unpack_models(data)
    if list(networks) != ["model"]:
        raise ModelFormatError(f"expected a single network, found {list(networks)}")
    return networks["model"], meta


def save_model_file(path, networks: list[tuple[str, MlpAutoencoder]], metadata: dict) -> None:
    from pathlib import Path
    Path(path).write_bytes(pack_models(networks, metadata))


def load_model_file(path) -> tuple[dict[str, MlpAutoencoder], dict]:
    from pathlib import Path
    return unpack_models(Path(path).read_bytes())
