"""Small convolutional classifier written directly on numpy (float64).

The standard stack is Conv(8 3x3)+ReLU -> MaxPool 2x2 -> Conv(16 3x3)+ReLU
-> MaxPool 2x2 -> Dense(n_classes), with softmax cross-entropy on top.
Layers cache what their backward pass needs, so a `Network` is just an
ordered list of layers plus the loss glue.  Everything is deterministic
given the seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, NumericError
from .gwo import FeatureMask
from .pattern import haar_reduce

logger = logging.getLogger(__name__)

KERNEL = 3
POOL = 2


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class ConvLayer:
    """3x3 valid correlation over (B, C, H, W) batches, ReLU fused in."""

    kind = "conv"

    def __init__(self, in_channels: int, n_filters: int, rng: np.random.Generator):
        fan_in = in_channels * KERNEL * KERNEL
        self.weights = _he_uniform(rng, (n_filters, in_channels, KERNEL, KERNEL), fan_in)
        self.biases = np.zeros(n_filters)

    def forward(self, x: np.ndarray):
        windows = sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))
        z = np.einsum("bcijuv,kcuv->bkij", windows, self.weights)
        z += self.biases[None, :, None, None]
        out = np.maximum(z, 0.0)
        return out, (x, windows, z)

    def backward(self, dout: np.ndarray, cache):
        x, windows, z = cache
        dz = dout * (z > 0.0)
        grads = {
            "weights": np.einsum("bcijuv,bkij->kcuv", windows, dz),
            "biases": dz.sum(axis=(0, 2, 3)),
        }
        pad = KERNEL - 1
        dz_padded = np.pad(dz, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        dz_windows = sliding_window_view(dz_padded, (KERNEL, KERNEL), axis=(2, 3))
        flipped = self.weights[:, :, ::-1, ::-1]
        dx = np.einsum("bkijuv,kcuv->bcij", dz_windows, flipped)
        return dx, grads

    def params(self) -> dict:
        return {"weights": self.weights, "biases": self.biases}

    def update(self, grads: dict, lr: float) -> None:
        self.weights -= lr * grads["weights"]
        self.biases -= lr * grads["biases"]


class MaxPool:
    """2x2 max pooling with stride 2; odd trailing rows/cols are dropped.

    Routing remembers, per output cell, which of the four inputs won
    (first occurrence in row-major order on ties) so backward sends the
    whole gradient there.
    """

    kind = "pool"

    def forward(self, x: np.ndarray):
        b, c, h, w = x.shape
        h2, w2 = h // POOL, w // POOL
        trimmed = x[:, :, : h2 * POOL, : w2 * POOL]
        blocks = (
            trimmed.reshape(b, c, h2, POOL, w2, POOL)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h2, w2, POOL * POOL)
        )
        routing = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, routing[..., None], axis=-1)[..., 0]
        return out, (x.shape, routing)

    def backward(self, dout: np.ndarray, cache):
        x_shape, routing = cache
        b, c, h, w = x_shape
        h2, w2 = h // POOL, w // POOL
        dblocks = np.zeros((b, c, h2, w2, POOL * POOL))
        np.put_along_axis(dblocks, routing[..., None], dout[..., None], axis=-1)
        dtrimmed = (
            dblocks.reshape(b, c, h2, w2, POOL, POOL)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h2 * POOL, w2 * POOL)
        )
        dx = np.zeros(x_shape)
        dx[:, :, : h2 * POOL, : w2 * POOL] = dtrimmed
        return dx, {}

    def params(self) -> dict:
        return {}

    def update(self, grads: dict, lr: float) -> None:
        pass


class DenseLayer:
    """Flatten + affine map; no activation (softmax lives in the loss)."""

    kind = "dense"

    def __init__(self, n_inputs: int, n_outputs: int, rng: np.random.Generator):
        self.weights = _he_uniform(rng, (n_outputs, n_inputs), n_inputs)
        self.biases = np.zeros(n_outputs)

    def forward(self, x: np.ndarray):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.weights.shape[1]:
            raise DataError(
                f"dense layer expects {self.weights.shape[1]} inputs, "
                f"got {flat.shape[1]}"
            )
        out = flat @ self.weights.T + self.biases
        return out, (x.shape, flat)

    def backward(self, dout: np.ndarray, cache):
        x_shape, flat = cache
        grads = {"weights": dout.T @ flat, "biases": dout.sum(axis=0)}
        dx = (dout @ self.weights).reshape(x_shape)
        return dx, grads

    def params(self) -> dict:
        return {"weights": self.weights, "biases": self.biases}

    def update(self, grads: dict, lr: float) -> None:
        self.weights -= lr * grads["weights"]
        self.biases -= lr * grads["biases"]


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood of the target classes."""
    picked = probs[np.arange(probs.shape[0]), targets]
    with np.errstate(divide="ignore"):
        return float(-np.log(picked).mean())


class Network:
    """An ordered layer stack with shared forward/backward plumbing."""

    def __init__(self, layers: Sequence) -> None:
        self.layers = list(layers)

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x)
        return softmax(logits)

    def loss_and_gradients(self, x: np.ndarray, targets: np.ndarray):
        logits, caches = self.forward(x)
        probs = softmax(logits)
        loss = cross_entropy(probs, targets)
        batch = x.shape[0]
        dlogits = probs.copy()
        dlogits[np.arange(batch), targets] -= 1.0
        dlogits /= batch
        grads: list[dict] = [None] * len(self.layers)
        upstream = dlogits
        for i in reversed(range(len(self.layers))):
            upstream, grads[i] = self.layers[i].backward(upstream, caches[i])
        return loss, grads

    def apply_gradients(self, grads: Sequence[dict], lr: float) -> None:
        for layer, g in zip(self.layers, grads):
            layer.update(g, lr)


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 30
    batch: int = 16
    seed: int = 0


class CnnModel:
    """The fixed five-layer classifier plus class names and persistence."""

    def __init__(
        self,
        class_names: Sequence[str],
        input_shape: tuple[int, int, int] = (1, 64, 64),
        conv_filters: tuple[int, int] = (8, 16),
        seed: int | np.random.Generator = 0,
    ):
        if len(class_names) < 2:
            raise ValueError("need at least two classes")
        c, h, w = input_shape
        h1, w1 = (h - 2) // 2, (w - 2) // 2
        h2, w2 = (h1 - 2) // 2, (w1 - 2) // 2
        if h2 < 1 or w2 < 1:
            raise ValueError(f"input shape {input_shape} too small for the stack")
        rng = np.random.default_rng(seed)
        self.class_names = [str(n) for n in class_names]
        self.input_shape = (int(c), int(h), int(w))
        self.conv_filters = (int(conv_filters[0]), int(conv_filters[1]))
        self.net = Network(
            [
                ConvLayer(c, conv_filters[0], rng),
                MaxPool(),
                ConvLayer(conv_filters[0], conv_filters[1], rng),
                MaxPool(),
                DenseLayer(conv_filters[1] * h2 * w2, len(class_names), rng),
            ]
        )
        self.loss_history: list[float] = []
        self.train_config: TrainConfig | None = None

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def _as_batch(self, images: np.ndarray) -> np.ndarray:
        x = np.asarray(images, dtype=np.float64)
        if x.ndim == 2:
            x = x[None, None]
        elif x.ndim == 3:
            x = x[:, None]
        elif x.ndim != 4:
            raise DataError(f"cannot interpret input of shape {x.shape}")
        if x.shape[1:] != self.input_shape:
            raise DataError(
                f"expected inputs of shape {self.input_shape}, got {x.shape[1:]}"
            )
        return x

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        return self.net.predict_proba(self._as_batch(images))

    def predict(self, image: np.ndarray) -> tuple[int, np.ndarray]:
        """Label index (argmax; ties pick the lowest index) and posteriors."""
        probs = self.predict_proba(image)[0]
        return int(np.argmax(probs)), probs

    def predict_batch(self, images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        probs = self.predict_proba(images)
        return np.argmax(probs, axis=1), probs

    def to_dict(self) -> dict:
        layers = []
        for layer in self.net.layers:
            if layer.kind == "pool":
                layers.append(
                    {"kind": "pool", "shape": [POOL, POOL], "weights": [], "biases": []}
                )
            else:
                layers.append(
                    {
                        "kind": layer.kind,
                        "shape": list(layer.weights.shape),
                        "weights": layer.weights.tolist(),
                        "biases": layer.biases.tolist(),
                    }
                )
        return {
            "version": 1,
            "geometry": list(self.input_shape),
            "layers": layers,
            "classes": list(self.class_names),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "CnnModel":
        stored = data["layers"]
        kinds = [entry["kind"] for entry in stored]
        if kinds != ["conv", "pool", "conv", "pool", "dense"]:
            raise DataError(f"unexpected layer stack {kinds}")
        conv_filters = (int(stored[0]["shape"][0]), int(stored[2]["shape"][0]))
        model = cls(
            class_names=data["classes"],
            input_shape=tuple(int(v) for v in data["geometry"]),
            conv_filters=conv_filters,
            seed=0,
        )
        for layer, entry in zip(model.net.layers, stored):
            for name, current in layer.params().items():
                loaded = np.asarray(entry[name], dtype=np.float64)
                if loaded.shape != current.shape:
                    raise DataError(
                        f"stored {layer.kind} {name} shape {loaded.shape} "
                        f"does not match {current.shape}"
                    )
                if not np.all(np.isfinite(loaded)):
                    raise DataError(f"stored {layer.kind} {name} has non-finite values")
                current[...] = loaded
        return model

    @classmethod
    def load(cls, path: str | Path) -> "CnnModel":
        path = Path(path)
        if not path.exists():
            raise DataError(f"model file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"model {path} is not valid JSON: {exc}") from exc
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"model {path} has unexpected structure: {exc}") from exc


def train_model(
    images: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    class_names: Sequence[str],
    config: TrainConfig | None = None,
    conv_filters: tuple[int, int] = (8, 16),
) -> CnnModel:
    """Mini-batch SGD on softmax cross-entropy; deterministic per seed.

    Every class must appear at least once in `labels`.  The model records
    the mean loss of each epoch in `loss_history`; a non-finite loss stops
    training immediately.
    """
    cfg = config if config is not None else TrainConfig()
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[:, None]
    if x.ndim != 4:
        raise DataError(f"expected (N, H, W) or (N, C, H, W) images, got {x.shape}")
    y = np.asarray(labels, dtype=np.int64)
    if y.size != x.shape[0]:
        raise DataError("images and labels disagree on sample count")
    present = np.unique(y)
    expected = np.arange(len(class_names))
    if not np.array_equal(np.intersect1d(present, expected), expected):
        missing = sorted(set(expected.tolist()) - set(present.tolist()))
        raise DataError(f"training data is missing classes {missing}")
    rng = np.random.default_rng(cfg.seed)
    model = CnnModel(
        class_names, input_shape=x.shape[1:], conv_filters=conv_filters, seed=rng
    )
    model.train_config = cfg
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch):
            batch_idx = order[start : start + cfg.batch]
            loss, grads = model.net.loss_and_gradients(x[batch_idx], y[batch_idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            model.net.apply_gradients(grads, cfg.lr)
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        model.loss_history.append(epoch_loss)
        logger.info("epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, epoch_loss)
    return model


def prepare_input(
    pattern: np.ndarray, mask: FeatureMask, size: int = 64
) -> np.ndarray:
    """Mask-gate a code image, reduce it, and fit it to a (size, size) input.

    Codes whose bin was dropped by the selector are zeroed before the 2x2
    averaging reduction.  The reduced image is centered on a zero canvas
    (cropped if larger) and scaled to [0, 1].
    """
    codes = np.asarray(pattern)
    if codes.ndim != 2:
        raise DataError("pattern must be 2-D")
    if codes.dtype != np.uint8:
        as_int = np.rint(np.asarray(codes, dtype=np.float64)).astype(np.int64)
        if as_int.min() < 0 or as_int.max() > 255:
            raise DataError("pattern values outside [0, 255]")
        codes = as_int.astype(np.uint8)
    keep = mask.mask
    if keep.size != 256:
        raise DataError(f"mask covers {keep.size} bins, expected 256")
    gated = np.where(keep[codes.astype(np.int64)], codes.astype(np.float64), 0.0)
    reduced = haar_reduce(gated)
    h, w = reduced.shape
    canvas = np.zeros((size, size))
    src_top = max((h - size) // 2, 0)
    src_left = max((w - size) // 2, 0)
    copy_h = min(h, size)
    copy_w = min(w, size)
    dst_top = max((size - h) // 2, 0)
    dst_left = max((size - w) // 2, 0)
    canvas[dst_top : dst_top + copy_h, dst_left : dst_left + copy_w] = reduced[
        src_top : src_top + copy_h, src_left : src_left + copy_w
    ]
    return canvas / 255.0
