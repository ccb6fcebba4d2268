"""Trainable layers: Conv2D, MaxPool2D, Dropout, Flatten, Dense.

All arrays are float64. Layers operate on batched inputs: (B, C, H, W) for
the convolutional stack, (B, D) after Flatten. Each layer caches what its
backward pass needs when run in training mode.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Input or chained shape incompatible with a layer."""


ACTIVATIONS = ("relu", "linear", "softmax")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax over the last axis."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _init_scale(fan_in: int, activation: str) -> float:
    # He-style bound for ReLU layers, Glorot-style otherwise.
    if activation == "relu":
        return float(np.sqrt(6.0 / fan_in))
    return float(np.sqrt(3.0 / fan_in))


class Layer:
    """Base layer. Subclasses fill params/grads with matching keys."""

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool, rng) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError

    def _require_cache(self):
        if self._cache is None:
            raise RuntimeError(
                f"{self.kind}: backward called without a recorded training forward pass"
            )


def _im2col(xp: np.ndarray, k: int) -> np.ndarray:
    """(B, C, Hp, Wp) padded input -> (B, H*W, C*k*k) patch matrix."""
    B, C, Hp, Wp = xp.shape
    H, W = Hp - k + 1, Wp - k + 1
    cols = np.empty((B, C, k, k, H, W), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + H, j : j + W]
    return cols.reshape(B, C * k * k, H * W).transpose(0, 2, 1)


def _col2im(dcols: np.ndarray, B: int, C: int, k: int, H: int, W: int) -> np.ndarray:
    """Scatter-add patch gradients back to the padded input, inverse of _im2col."""
    dc = dcols.transpose(0, 2, 1).reshape(B, C, k, k, H, W)
    dxp = np.zeros((B, C, H + k - 1, W + k - 1), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + H, j : j + W] += dc[:, :, i, j]
    return dxp


class Conv2D(Layer):
    """Same-padded stride-1 convolution with optional ReLU."""

    kind = "conv2d"

    def __init__(self, in_channels: int, filters: int, kernel_size: int = 3,
                 activation: str = "relu", rng=None):
        super().__init__()
        if filters < 1 or kernel_size < 1:
            raise ValueError("filters and kernel_size must be positive")
        if kernel_size % 2 == 0:
            raise ValueError("same padding requires an odd kernel size")
        if activation not in ("relu", "linear"):
            raise ValueError(f"unsupported conv activation: {activation}")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.activation = activation
        fan_in = in_channels * kernel_size * kernel_size
        rng = rng if rng is not None else np.random.default_rng()
        bound = _init_scale(fan_in, activation)
        self.params = {
            "w": rng.uniform(-bound, bound, size=(filters, in_channels, kernel_size, kernel_size)),
            "b": np.zeros(filters),
        }

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ShapeError(
                f"conv2d expects (C={self.in_channels}, H, W) input, got {in_shape}"
            )
        return (self.filters, in_shape[1], in_shape[2])

    def forward(self, x, train, rng):
        B, C, H, W = x.shape
        k = self.kernel_size
        p = (k - 1) // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = _im2col(xp, k)                      # (B, H*W, C*k*k)
        wmat = self.params["w"].reshape(self.filters, -1).T
        pre = cols.reshape(B * H * W, -1) @ wmat + self.params["b"]
        pre = pre.reshape(B, H * W, self.filters)
        if self.activation == "relu":
            out = np.maximum(pre, 0.0)
        else:
            out = pre
        if train:
            self._cache = (cols, pre, (B, C, H, W))
        return out.transpose(0, 2, 1).reshape(B, self.filters, H, W)

    def backward(self, dout):
        self._require_cache()
        cols, pre, (B, C, H, W) = self._cache
        k = self.kernel_size
        p = (k - 1) // 2
        dpre = dout.reshape(B, self.filters, H * W).transpose(0, 2, 1)
        if self.activation == "relu":
            dpre = dpre * (pre > 0.0)
        flat_cols = cols.reshape(B * H * W, -1)
        flat_dpre = dpre.reshape(B * H * W, self.filters)
        self.grads = {
            "w": (flat_cols.T @ flat_dpre).T.reshape(self.params["w"].shape),
            "b": flat_dpre.sum(axis=0),
        }
        dcols = flat_dpre @ self.params["w"].reshape(self.filters, -1)
        dxp = _col2im(dcols.reshape(B, H * W, -1), B, C, k, H, W)
        if p:
            return dxp[:, :, p:-p, p:-p]
        return dxp

    def config(self):
        return {"kind": self.kind, "in_channels": self.in_channels,
                "filters": self.filters, "kernel_size": self.kernel_size,
                "activation": self.activation}


class MaxPool2D(Layer):
    """Non-overlapping max pooling, spatial dims must divide evenly."""

    kind = "maxpool2d"

    def __init__(self, pool_size: int = 2):
        super().__init__()
        if pool_size < 1:
            raise ValueError("pool_size must be positive")
        self.pool_size = pool_size

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"maxpool2d expects (C, H, W) input, got {in_shape}")
        C, H, W = in_shape
        if H % self.pool_size or W % self.pool_size:
            raise ShapeError(
                f"maxpool2d pool {self.pool_size} does not divide spatial dims {(H, W)}"
            )
        return (C, H // self.pool_size, W // self.pool_size)

    def forward(self, x, train, rng):
        p = self.pool_size
        B, C, H, W = x.shape
        # Row-major window layout so argmax ties break to the lowest offset.
        win = (x.reshape(B, C, H // p, p, W // p, p)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(B, C, H // p, W // p, p * p))
        out = win.max(axis=-1)
        if train:
            self._cache = (win.argmax(axis=-1), (B, C, H, W))
        return out

    def backward(self, dout):
        self._require_cache()
        idx, (B, C, H, W) = self._cache
        p = self.pool_size
        dwin = np.zeros((B, C, H // p, W // p, p * p))
        np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
        return (dwin.reshape(B, C, H // p, W // p, p, p)
                    .transpose(0, 1, 2, 4, 3, 5)
                    .reshape(B, C, H, W))

    def config(self):
        return {"kind": self.kind, "pool_size": self.pool_size}


class Dropout(Layer):
    """Inverted dropout: active only in training, identity at inference."""

    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            if train:
                self._cache = np.ones_like(x)
            return x
        if rng is None:
            raise ValueError("dropout in training mode needs an rng stream")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) >= self.rate) / keep
        self._cache = mask
        return x * mask

    def backward(self, dout):
        self._require_cache()
        return dout * self._cache

    def config(self):
        return {"kind": self.kind, "rate": self.rate}


class Flatten(Layer):
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train, rng):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        self._require_cache()
        return dout.reshape(self._cache)

    def config(self):
        return {"kind": self.kind}


class Dense(Layer):
    """Fully connected layer with relu, linear, or softmax activation."""

    kind = "dense"

    def __init__(self, in_size: int, out_size: int, activation: str = "relu", rng=None):
        super().__init__()
        if in_size < 1 or out_size < 1:
            raise ValueError("dense sizes must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unsupported dense activation: {activation}")
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        rng = rng if rng is not None else np.random.default_rng()
        bound = _init_scale(in_size, activation)
        self.params = {
            "w": rng.uniform(-bound, bound, size=(in_size, out_size)),
            "b": np.zeros(out_size),
        }

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_size:
            raise ShapeError(f"dense expects ({self.in_size},) input, got {in_shape}")
        return (self.out_size,)

    def forward(self, x, train, rng):
        pre = x @ self.params["w"] + self.params["b"]
        if self.activation == "relu":
            out = np.maximum(pre, 0.0)
        elif self.activation == "softmax":
            out = softmax(pre)
        else:
            out = pre
        if train:
            self._cache = (x, pre, out)
        return out

    def backward(self, dout):
        self._require_cache()
        x, pre, out = self._cache
        if self.activation == "relu":
            dpre = dout * (pre > 0.0)
        elif self.activation == "softmax":
            # J^T g with J = diag(p) - p p^T, rows independent.
            inner = (dout * out).sum(axis=-1, keepdims=True)
            dpre = out * (dout - inner)
        else:
            dpre = dout
        self.grads = {"w": x.T @ dpre, "b": dpre.sum(axis=0)}
        return dpre @ self.params["w"].T

    def config(self):
        return {"kind": self.kind, "in_size": self.in_size,
                "out_size": self.out_size, "activation": self.activation}


LAYER_KINDS = {cls.kind: cls for cls in (Conv2D, MaxPool2D, Dropout, Flatten, Dense)}


def layer_from_config(cfg: dict, rng=None) -> Layer:
    """Rebuild a layer from its config() dict. Parameters are left at init values."""
    kind = cfg.get("kind")
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind: {kind!r}")
    kwargs = {k: v for k, v in cfg.items() if k != "kind"}
    cls = LAYER_KINDS[kind]
    if cls in (Conv2D, Dense):
        kwargs["rng"] = rng
    return cls(**kwargs)
