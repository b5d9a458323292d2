"""1-D convolutional classifier over the feature vector in schema order.

Two conv blocks (valid convolution, max-pool of 2, ReLU) feed a hidden dense
layer and a 4-way softmax. Scoring is the expected class, same as the dense
classifier. Convolutions only make sense when the input is long enough to
survive both blocks; the constructor rejects widths that pool down to nothing.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError, NumericalError
from .base import RankModel, standardizer
from .neural import (
    CLASS_VALUES,
    N_CLASSES,
    _check_ordinals,
    _check_sgd_config,
    ce_loss_and_grad,
    softmax,
)


def _conv_out_len(length: int, width: int) -> int:
    return length - width + 1


class CNNNet:
    """Conv stack with hand-rolled forward and backward passes."""

    def __init__(
        self,
        n_features: int,
        conv_channels=(8, 16),
        conv_width: int = 3,
        pool: int = 2,
        fc_hidden: int = 32,
        seed: int = 0,
    ):
        if conv_width < 2:
            raise ConfigError("conv_width must be >= 2")
        if pool < 2:
            raise ConfigError("pool must be >= 2")
        if len(conv_channels) != 2 or any(c < 1 for c in conv_channels):
            raise ConfigError("conv_channels must be two positive counts")
        self.n_features = int(n_features)
        self.conv_channels = tuple(int(c) for c in conv_channels)
        self.conv_width = int(conv_width)
        self.pool = int(pool)
        self.fc_hidden = int(fc_hidden)

        # trace lengths through the stack; pooling drops any remainder
        lengths = []
        length = self.n_features
        for _ in self.conv_channels:
            length = _conv_out_len(length, conv_width)
            if length < 1:
                raise ConfigError(
                    f"input of length {self.n_features} is too short for "
                    f"two width-{conv_width} conv blocks with pool {pool}"
                )
            length //= pool
            if length < 1:
                raise ConfigError(
                    f"input of length {self.n_features} is too short for "
                    f"two width-{conv_width} conv blocks with pool {pool}"
                )
            lengths.append(length)
        self.block_lengths = tuple(lengths)
        self.flat_len = self.conv_channels[1] * lengths[1]

        rng = np.random.default_rng(seed)
        c1, c2 = self.conv_channels
        self.Wc1 = rng.normal(0.0, math.sqrt(2.0 / conv_width), size=(c1, 1, conv_width))
        self.bc1 = np.zeros(c1)
        self.Wc2 = rng.normal(0.0, math.sqrt(2.0 / (c1 * conv_width)), size=(c2, c1, conv_width))
        self.bc2 = np.zeros(c2)
        self.Wf1 = rng.normal(0.0, math.sqrt(2.0 / self.flat_len), size=(self.flat_len, fc_hidden))
        self.bf1 = np.zeros(fc_hidden)
        self.Wf2 = rng.normal(0.0, math.sqrt(2.0 / fc_hidden), size=(fc_hidden, N_CLASSES))
        self.bf2 = np.zeros(N_CLASSES)

    def _params(self):
        return [self.Wc1, self.bc1, self.Wc2, self.bc2, self.Wf1, self.bf1, self.Wf2, self.bf2]

    @staticmethod
    def _conv(x, W, b):
        # x: (n, c_in, L), W: (c_out, c_in, w) -> (n, c_out, L-w+1)
        windows = sliding_window_view(x, W.shape[2], axis=2)
        return np.einsum("nilw,oiw->nol", windows, W) + b[None, :, None]

    def _pool_relu(self, z):
        n, c, length = z.shape
        kept = (length // self.pool) * self.pool
        blocks = z[:, :, :kept].reshape(n, c, kept // self.pool, self.pool)
        idx = blocks.argmax(axis=3)
        pooled = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]
        return np.maximum(pooled, 0.0), (idx, pooled, length)

    def _pool_relu_backward(self, dout, cache):
        idx, pooled, length = cache
        dpool = dout * (pooled > 0.0)
        n, c, blocks_n = dpool.shape
        dblocks = np.zeros((n, c, blocks_n, self.pool))
        np.put_along_axis(dblocks, idx[..., None], dpool[..., None], axis=3)
        dz = np.zeros((n, c, length))
        dz[:, :, : blocks_n * self.pool] = dblocks.reshape(n, c, blocks_n * self.pool)
        return dz

    def forward(self, X):
        X = np.asarray(X, dtype=np.float64)
        x0 = X[:, None, :]
        z1 = self._conv(x0, self.Wc1, self.bc1)
        a1, p1 = self._pool_relu(z1)
        z2 = self._conv(a1, self.Wc2, self.bc2)
        a2, p2 = self._pool_relu(z2)
        flat = a2.reshape(len(X), self.flat_len)
        zf1 = flat @ self.Wf1 + self.bf1
        af1 = np.maximum(zf1, 0.0)
        logits = af1 @ self.Wf2 + self.bf2
        return logits, (x0, a1, p1, a2, p2, flat, zf1, af1)

    def grad_flat(self, caches, dlogits) -> np.ndarray:
        x0, a1, p1, a2, p2, flat, zf1, af1 = caches
        dWf2 = af1.T @ dlogits
        dbf2 = dlogits.sum(axis=0)
        daf1 = dlogits @ self.Wf2.T
        dzf1 = daf1 * (zf1 > 0.0)
        dWf1 = flat.T @ dzf1
        dbf1 = dzf1.sum(axis=0)
        dflat = dzf1 @ self.Wf1.T
        da2 = dflat.reshape(a2.shape)
        dz2 = self._pool_relu_backward(da2, p2)
        w = self.conv_width
        windows1 = sliding_window_view(a1, w, axis=2)
        dWc2 = np.einsum("nol,nilw->oiw", dz2, windows1)
        dbc2 = dz2.sum(axis=(0, 2))
        da1 = np.zeros_like(a1)
        out_len2 = dz2.shape[2]
        for wi in range(w):
            da1[:, :, wi : wi + out_len2] += np.einsum("nol,oi->nil", dz2, self.Wc2[:, :, wi])
        dz1 = self._pool_relu_backward(da1, p1)
        windows0 = sliding_window_view(x0, w, axis=2)
        dWc1 = np.einsum("nol,nilw->oiw", dz1, windows0)
        dbc1 = dz1.sum(axis=(0, 2))
        grads = [dWc1, dbc1, dWc2, dbc2, dWf1, dbf1, dWf2, dbf2]
        return np.concatenate([g.ravel() for g in grads])

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self._params()])

    def set_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for p in self._params():
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != len(flat):
            raise DataError("flat parameter vector has wrong length")

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "conv_channels": list(self.conv_channels),
            "conv_width": self.conv_width,
            "pool": self.pool,
            "fc_hidden": self.fc_hidden,
            "flat": self.get_flat().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CNNNet":
        net = cls(
            d["n_features"],
            conv_channels=tuple(d["conv_channels"]),
            conv_width=d["conv_width"],
            pool=d["pool"],
            fc_hidden=d["fc_hidden"],
            seed=0,
        )
        net.set_flat(np.asarray(d["flat"], dtype=np.float64))
        return net


class CNNModel(RankModel):
    """Convolutional 4-class classifier scored by expected class."""

    kind = "cnn"

    def __init__(self, net: CNNNet, mean, std, **header):
        self.net = net
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        super().__init__(**header)

    def class_distribution(self, X) -> np.ndarray:
        X = self._check_matrix(X)
        logits, _ = self.net.forward((X - self.mean) / self.std)
        return softmax(logits)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        logits, _ = self.net.forward((X - self.mean) / self.std)
        return softmax(logits) @ CLASS_VALUES

    def params_to_dict(self) -> dict:
        return {"net": self.net.to_dict(), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def params_from_dict(cls, d: dict, header: dict) -> "CNNModel":
        header.pop("kind", None)
        return cls(net=CNNNet.from_dict(d["net"]), mean=d["mean"], std=d["std"], **header)


def train_cnn(
    X,
    y_ordinal,
    conv_channels=(8, 16),
    conv_width: int = 3,
    pool: int = 2,
    fc_hidden: int = 32,
    epochs: int = 30,
    step: float = 0.05,
    batch_size: int = 64,
    decay: float = 0.05,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
) -> CNNModel:
    _check_sgd_config(epochs, step, batch_size)
    X = np.asarray(X, dtype=np.float64)
    y_idx = _check_ordinals(y_ordinal)
    if len(X) != len(y_idx):
        raise DataError("X and labels must have matching lengths")
    mean, std = standardizer(X)
    Xs = (X - mean) / std

    net = CNNNet(
        X.shape[1],
        conv_channels=conv_channels,
        conv_width=conv_width,
        pool=pool,
        fc_hidden=fc_hidden,
        seed=seed,
    )
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        lr = step / (1.0 + decay * epoch)
        order = rng.permutation(len(Xs))
        for start in range(0, len(order), batch_size):
            rows = order[start : start + batch_size]
            _, flat = ce_loss_and_grad(net, Xs[rows], y_idx[rows])
            net.set_flat(net.get_flat() - lr * flat)
        loss, _ = ce_loss_and_grad(net, Xs, y_idx)
        if not math.isfinite(loss):
            raise NumericalError("conv classifier loss became non-finite", {"epoch": epoch, "loss": loss})
        curve.append(loss)
    return CNNModel(
        net=net,
        mean=mean,
        std=std,
        schema_id=schema_id,
        subset=subset,
        n_features=X.shape[1],
        seed=seed,
        hyper={
            "conv_channels": list(conv_channels),
            "conv_width": conv_width,
            "pool": pool,
            "fc_hidden": fc_hidden,
            "epochs": epochs,
            "step": step,
            "batch_size": batch_size,
            "decay": decay,
        },
        training={"loss_curve": curve},
    )
