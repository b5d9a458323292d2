"""Neural rankers on plain numpy: a pairwise-trained scorer and a 4-class
ordinal classifier scored by expected class.

Training is plain mini-batch gradient descent with a decaying step and no
adaptive optimizer, so a fixed seed reproduces runs exactly. All gradients are
hand-derived; the test suite checks them against central finite differences.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from .base import RankModel, standardizer
from .boosting import _check_pairs

N_CLASSES = 4
CLASS_VALUES = np.array([1.0, 2.0, 3.0, 4.0])


class MLP:
    """Fully connected net; hidden activation tanh or relu, linear output."""

    def __init__(self, sizes, hidden_act: str, seed: int):
        if hidden_act not in ("tanh", "relu"):
            raise ConfigError(f"unknown activation '{hidden_act}'")
        if any(s < 1 for s in sizes):
            raise ConfigError("layer sizes must be >= 1")
        self.sizes = list(sizes)
        self.hidden_act = hidden_act
        rng = np.random.default_rng(seed)
        self.W, self.b = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = math.sqrt(2.0 / fan_in) if hidden_act == "relu" else math.sqrt(1.0 / fan_in)
            self.W.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.b.append(np.zeros(fan_out))

    def _act(self, z):
        return np.tanh(z) if self.hidden_act == "tanh" else np.maximum(z, 0.0)

    def _act_grad(self, z):
        if self.hidden_act == "tanh":
            t = np.tanh(z)
            return 1.0 - t * t
        return (z > 0.0).astype(np.float64)

    def forward(self, X):
        inputs, zs = [], []
        a = X
        last = len(self.W) - 1
        for i, (W, b) in enumerate(zip(self.W, self.b)):
            inputs.append(a)
            z = a @ W + b
            zs.append(z)
            a = self._act(z) if i < last else z
        return a, (inputs, zs)

    def backward(self, caches, dout):
        """Gradients of a scalar loss given d(loss)/d(output)."""
        inputs, zs = caches
        grads_W = [None] * len(self.W)
        grads_b = [None] * len(self.b)
        delta = dout
        for i in range(len(self.W) - 1, -1, -1):
            grads_W[i] = inputs[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.W[i].T) * self._act_grad(zs[i - 1])
        return grads_W, grads_b

    def grad_flat(self, caches, dout) -> np.ndarray:
        gW, gb = self.backward(caches, dout)
        return np.concatenate([g.ravel() for pair in zip(gW, gb) for g in pair])

    # flat parameter access, used by serialization and gradient checks
    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for pair in zip(self.W, self.b) for p in pair])

    def set_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for i in range(len(self.W)):
            for p in (self.W[i], self.b[i]):
                p[...] = flat[pos : pos + p.size].reshape(p.shape)
                pos += p.size
        if pos != len(flat):
            raise DataError("flat parameter vector has wrong length")

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "hidden_act": self.hidden_act,
            "W": [w.tolist() for w in self.W],
            "b": [b.tolist() for b in self.b],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLP":
        net = cls(d["sizes"], d["hidden_act"], seed=0)
        net.W = [np.asarray(w, dtype=np.float64) for w in d["W"]]
        net.b = [np.asarray(b, dtype=np.float64) for b in d["b"]]
        return net


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def classifier_score(dist) -> np.ndarray | float:
    """Expected class under a 4-class distribution; lands in [1, 4].

    A uniform distribution scores 2.5. Rows must be simplex points.
    """
    d = np.asarray(dist, dtype=np.float64)
    single = d.ndim == 1
    if single:
        d = d[None, :]
    if d.shape[1] != N_CLASSES:
        raise DataError(f"class distribution must have {N_CLASSES} entries")
    if np.any(d < -1e-9):
        raise DataError("class distribution has negative entries")
    if np.any(np.abs(d.sum(axis=1) - 1.0) > 1e-6):
        raise DataError("class distribution rows must sum to 1")
    out = d @ CLASS_VALUES
    return float(out[0]) if single else out


def pair_loss_and_grad(net: MLP, X: np.ndarray, pairs: np.ndarray):
    """Mean cross-entropy of sigmoid(s_winner - s_loser) against 1, plus the
    flat parameter gradient. Used full-batch by tests, per-batch in training."""
    stacked = np.concatenate([X[pairs[:, 0]], X[pairs[:, 1]]])
    s, caches = net.forward(stacked)
    s = s.ravel()
    m = len(pairs)
    d = s[:m] - s[m:]
    loss = float(np.mean(np.logaddexp(0.0, -d)))
    # dL/dd = sigmoid(d) - 1, averaged over pairs
    dd = (1.0 / (1.0 + np.exp(-d)) - 1.0) / m
    dout = np.concatenate([dd, -dd])[:, None]
    return loss, net.grad_flat(caches, dout)


def ce_loss_and_grad(net, X: np.ndarray, y_idx: np.ndarray):
    """Mean softmax cross-entropy and flat gradient for a classifier net."""
    logits, caches = net.forward(X)
    probs = softmax(logits)
    n = len(X)
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y_idx], 1e-300))))
    dlogits = probs.copy()
    dlogits[np.arange(n), y_idx] -= 1.0
    dlogits /= n
    return loss, net.grad_flat(caches, dlogits)


def _check_sgd_config(epochs: int, step: float, batch_size: int) -> None:
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if step <= 0:
        raise ConfigError("step must be > 0")
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")


def _check_ordinals(y) -> np.ndarray:
    y = np.asarray(y)
    if y.size == 0:
        raise DataError("training set is empty")
    if not np.all(np.isin(y, (1, 2, 3, 4))):
        raise DataError("ordinal labels must be in {1, 2, 3, 4}")
    return y.astype(np.int64) - 1


class RankNetModel(RankModel):
    """Pairwise-trained scorer: one hidden layer, scalar output."""

    kind = "ranknet"

    def __init__(self, net: MLP, mean, std, **header):
        self.net = net
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        super().__init__(**header)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward((X - self.mean) / self.std)
        return out.ravel()

    def params_to_dict(self) -> dict:
        return {"net": self.net.to_dict(), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def params_from_dict(cls, d: dict, header: dict) -> "RankNetModel":
        header.pop("kind", None)
        return cls(net=MLP.from_dict(d["net"]), mean=d["mean"], std=d["std"], **header)


def train_ranknet(
    X,
    pairs,
    hidden: int = 32,
    epochs: int = 30,
    step: float = 0.05,
    batch_size: int = 64,
    decay: float = 0.05,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
) -> RankNetModel:
    _check_sgd_config(epochs, step, batch_size)
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise DataError("training set is empty")
    pairs = _check_pairs(pairs, len(X))
    mean, std = standardizer(X)
    Xs = (X - mean) / std

    net = MLP([X.shape[1], hidden, 1], "tanh", seed=seed)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        lr = step / (1.0 + decay * epoch)
        order = rng.permutation(len(pairs))
        for start in range(0, len(order), batch_size):
            batch = pairs[order[start : start + batch_size]]
            _, flat = pair_loss_and_grad(net, Xs, batch)
            net.set_flat(net.get_flat() - lr * flat)
        loss, _ = pair_loss_and_grad(net, Xs, pairs)
        if not math.isfinite(loss):
            raise NumericalError("pairwise net loss became non-finite", {"epoch": epoch, "loss": loss})
        curve.append(loss)
    return RankNetModel(
        net=net,
        mean=mean,
        std=std,
        schema_id=schema_id,
        subset=subset,
        n_features=X.shape[1],
        seed=seed,
        hyper={"hidden": hidden, "epochs": epochs, "step": step, "batch_size": batch_size, "decay": decay},
        training={"loss_curve": curve},
    )


class DNNModel(RankModel):
    """4-class feed-forward classifier scored by expected class."""

    kind = "dnn"

    def __init__(self, net: MLP, mean, std, **header):
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
    def params_from_dict(cls, d: dict, header: dict) -> "DNNModel":
        header.pop("kind", None)
        return cls(net=MLP.from_dict(d["net"]), mean=d["mean"], std=d["std"], **header)


def train_dnn(
    X,
    y_ordinal,
    hidden=(64, 64),
    epochs: int = 30,
    step: float = 0.05,
    batch_size: int = 64,
    decay: float = 0.05,
    seed: int = 0,
    schema_id: str = "core-v1",
    subset: str = "full",
) -> DNNModel:
    _check_sgd_config(epochs, step, batch_size)
    X = np.asarray(X, dtype=np.float64)
    y_idx = _check_ordinals(y_ordinal)
    if len(X) != len(y_idx):
        raise DataError("X and labels must have matching lengths")
    mean, std = standardizer(X)
    Xs = (X - mean) / std

    net = MLP([X.shape[1], *hidden, N_CLASSES], "relu", seed=seed)
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
            raise NumericalError("classifier loss became non-finite", {"epoch": epoch, "loss": loss})
        curve.append(loss)
    return DNNModel(
        net=net,
        mean=mean,
        std=std,
        schema_id=schema_id,
        subset=subset,
        n_features=X.shape[1],
        seed=seed,
        hyper={"hidden": list(hidden), "epochs": epochs, "step": step, "batch_size": batch_size, "decay": decay},
        training={"loss_curve": curve},
    )
