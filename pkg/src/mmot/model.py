"""Small softmax classifier (plain or one hidden tanh layer) with hand-written gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .seeding import make_rng

CE_EPS = 1e-12


@dataclass(frozen=True)
class ClassifierParams:
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    hidden_dim: int = 0
    rng_seed: int = 0

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.layers[-1][0].shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in self.layers])

    def with_flat(self, vec: np.ndarray) -> "ClassifierParams":
        layers, pos = [], 0
        for W, b in self.layers:
            W2 = vec[pos:pos + W.size].reshape(W.shape)
            pos += W.size
            b2 = vec[pos:pos + b.size].copy()
            pos += b.size
            layers.append((W2.copy(), b2))
        return ClassifierParams(tuple(layers), self.hidden_dim, self.rng_seed)


def init_params(in_dim: int, n_classes: int, hidden_dim: int = 32, seed: int = 0) -> ClassifierParams:
    """Glorot-uniform weights, zero biases."""
    rng = make_rng(seed, "init")
    dims = [in_dim, hidden_dim, n_classes] if hidden_dim > 0 else [in_dim, n_classes]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return ClassifierParams(tuple(layers), hidden_dim, seed)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(params: ClassifierParams, X: np.ndarray):
    acts = [X]
    h = X
    for idx, (W, b) in enumerate(params.layers):
        z = h @ W + b
        if idx < len(params.layers) - 1:
            h = np.tanh(z)
            acts.append(h)
        else:
            return acts, z


def logits(params: ClassifierParams, X) -> np.ndarray:
    return _forward(params, np.asarray(X, dtype=float))[1]


def forward(params: ClassifierParams, x) -> np.ndarray:
    """Class probabilities for one point (1-D input) or a batch (2-D input)."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != params.in_dim:
        raise DimensionError(f"input dimension {X.shape[1]} != model input {params.in_dim}")
    probs = softmax(_forward(params, X)[1])
    return probs[0] if single else probs


def predict(params: ClassifierParams, X) -> np.ndarray:
    return np.argmax(logits(params, X), axis=1)


def _targets(target, n_classes: int, n: int | None = None) -> np.ndarray:
    t = np.asarray(target)
    if t.ndim == 0 or (t.ndim == 1 and n is not None and t.shape[0] == n and np.issubdtype(t.dtype, np.integer)):
        idx = np.atleast_1d(t).astype(int)
        out = np.zeros((idx.size, n_classes))
        out[np.arange(idx.size), idx] = 1.0
        return out if t.ndim else out[0]
    return t.astype(float)


def cross_entropy(pred, target) -> float:
    """``-sum target_i log(pred_i + 1e-12)``; ``target`` is a class id or a distribution."""
    p = np.asarray(pred, dtype=float)
    t = _targets(target, p.shape[-1])
    return float(-np.sum(t * np.log(p + CE_EPS)))


def _batch_ce(params: ClassifierParams, X: np.ndarray, T: np.ndarray, need_grad: bool):
    acts, z = _forward(params, X)
    p = softmax(z)
    n = X.shape[0]
    loss = float(-np.sum(T * np.log(p + CE_EPS)) / n)
    if not need_grad:
        return loss, None
    # exact derivative of the eps-smoothed loss with respect to the logits
    r = T * p / (p + CE_EPS)
    dz = (p * r.sum(axis=1, keepdims=True) - r) / n
    grads = [None] * len(params.layers)
    for idx in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[idx]
        h = acts[idx]
        grads[idx] = (h.T @ dz, dz.sum(axis=0))
        if idx > 0:
            dz = (dz @ W.T) * (1.0 - h ** 2)
    return loss, grads


def _batch(batch, n_classes):
    if batch is None:
        return None
    X, y = batch
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return None
    return X, _targets(y, n_classes, X.shape[0])


def loss_and_grad(params: ClassifierParams, labeled_batch, pseudo_batch, alpha: float):
    """Value and gradient of ``CE(labeled) + alpha * CE(pseudo)``, each a per-sample mean.

    The two terms go through separate passes so that ``alpha == 0`` reproduces
    a labeled-only step bit for bit.
    """
    c = params.n_classes
    lb = _batch(labeled_batch, c)
    pb = _batch(pseudo_batch, c)
    total = 0.0
    grads = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params.layers]
    if lb is not None:
        loss, g = _batch_ce(params, *lb, need_grad=True)
        total += loss
        grads = [(gw + dw, gb + db) for (gw, gb), (dw, db) in zip(grads, g)]
    if pb is not None:
        loss, g = _batch_ce(params, *pb, need_grad=True)
        total += alpha * loss
        grads = [(gw + alpha * dw, gb + alpha * db) for (gw, gb), (dw, db) in zip(grads, g)]
    return total, grads


def total_loss(params: ClassifierParams, labeled_batch, pseudo_batch, alpha: float) -> float:
    c = params.n_classes
    total = 0.0
    lb = _batch(labeled_batch, c)
    pb = _batch(pseudo_batch, c)
    if lb is not None:
        total += _batch_ce(params, *lb, need_grad=False)[0]
    if pb is not None:
        total += alpha * _batch_ce(params, *pb, need_grad=False)[0]
    return total


class SGD:
    def __init__(self, params: ClassifierParams, lr: float):
        self.lr = lr

    def step(self, params: ClassifierParams, grads) -> ClassifierParams:
        layers = tuple((W - self.lr * dW, b - self.lr * db) for (W, b), (dW, db) in zip(params.layers, grads))
        return ClassifierParams(layers, params.hidden_dim, params.rng_seed)


class Adam:
    """Adaptive moment estimation with the usual defaults (0.9, 0.999, 1e-8)."""

    def __init__(self, params: ClassifierParams, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params.layers]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params.layers]

    def _update(self, x, g, m, v):
        m = self.beta1 * m + (1 - self.beta1) * g
        v = self.beta2 * v + (1 - self.beta2) * g * g
        m_hat = m / (1 - self.beta1 ** self.t)
        v_hat = v / (1 - self.beta2 ** self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps), m, v

    def step(self, params: ClassifierParams, grads) -> ClassifierParams:
        self.t += 1
        layers, ms, vs = [], [], []
        for (W, b), (dW, db), (mW, mb), (vW, vb) in zip(params.layers, grads, self.m, self.v):
            W2, mW, vW = self._update(W, dW, mW, vW)
            b2, mb, vb = self._update(b, db, mb, vb)
            layers.append((W2, b2))
            ms.append((mW, mb))
            vs.append((vW, vb))
        self.m, self.v = ms, vs
        return ClassifierParams(tuple(layers), params.hidden_dim, params.rng_seed)


def make_optimizer(name: str, params: ClassifierParams, lr: float):
    if name in ("adam", "adaptive-moment"):
        return Adam(params, lr)
    if name in ("sgd", "plain-sgd"):
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {name!r}")
