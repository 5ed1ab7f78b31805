"""Small fully connected network with a smoothed-ReLU activation, manual backprop and Adam."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_FORMAT = "etalearn-mlp-v1"
_SATURATE = 30.0


def _sigmoid4(x: np.ndarray) -> np.ndarray:
    # 1 / (1 + exp(-4x)) without overflow
    z = np.clip(4.0 * x, -4.0 * _SATURATE - 1.0, 4.0 * _SATURATE + 1.0)
    return 1.0 / (1.0 + np.exp(-z))


def smoothed_relu(x):
    """``x / (1 + exp(-4x))``; returns exactly ``x`` or ``0`` once ``|x| > 30``."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > _SATURATE, x, np.where(x < -_SATURATE, 0.0, x * _sigmoid4(x)))
    return float(out) if out.ndim == 0 else out


def smoothed_relu_grad(x):
    """Derivative ``s + 4 x s (1 - s)`` with ``s = sigmoid(4x)``."""
    x = np.asarray(x, dtype=float)
    s = _sigmoid4(x)
    d = s + 4.0 * x * s * (1.0 - s)
    out = np.where(x > _SATURATE, 1.0, np.where(x < -_SATURATE, 0.0, d))
    return float(out) if out.ndim == 0 else out


@dataclass
class MlpParams:
    """Layer widths ``(d, hidden..., m)`` with weights shaped ``(out, in)``."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count mismatch")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float).reshape(-1) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != shape or b.shape != (shape[0],):
                raise ValueError(f"layer {i}: expected weight {shape}, got {w.shape} / bias {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "MlpParams":
        vec = np.asarray(vec, dtype=float)
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[k:k + w.size].reshape(w.shape)); k += w.size
            bs.append(vec[k:k + b.size].copy()); k += b.size
        return MlpParams(self.layer_dims, ws, bs)

    def __call__(self, x):
        return mlp_forward(self, x)


def init_mlp(layer_dims: Sequence[int], seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    dims = [int(d) for d in layer_dims]
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MlpParams(tuple(dims), ws, bs)


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.layer_dims[0]:
        raise ValueError(f"input dimension mismatch: expected {params.layer_dims[0]}, got shape {x.shape}")
    return X, single


def _forward_cache(params: MlpParams, X: np.ndarray):
    acts = [X]
    pre = []
    h = X
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else smoothed_relu(z)
        acts.append(h)
    return pre, acts


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Outputs for a single input vector ``(d,)`` or a batch ``(N, d)``."""
    X, single = _as_batch(params, x)
    h = X
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i != last:
            h = smoothed_relu(h)
    return h[0] if single else h


def mlp_backward(params: MlpParams, x, upstream) -> list[np.ndarray]:
    """Gradient of ``sum_i <upstream_i, f(x_i)>`` in :meth:`MlpParams.arrays` order."""
    X, _ = _as_batch(params, x)
    G = np.asarray(upstream, dtype=float).reshape(X.shape[0], -1)
    if G.shape[1] != params.layer_dims[-1]:
        raise ValueError("upstream gradient shape mismatch")
    pre, acts = _forward_cache(params, X)
    grads: list[np.ndarray] = [None] * (2 * params.n_layers)  # type: ignore[list-item]
    delta = G
    for i in range(params.n_layers - 1, -1, -1):
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * smoothed_relu_grad(pre[i - 1])
    return grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        arrays = params.arrays()
        return cls(lr, beta1, beta2, eps, 0, [np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def adam_step(params: MlpParams, grads: Sequence[np.ndarray], state: AdamState) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    arrays = params.arrays()
    if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
        raise ValueError("gradient shapes do not match parameters")
    if not state.m:
        state = AdamState.for_params(params, state.lr, state.beta1, state.beta2, state.eps)
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_arrays, new_m, new_v = [], [], []
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_arrays.append(a - step)
        new_m.append(m)
        new_v.append(v)
    new_params = MlpParams(params.layer_dims, new_arrays[0::2], new_arrays[1::2])
    new_state = AdamState(state.lr, b1, b2, state.eps, t, new_m, new_v)
    return new_params, new_state


def save_checkpoint(params: MlpParams, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "layer_dims": list(params.layer_dims),
        "weights": [w.reshape(-1).tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n")


def load_checkpoint(path) -> MlpParams:
    data = json.loads(Path(path).read_text())
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {data.get('format')!r}")
    dims = [int(d) for d in data["layer_dims"]]
    ws = [np.asarray(w, dtype=float).reshape(dims[i + 1], dims[i]) for i, w in enumerate(data["weights"])]
    return MlpParams(tuple(dims), ws, [np.asarray(b, dtype=float) for b in data["biases"]])
