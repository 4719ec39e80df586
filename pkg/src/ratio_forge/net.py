"""Small feed-forward networks with exact reverse-mode gradients, plus Adam.

Everything is float64 numpy. Parameters are plain data (``MlpParams``) and
all operations return new values instead of mutating their inputs, so a
ratio network can be frozen during a generator step simply by not
passing it to the optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

_TINY = np.finfo(np.float64).tiny
_EPS = np.finfo(np.float64).epsneg
ACTIVATIONS = ("linear", "relu", "leaky_relu", "sigmoid", "scaled_sigmoid", "tanh")


@dataclass(frozen=True)
class Activation:
    name: str = "linear"
    # leaky-relu slope or sigmoid scale; unused otherwise
    param: float = 0.0

    def __post_init__(self):
        if self.name not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.name!r}")
        if self.name == "scaled_sigmoid" and not self.param > 0:
            raise ValueError("scaled sigmoid needs a positive scale")


LINEAR = Activation("linear")
TANH = Activation("tanh")


def leaky_relu(slope: float = 0.2) -> Activation:
    return Activation("leaky_relu", slope)


def scaled_sigmoid(scale: float = 2.0) -> Activation:
    return Activation("scaled_sigmoid", scale)


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation = LINEAR


@dataclass
class MlpParams:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[0] != nxt.weight.shape[1]:
                raise ValueError("consecutive layer dimensions disagree")
        for layer in self.layers:
            if layer.bias.shape != (layer.weight.shape[0],):
                raise ValueError("bias shape does not match weight rows")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def with_arrays(self, arrays) -> "MlpParams":
        arrays = list(arrays)
        layers = [
            Layer(arrays[2 * i], arrays[2 * i + 1], layer.activation)
            for i, layer in enumerate(self.layers)
        ]
        return MlpParams(layers)

    def copy(self) -> "MlpParams":
        return self.with_arrays(a.copy() for a in self.arrays())

    def zeros_like(self) -> "MlpParams":
        return self.with_arrays(np.zeros_like(a) for a in self.arrays())


def init_mlp(sizes, hidden_activation: Activation, out_activation: Activation, rng) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    layers = []
    n = len(sizes) - 1
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-s, s, size=(fan_out, fan_in))
        act = out_activation if i == n - 1 else hidden_activation
        layers.append(Layer(w, np.zeros(fan_out), act))
    return MlpParams(layers)


def _act_forward(act: Activation, pre):
    name = act.name
    if name == "linear":
        return pre
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "leaky_relu":
        return np.where(pre > 0, pre, act.param * pre)
    if name == "sigmoid":
        return expit(pre)
    if name == "scaled_sigmoid":
        # expit rounds to exactly 0 or 1 for |pre| > ~37; keep the range open
        s = np.clip(expit(pre), _TINY, 1.0 - _EPS)
        return act.param * s
    return np.tanh(pre)


def _act_backward(act: Activation, pre, out, upstream):
    name = act.name
    if name == "linear":
        return upstream
    if name == "relu":
        return upstream * (pre > 0)
    if name == "leaky_relu":
        return upstream * np.where(pre > 0, 1.0, act.param)
    if name == "sigmoid":
        return upstream * out * (1.0 - out)
    if name == "scaled_sigmoid":
        s = out / act.param
        return upstream * act.param * s * (1.0 - s)
    return upstream * (1.0 - out * out)


def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"expected a (B, d) batch with B >= 1, got shape {x.shape}")
    return x


def mlp_forward(params: MlpParams, x):
    """Return ``(output, tape)``; the tape feeds :func:`mlp_backward`."""
    x = _as_batch(x)
    if x.shape[1] != params.in_dim:
        raise ValueError(f"input dim {x.shape[1]} != network input dim {params.in_dim}")
    tape = []
    h = x
    for layer in params.layers:
        pre = h @ layer.weight.T + layer.bias
        out = _act_forward(layer.activation, pre)
        tape.append((h, pre, out))
        h = out
    if not np.all(np.isfinite(h)):
        raise FloatingPointError("non-finite network output")
    return h, tape


def mlp_backward(params: MlpParams, tape, upstream):
    """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if len(tape) != len(params.layers):
        raise ValueError("tape does not match parameters")
    if upstream.shape != tape[-1][2].shape:
        raise ValueError(f"upstream shape {upstream.shape} != output shape {tape[-1][2].shape}")
    grads = [None] * (2 * len(params.layers))
    g = upstream
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        h_in, pre, out = tape[i]
        g = _act_backward(layer.activation, pre, out, g)
        grads[2 * i] = g.T @ h_in
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weight
    return params.with_arrays(grads), g


def grad_norm(grads: MlpParams) -> float:
    return float(np.sqrt(sum(float(np.sum(a * a)) for a in grads.arrays())))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: MlpParams, lr=5e-5, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    zeros = [np.zeros_like(a) for a in params.arrays()]
    return AdamState([z.copy() for z in zeros], zeros, 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: MlpParams, grads: MlpParams):
    """One bias-corrected Adam update. Returns ``(new_state, new_params)``."""
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.m):
        raise ValueError("optimizer state, parameters and gradients disagree")
    for g in g_arrays:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError("shape mismatch in adam_step")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_p.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return replace(state, m=new_m, v=new_v, t=t), params.with_arrays(new_p)
