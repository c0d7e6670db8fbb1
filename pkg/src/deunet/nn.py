"""Small feed-forward network machinery: dense layers, losses, Adam, checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import deu as deu_mod
from .deu import DeuLayerState, TStarMode
from .ode_core import StabilityConfig, clamp_arrays, sigmoid

__all__ = [
    "FIXED_ACTIVATIONS",
    "Fixed",
    "DenseLayer",
    "Network",
    "AdamState",
    "baseline_activation",
    "glorot_uniform",
    "make_network",
    "network_forward",
    "network_backward",
    "loss_eval",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
]

SELU_ALPHA = 1.6732632423543772
SELU_SCALE = 1.0507009873554805

FIXED_ACTIVATIONS = ("relu", "sigmoid", "leaky_relu", "selu", "elu", "identity")


def baseline_activation(kind: str, t, slope: float = 0.01):
    """Value and derivative of a fixed activation."""
    t = np.asarray(t, dtype=np.float64)
    if kind == "relu":
        y, d = np.maximum(t, 0.0), (t > 0).astype(np.float64)
    elif kind == "leaky_relu":
        y, d = np.where(t > 0, t, slope * t), np.where(t > 0, 1.0, slope)
    elif kind == "sigmoid":
        y = np.asarray(sigmoid(t))
        d = y * (1.0 - y)
    elif kind == "selu":
        em = np.expm1(np.minimum(t, 0.0))
        y = SELU_SCALE * np.where(t > 0, t, SELU_ALPHA * em)
        d = SELU_SCALE * np.where(t > 0, 1.0, SELU_ALPHA * (em + 1.0))
    elif kind == "elu":
        em = np.expm1(np.minimum(t, 0.0))
        y, d = np.where(t > 0, t, em), np.where(t > 0, 1.0, em + 1.0)
    elif kind == "identity":
        y, d = t.copy(), np.ones_like(t)
    else:
        raise ValueError(f"unknown activation {kind!r}")
    if y.ndim == 0:
        return float(y), float(d)
    return y, d


@dataclass(frozen=True)
class Fixed:
    kind: str
    slope: float = 0.01

    def __post_init__(self):
        if self.kind not in FIXED_ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: object  # Fixed or DeuLayerState

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ValueError("bias length must equal the number of output units")
        if isinstance(self.activation, DeuLayerState) and self.activation.width != self.weights.shape[0]:
            raise ValueError("DEU width must equal the number of output units")

    @property
    def is_deu(self) -> bool:
        return isinstance(self.activation, DeuLayerState)

    @property
    def kind(self) -> str:
        return "deu" if self.is_deu else self.activation.kind


@dataclass
class Network:
    layers: list

    def params(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name; arrays are the live storage (update in place)."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"W{i}"] = layer.weights
            out[f"b{i}"] = layer.bias
            if layer.is_deu:
                out[f"deu{i}"] = layer.activation.coeffs
        return out

    def deu_layers(self) -> list[DeuLayerState]:
        return [l.activation for l in self.layers if l.is_deu]

    def __call__(self, x):
        return network_forward(self, x)[0]


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def make_network(sizes, activations, seed: int = 0, cfg: StabilityConfig | None = None,
                 deu_init=None, t_star_mode=TStarMode.BATCH_MEAN) -> Network:
    """Build a dense network.

    ``sizes`` lists the layer widths including input and output; ``activations``
    names one activation per non-input layer ("deu" or a fixed kind).
    ``deu_init`` optionally maps a layer index to explicit DeuParams.
    """
    cfg = cfg or StabilityConfig()
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out, kind) in enumerate(zip(sizes[:-1], sizes[1:], activations)):
        W = glorot_uniform(rng, fan_out, fan_in)
        b = np.zeros(fan_out)
        if kind == "deu":
            if deu_init and i in deu_init:
                params = list(deu_init[i])
                if len(params) != fan_out:
                    raise ValueError(f"layer {i}: got {len(params)} DEU initializers for width {fan_out}")
            else:
                params = deu_mod.init_params(int(rng.integers(2**31)), fan_out, cfg)
            act = DeuLayerState.from_params(params, cfg, t_star_mode)
        else:
            act = Fixed(kind)
        layers.append(DenseLayer(W, b, act))
    return Network(layers)


@dataclass
class _LayerCache:
    x: np.ndarray
    z: np.ndarray
    act: object  # derivative array or DeuCache


def network_forward(net: Network, batch):
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    caches = []
    for i, layer in enumerate(net.layers):
        if x.shape[1] != layer.weights.shape[1]:
            raise ValueError(f"layer {i}: input has {x.shape[1]} features, weights expect {layer.weights.shape[1]}")
        z = x @ layer.weights.T + layer.bias
        if layer.is_deu:
            y, act_cache = deu_mod.forward_batch(layer.activation, z)
        else:
            y, act_cache = baseline_activation(layer.activation.kind, z, layer.activation.slope)
        caches.append(_LayerCache(x, z, act_cache))
        x = y
    return x, caches


def network_backward(net: Network, caches, loss_grad) -> dict[str, np.ndarray]:
    """Gradients keyed like ``Network.params``."""
    if len(caches) != len(net.layers):
        raise ValueError("stale cache: layer count mismatch")
    g = np.asarray(loss_grad, dtype=np.float64)
    grads = {}
    for i in reversed(range(len(net.layers))):
        layer, cache = net.layers[i], caches[i]
        if g.shape != cache.z.shape:
            raise ValueError(f"layer {i}: gradient shape {g.shape} != output shape {cache.z.shape}")
        if layer.is_deu:
            gz, pg = deu_mod.backward_batch(layer.activation, cache.act, g)
            grads[f"deu{i}"] = pg
        else:
            gz = g * cache.act
        grads[f"W{i}"] = gz.T @ cache.x
        grads[f"b{i}"] = gz.sum(axis=0)
        g = gz @ layer.weights
    return grads


def loss_eval(kind: str, predictions, targets):
    """Return ``(value, d value / d predictions)``."""
    pred = np.asarray(predictions, dtype=np.float64)
    if kind == "mse":
        tgt = np.asarray(targets, dtype=np.float64).reshape(pred.shape)
        diff = pred - tgt
        return float(np.mean(diff**2)), 2.0 * diff / diff.size
    if kind == "cross_entropy":
        labels = np.asarray(targets).astype(np.int64).reshape(-1)
        n, k = pred.shape
        if labels.shape[0] != n:
            raise ValueError("one label per row expected")
        if labels.min() < 0 or labels.max() >= k:
            raise ValueError(f"label out of range [0, {k})")
        shifted = pred - pred.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logz
        value = -float(np.mean(logp[np.arange(n), labels]))
        grad = np.exp(logp)
        grad[np.arange(n), labels] -= 1.0
        return value, grad / n
    raise ValueError(f"unknown loss {kind!r}")


@dataclass
class AdamState:
    lr_weights: float = 1e-3
    lr_coeffs: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)


def adam_step(adam: AdamState, params: dict, grads: dict, eps: float | None = None, lr_scale: float = 1.0):
    """In-place Adam update of every array in ``params`` that has a gradient.

    Keys starting with ``deu`` are DEU coefficient tables (width, 5): they use
    ``lr_coeffs`` and their (a, b, c) columns are re-clamped with ``eps``
    afterwards (default 0.01).  ``lr_scale`` multiplies both rates.
    """
    adam.step += 1
    for name, g in grads.items():
        p = params[name]
        if name not in adam.m:
            adam.m[name] = np.zeros_like(p)
            adam.v[name] = np.zeros_like(p)
            adam.counts[name] = 0
        adam.counts[name] += 1
        k = adam.counts[name]
        m = adam.m[name]
        v = adam.v[name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * g * g
        m_hat = m / (1.0 - adam.beta1**k)
        v_hat = v / (1.0 - adam.beta2**k)
        lr = lr_scale * (adam.lr_coeffs if name.startswith("deu") else adam.lr_weights)
        p -= lr * m_hat / (np.sqrt(v_hat) + adam.eps_hat)
        if name.startswith("deu"):
            a, b, c = clamp_arrays(p[:, 0], p[:, 1], p[:, 2], 0.01 if eps is None else eps)
            p[:, 0], p[:, 1], p[:, 2] = a, b, c
    return params


CHECKPOINT_FORMAT = "deunet-checkpoint/1"


def save_checkpoint(net: Network, path):
    """Write a JSON document with every weight, bias and DEU coefficient.

    Floats go through ``repr`` so a reload is bit-exact.
    """
    doc = {"format": CHECKPOINT_FORMAT, "layers": []}
    for i, layer in enumerate(net.layers):
        entry = {"activation": layer.kind}
        if layer.is_deu:
            st = layer.activation
            entry["stability"] = {"eps": st.cfg.eps, "s_delta": st.cfg.s_delta,
                                  "s_act": st.cfg.s_act, "exp_arg_cap": st.cfg.exp_arg_cap}
            entry["t_star_mode"] = st.t_star_mode.value
            entry["coeffs"] = st.coeffs.tolist()
        else:
            entry["slope"] = layer.activation.slope
        entry["weights"] = layer.weights.tolist()
        entry["bias"] = layer.bias.tolist()
        doc["layers"].append(entry)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_checkpoint(path) -> Network:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} document")
    layers = []
    for entry in doc["layers"]:
        if entry["activation"] == "deu":
            act = DeuLayerState(np.array(entry["coeffs"]), StabilityConfig(**entry["stability"]),
                                TStarMode(entry["t_star_mode"]))
        else:
            act = Fixed(entry["activation"], entry.get("slope", 0.01))
        layers.append(DenseLayer(np.array(entry["weights"]), np.array(entry["bias"]), act))
    return Network(layers)
