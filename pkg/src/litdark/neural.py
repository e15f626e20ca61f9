"""Small dense networks with hand-written backward passes.

Inputs are batched along the first axis. ``vjp`` returns the weight
gradients of ``sum_k <g_k, net(x_k)>``, which is the only contraction the
training rules need.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

ACTIVATIONS = ("elu", "tanh", "sigmoid", "affine")


def elu(x, alpha: float = 1.0):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def _act(tag, x):
    if tag == "elu":
        return elu(x)
    if tag == "tanh":
        return np.tanh(x)
    if tag == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    return x


def _act_deriv(tag, x, y):
    # derivative expressed through pre-activation x and output y
    if tag == "elu":
        return np.where(x > 0, 1.0, y + 1.0)
    if tag == "tanh":
        return 1.0 - y * y
    if tag == "sigmoid":
        return y * (1.0 - y)
    return np.ones_like(x)


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str


class Mlp:
    def __init__(self, layers):
        if not layers:
            raise ValueError("network needs at least one layer")
        for k, lay in enumerate(layers):
            if lay.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {lay.activation!r}")
            if lay.weight.ndim != 2 or lay.bias.shape != (lay.weight.shape[0],):
                raise ValueError(f"layer {k} has inconsistent shapes")
            if k and lay.weight.shape[1] != layers[k - 1].weight.shape[0]:
                raise ValueError(f"layer {k} does not chain with layer {k - 1}")
        self.layers = list(layers)

    @classmethod
    def create(cls, sizes, activations, rng: np.random.Generator) -> "Mlp":
        """Uniform init in +-1/sqrt(fan_in)."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for n_in, n_out, tag in zip(sizes[:-1], sizes[1:], activations):
            r = 1.0 / math.sqrt(n_in)
            layers.append(Layer(rng.uniform(-r, r, (n_out, n_in)), rng.uniform(-r, r, n_out), tag))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.input_dim:
            raise ValueError(f"expected input dim {self.input_dim}, got shape {x.shape}")
        return x2, single

    def forward(self, x):
        x2, single = self._check(x)
        a = x2
        for lay in self.layers:
            a = _act(lay.activation, a @ lay.weight.T + lay.bias)
        return a[0] if single else a

    __call__ = forward

    def forward_cache(self, x):
        x2, _ = self._check(x)
        cache = [(x2, None, None)]
        a = x2
        for lay in self.layers:
            pre = a @ lay.weight.T + lay.bias
            a = _act(lay.activation, pre)
            cache.append((a, pre, lay.activation))
        return a, cache

    def vjp(self, cache, g):
        """Weight and input gradients of sum_k g_k . net(x_k)."""
        g = np.asarray(g, dtype=float)
        if g.ndim == 1:
            g = g[None, :]
        grads = [None] * len(self.layers)
        for k in range(len(self.layers) - 1, -1, -1):
            a, pre, tag = cache[k + 1]
            delta = g * _act_deriv(tag, pre, a)
            a_in = cache[k][0]
            grads[k] = (delta.T @ a_in, delta.sum(axis=0))
            g = delta @ self.layers[k].weight
        return grads, g

    def grad_outputs_wrt_weights(self, x):
        """For a single input, one list of (dW, db) per output component."""
        x2, _ = self._check(x)
        if x2.shape[0] != 1:
            raise ValueError("expects a single input vector")
        _, cache = self.forward_cache(x2)
        out = []
        for r in range(self.output_dim):
            e = np.zeros((1, self.output_dim))
            e[0, r] = 1.0
            out.append(self.vjp(cache, e)[0])
        return out

    def zero_grads(self):
        return [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in self.layers]

    def apply_step(self, grads, lr: float):
        """In-place ascent: w <- w + lr * g."""
        self._check_grads(grads)
        for lay, (gw, gb) in zip(self.layers, grads):
            lay.weight += lr * gw
            lay.bias += lr * gb
        if not self.is_finite():
            raise FloatingPointError("network weights became non-finite")

    def _check_grads(self, grads):
        if len(grads) != len(self.layers):
            raise ValueError("gradient has wrong number of layers")
        for lay, (gw, gb) in zip(self.layers, grads):
            if np.shape(gw) != lay.weight.shape or np.shape(gb) != lay.bias.shape:
                raise ValueError("gradient shape mismatch")

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(l.weight)) and np.all(np.isfinite(l.bias)) for l in self.layers)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        pos = 0
        for lay in self.layers:
            n = lay.weight.size
            lay.weight[...] = theta[pos:pos + n].reshape(lay.weight.shape)
            pos += n
            m = lay.bias.size
            lay.bias[...] = theta[pos:pos + m]
            pos += m

    def to_dict(self) -> dict:
        return {"layers": [{"in": l.weight.shape[1], "out": l.weight.shape[0],
                            "activation": l.activation,
                            "weight": l.weight.ravel().tolist(), "bias": l.bias.tolist()}
                           for l in self.layers]}

    @classmethod
    def from_dict(cls, data) -> "Mlp":
        layers = []
        for d in data["layers"]:
            w = np.asarray(d["weight"], dtype=float).reshape(d["out"], d["in"])
            layers.append(Layer(w, np.asarray(d["bias"], dtype=float), d["activation"]))
        return cls(layers)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Mlp":
        return cls.from_dict(json.loads(Path(path).read_text()))


def forward(net: Mlp, x):
    return net.forward(x)


def grad_outputs_wrt_weights(net: Mlp, x):
    return net.grad_outputs_wrt_weights(x)


def sgd_step(net: Mlp, grads, lr: float) -> Mlp:
    """Return a new net moved by +lr * grads."""
    out = net.copy()
    out.apply_step(grads, lr)
    return out


def scale_grads(grads, c: float):
    return [(c * gw, c * gb) for gw, gb in grads]


@dataclass
class TrainConfig:
    batch_size: int = 256
    lr_agent: float = 0.5
    lr_critic: float = 0.3
    lr_actor: float = 1e-3
    lr_explore: float = 1e-4
    epochs_agent: int = 20000
    epochs_critic: int = 200000
    epochs_actor: int = 2000
    penalty_rho: float = 0.1
    noise_std: float = 1.0
    explore_every: int = 10
    plateau_window: int = 50
    plateau_tol: float = 1e-4
    critic_tol: float = 1e-3
    critic_refit: bool = True
    agent_symmetric: bool = True
    q_sampling: str = "grid"
    seed: int = 0

    def __post_init__(self):
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be a positive integer")
        for name in ("lr_agent", "lr_critic", "lr_actor", "lr_explore", "noise_std", "critic_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.q_sampling not in ("grid", "uniform"):
            raise ValueError("q_sampling must be 'grid' or 'uniform'")
        if self.penalty_rho < 0:
            raise ValueError("penalty_rho must be non-negative")
        for name in ("epochs_agent", "epochs_critic", "epochs_actor", "explore_every",
                     "plateau_window"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")

    def replace(self, **changes) -> "TrainConfig":
        data = asdict(self)
        data.update(changes)
        return TrainConfig(**data)

    @classmethod
    def from_mapping(cls, data) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train keys: {sorted(unknown)}")
        return cls(**data)
