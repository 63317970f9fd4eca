"""Feed-forward re-ranker written directly in numpy.

Hidden layer: dense -> batch norm (optional) -> ReLU -> inverted dropout.
Output: one logit, sigmoid score.  Loss: binary cross-entropy with the
positive term weighted by ``pos_weight`` and averaged over the batch.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ArgumentError
from ..rng import Stream

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class NetConfig:
    name: str = "wnn"
    widths: tuple[int, ...] = (512, 256, 128, 1)
    dropout: tuple[float, ...] = (0.3, 0.21, 0.15)
    batch_norm: tuple[bool, ...] = (True, True, True)
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batches_per_epoch: int = 4
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        for name in ("widths", "dropout", "batch_norm", "adam_betas"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n_hidden = len(self.widths) - 1
        if not self.widths or any(w <= 0 for w in self.widths) or self.widths[-1] != 1:
            raise ArgumentError("widths must be positive and end with 1")
        if len(self.dropout) != n_hidden or len(self.batch_norm) != n_hidden:
            raise ArgumentError("need one dropout rate and batch-norm flag per hidden layer")
        if any(not (0.0 <= p < 1.0) for p in self.dropout):
            raise ArgumentError("dropout rates must be in [0, 1)")
        if self.max_epochs < 1 or self.batches_per_epoch < 1 or self.patience < 1:
            raise ArgumentError("max_epochs, batches_per_epoch and patience must be >= 1")

    @property
    def n_hidden(self) -> int:
        return len(self.widths) - 1

    def batch_size(self, n_train: int) -> int:
        return max(1, math.ceil(n_train / self.batches_per_epoch))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d) -> "NetConfig":
        return cls(**d)

    def replace(self, **kw) -> "NetConfig":
        return NetConfig(**{**asdict(self), **kw})


WNN = NetConfig("wnn", (512, 256, 128, 1), (0.3, 0.21, 0.15), (True, True, True))
DEEP = NetConfig("deep", (256, 128, 64, 1), (0.3, 0.2, 0.1), (False, False, False))
PRESETS = {"wnn": WNN, "deep": DEEP}


def preset(name: str, **overrides) -> NetConfig:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise ArgumentError(f"unknown network preset {name!r}; choose from {sorted(PRESETS)}") from None
    return base.replace(**overrides) if overrides else base


def init_params(config: NetConfig, n_inputs: int, stream: Stream) -> tuple[dict, dict]:
    """He-normal weights, zero biases, unit BN scales; returns (params, buffers)."""
    params: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    fan_in = n_inputs
    for l, width in enumerate(config.widths):
        std = math.sqrt(2.0 / fan_in)
        params[f"W{l}"] = stream.normal(fan_in * width).reshape(fan_in, width) * std
        params[f"b{l}"] = np.zeros(width)
        if l < config.n_hidden and config.batch_norm[l]:
            params[f"gamma{l}"] = np.ones(width)
            params[f"beta{l}"] = np.zeros(width)
            buffers[f"rmean{l}"] = np.zeros(width)
            buffers[f"rvar{l}"] = np.ones(width)
        fan_in = width
    return params, buffers


def forward(config: NetConfig, params: dict, buffers: dict, X: np.ndarray, *,
            training: bool = False, stream: Stream | None = None,
            update_stats: bool = True):
    """Return (logits, cache).

    ``training`` selects batch statistics for batch norm; dropout is applied
    only when ``training`` and a ``stream`` is given.
    """
    a = X
    cache = []
    for l in range(config.n_hidden):
        z = a @ params[f"W{l}"] + params[f"b{l}"]
        entry = {"a_in": a}
        if config.batch_norm[l]:
            if training:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                inv = 1.0 / np.sqrt(var + BN_EPS)
                xhat = (z - mu) * inv
                if update_stats:
                    buffers[f"rmean{l}"] = (1 - BN_MOMENTUM) * buffers[f"rmean{l}"] + BN_MOMENTUM * mu
                    buffers[f"rvar{l}"] = (1 - BN_MOMENTUM) * buffers[f"rvar{l}"] + BN_MOMENTUM * var
                entry["xhat"], entry["inv"] = xhat, inv
            else:
                xhat = (z - buffers[f"rmean{l}"]) / np.sqrt(buffers[f"rvar{l}"] + BN_EPS)
            h = params[f"gamma{l}"] * xhat + params[f"beta{l}"]
        else:
            h = z
        entry["h"] = h
        a = np.maximum(h, 0.0)
        p = config.dropout[l]
        if training and stream is not None and p > 0:
            mask = (stream.uniform(a.size).reshape(a.shape) >= p) / (1.0 - p)
            a = a * mask
            entry["mask"] = mask
        cache.append(entry)
    out = config.n_hidden
    logits = (a @ params[f"W{out}"] + params[f"b{out}"])[:, 0]
    cache.append({"a_in": a})
    return logits, cache


def backward(config: NetConfig, params: dict, cache: list, dlogits: np.ndarray) -> dict:
    grads = {}
    out = config.n_hidden
    d = dlogits[:, None]
    grads[f"W{out}"] = cache[out]["a_in"].T @ d
    grads[f"b{out}"] = d.sum(axis=0)
    da = d @ params[f"W{out}"].T
    for l in reversed(range(config.n_hidden)):
        entry = cache[l]
        if "mask" in entry:
            da = da * entry["mask"]
        dh = da * (entry["h"] > 0)
        if config.batch_norm[l]:
            xhat, inv = entry["xhat"], entry["inv"]
            grads[f"gamma{l}"] = (dh * xhat).sum(axis=0)
            grads[f"beta{l}"] = dh.sum(axis=0)
            dxhat = dh * params[f"gamma{l}"]
            m = dh.shape[0]
            dz = (inv / m) * (m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dz = dh
        grads[f"W{l}"] = entry["a_in"].T @ dz
        grads[f"b{l}"] = dz.sum(axis=0)
        da = dz @ params[f"W{l}"].T
    return grads


def weighted_bce(logits: np.ndarray, y: np.ndarray, pos_weight: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean weighted BCE on logits and its gradient with respect to the logits."""
    y = y.astype(np.float64)
    loss_terms = pos_weight * y * np.logaddexp(0.0, -logits) + (1.0 - y) * np.logaddexp(0.0, logits)
    s = expit(logits)
    grad = (pos_weight * y * (s - 1.0) + (1.0 - y) * s) / logits.size
    return float(loss_terms.mean()), grad


@dataclass
class Adam:
    """Adam with decoupled weight decay on dense weight matrices only."""

    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k in params:
            g = grads[k]
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay and k.startswith("W"):
                update = update + self.weight_decay * params[k]
            params[k] = params[k] - self.lr * update
