"""Fully connected tanh network with a Gaussian prior over its parameters.

Parameters are stored layer by layer and exposed as one flat vector in the
order ``W_0 (row-major, out x in), b_0, W_1, b_1, ...``.  That order is also
the on-disk order of the JSON snapshot format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SNAPSHOT_FORMAT = "empost-netparams"


@dataclass(frozen=True)
class NetArchitecture:
    input_dim: int = 5
    hidden_widths: tuple[int, ...] = (32, 32)
    output_dim: int = 3
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden_widths must be nonempty and positive")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input and output dimensions must be positive")
        if self.activation != "tanh":
            raise ValueError("only tanh activations are supported")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        """(out, in) of every affine layer."""
        w = self.widths
        return [(w[i + 1], w[i]) for i in range(len(w) - 1)]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.shapes)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_widths": list(self.hidden_widths),
                "output_dim": self.output_dim, "activation": self.activation}

    @classmethod
    def from_dict(cls, d) -> "NetArchitecture":
        return cls(d.get("input_dim", 5), tuple(d.get("hidden_widths", (32, 32))), d.get("output_dim", 3),
                   d.get("activation", "tanh"))


@dataclass(frozen=True)
class PriorSpec:
    """Per-layer prior variances of weights and biases."""

    var_w: tuple[float, ...]
    var_b: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "var_w", tuple(float(v) for v in self.var_w))
        object.__setattr__(self, "var_b", tuple(float(v) for v in self.var_b))
        if len(self.var_w) != len(self.var_b):
            raise ValueError("var_w and var_b need one entry per layer")
        if not all(v > 0 and math.isfinite(v) for v in (*self.var_w, *self.var_b)):
            raise ValueError("prior variances must be positive")

    @classmethod
    def default(cls, arch: NetArchitecture) -> "PriorSpec":
        """1/fan_in for weights and 1 for biases."""
        return cls(tuple(1.0 / i for _, i in arch.shapes), tuple(1.0 for _ in arch.shapes))

    def check(self, arch: NetArchitecture) -> None:
        if len(self.var_w) != len(arch.shapes):
            raise ValueError(f"prior has {len(self.var_w)} layers, architecture has {len(arch.shapes)}")

    def flat_variances(self, arch: NetArchitecture) -> np.ndarray:
        self.check(arch)
        parts = []
        for (o, i), vw, vb in zip(arch.shapes, self.var_w, self.var_b):
            parts += [np.full(o * i, vw), np.full(o, vb)]
        return np.concatenate(parts)

    def to_dict(self) -> dict:
        return {"var_w": list(self.var_w), "var_b": list(self.var_b)}


@dataclass(frozen=True)
class NetParams:
    arch: NetArchitecture
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        if len(ws) != len(self.arch.shapes) or len(bs) != len(ws):
            raise ValueError("layer count does not match architecture")
        for (o, i), w, b in zip(self.arch.shapes, ws, bs):
            if w.shape != (o, i) or b.shape != (o,):
                raise ValueError(f"layer shape mismatch: expected ({o}, {i}) and ({o},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("network parameters must be finite")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def flat(self) -> np.ndarray:
        return np.concatenate([p for w, b in zip(self.weights, self.biases) for p in (w.ravel(), b)])

    @classmethod
    def from_flat(cls, arch: NetArchitecture, theta) -> "NetParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (arch.n_params,):
            raise ValueError(f"expected {arch.n_params} parameters, got shape {theta.shape}")
        ws, bs, k = [], [], 0
        for o, i in arch.shapes:
            ws.append(theta[k:k + o * i].reshape(o, i))
            k += o * i
            bs.append(theta[k:k + o])
            k += o
        return cls(arch, tuple(ws), tuple(bs))


def init_prior(arch: NetArchitecture, prior: PriorSpec, seed) -> NetParams:
    """Draw every parameter independently from its layer's zero-mean Gaussian."""
    rng = np.random.default_rng(seed)
    sd = np.sqrt(prior.flat_variances(arch))
    return NetParams.from_flat(arch, rng.standard_normal(arch.n_params) * sd)


def _layers(arch: NetArchitecture, theta: np.ndarray):
    k = 0
    for o, i in arch.shapes:
        w = theta[k:k + o * i].reshape(o, i)
        k += o * i
        yield w, theta[k:k + o]
        k += o


def _as_batch(arch: NetArchitecture, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = x[None, :] if single else x
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ValueError(f"input must have trailing dimension {arch.input_dim}, got shape {x.shape}")
    return x, single


def forward_flat(arch: NetArchitecture, theta: np.ndarray, x: np.ndarray, keep: bool = False):
    """Batched forward pass on a flat parameter vector; ``keep`` returns the hidden activations too."""
    acts = [x]
    z = x
    layers = list(_layers(arch, theta))
    for w, b in layers[:-1]:
        z = np.tanh(z @ w.T + b)
        acts.append(z)
    w, b = layers[-1]
    out = z @ w.T + b
    return (out, acts) if keep else out


def backward_flat(arch: NetArchitecture, theta: np.ndarray, acts: list[np.ndarray], upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum(upstream * forward) over the batch, as a flat vector."""
    layers = list(_layers(arch, theta))
    grads: list[np.ndarray] = []
    delta = upstream
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        a = acts[li]
        grads.append(delta.sum(axis=0))
        grads.append((delta.T @ a).ravel())
        if li:
            delta = (delta @ w) * (1.0 - a * a)
    return np.concatenate(grads[::-1])


def forward(params: NetParams, x) -> np.ndarray:
    """Network output for one input vector or a batch of rows."""
    xb, single = _as_batch(params.arch, x)
    out = forward_flat(params.arch, params.flat(), xb)
    return out[0] if single else out


def backward(params: NetParams, x, upstream) -> NetParams:
    """Reverse-mode gradient of upstream . forward(params, x) with respect to every parameter.

    For a batch, the gradient is summed over rows.
    """
    xb, single = _as_batch(params.arch, x)
    up = np.asarray(upstream, dtype=float)
    up = up[None, :] if up.ndim == 1 else up
    if up.shape != (xb.shape[0], params.arch.output_dim):
        raise ValueError(f"upstream shape {up.shape} does not match output ({xb.shape[0]}, {params.arch.output_dim})")
    theta = params.flat()
    _, acts = forward_flat(params.arch, theta, xb, keep=True)
    return NetParams.from_flat(params.arch, backward_flat(params.arch, theta, acts, up))


def log_prior(params: NetParams | np.ndarray, prior: PriorSpec, arch: NetArchitecture | None = None) -> float:
    """Sum over entries of -0.5*ln(2*pi*var) - theta^2/(2*var)."""
    theta, arch = _flat_and_arch(params, arch)
    var = prior.flat_variances(arch)
    return float(np.sum(-0.5 * np.log(2 * np.pi * var) - theta * theta / (2 * var)))


def grad_log_prior(params: NetParams | np.ndarray, prior: PriorSpec, arch: NetArchitecture | None = None) -> np.ndarray:
    theta, arch = _flat_and_arch(params, arch)
    return -theta / prior.flat_variances(arch)


def _flat_and_arch(params, arch):
    if isinstance(params, NetParams):
        return params.flat(), params.arch
    if arch is None:
        raise ValueError("flat parameter vectors need an architecture")
    return np.asarray(params, dtype=float), arch


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def snapshot_header(arch: NetArchitecture) -> dict:
    return {"format": SNAPSHOT_FORMAT, "version": 1, "architecture": arch.to_dict(),
            "order": "per layer: weight (row-major, out x in) then bias", "n_params": arch.n_params}


def params_to_json(params: NetParams) -> str:
    return json.dumps({**snapshot_header(params.arch), "values": [float(v) for v in params.flat()]})


def params_from_json(text: str) -> NetParams:
    d = json.loads(text)
    if d.get("format") != SNAPSHOT_FORMAT:
        raise ValueError("not a network parameter snapshot")
    arch = NetArchitecture.from_dict(d["architecture"])
    return NetParams.from_flat(arch, np.array(d["values"], dtype=float))


def stack_flat(samples: Sequence[NetParams]) -> np.ndarray:
    return np.stack([p.flat() for p in samples])
