"""Minimal fully connected classifier with hand-written forward/backward.

Layers are affine maps followed by a PReLU (or identity) activation and
optional inverted dropout.  Everything is float64 numpy; parameters live in
plain dataclasses so gradient checking, flattening for the optimizer, and
exact JSON round-tripping stay trivial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
PRELU_INIT = 0.15


class StaleCacheError(ValueError):
    """backward() received a cache produced by a different forward pass."""


@dataclass(frozen=True)
class LayerSpec:
    input_width: int
    output_width: int
    activation: str = "prelu"  # "prelu" or "linear"
    dropout_retention: float = 1.0

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ValueError("layer widths must be >= 1")
        if self.activation not in ("prelu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 < self.dropout_retention <= 1.0:
            raise ValueError("dropout_retention must lie in (0, 1]")


@dataclass
class LayerParams:
    """Weights (out, in), biases (out,) and the PReLU leakage coefficient.

    Gradient containers reuse this class with the same field layout.
    """

    weights: np.ndarray
    biases: np.ndarray
    prelu_leakage: float


@dataclass
class NetworkParams:
    specs: tuple[LayerSpec, ...]
    layers: list[LayerParams]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            specs=self.specs,
            layers=[
                LayerParams(lp.weights.copy(), lp.biases.copy(), lp.prelu_leakage)
                for lp in self.layers
            ],
        )


@dataclass
class _LayerCache:
    inputs: np.ndarray
    pre_activation: np.ndarray
    mask: np.ndarray | None


@dataclass
class ForwardCache:
    params: NetworkParams
    layers: list[_LayerCache] = field(default_factory=list)


def init_he(specs, seed: int) -> NetworkParams:
    """He initialization: weights ~ N(0, 2/fan_in), zero biases, leakage 0.15."""
    specs = tuple(specs)
    for prev, nxt in zip(specs, specs[1:]):
        if prev.output_width != nxt.input_width:
            raise ValueError("adjacent layer widths do not chain")
    rng = np.random.default_rng(seed)
    layers = [
        LayerParams(
            weights=rng.normal(0.0, np.sqrt(2.0 / s.input_width), (s.output_width, s.input_width)),
            biases=np.zeros(s.output_width),
            prelu_leakage=PRELU_INIT,
        )
        for s in specs
    ]
    return NetworkParams(specs=specs, layers=layers)


def forward(params: NetworkParams, batch_features, training: bool = False, seed: int = 0):
    """Run a batch through the network; returns (logits, cache).

    During training, dropout keeps each activation with its layer's
    retention probability and rescales survivors by 1/retention, so
    inference needs no weight rescaling.  Retention 1.0 draws no mask and
    makes the training pass identical to inference.
    """
    h = np.asarray(batch_features, dtype=float)
    if h.ndim != 2 or h.shape[1] != params.specs[0].input_width:
        raise ValueError(
            f"features with {h.shape} do not match input width {params.specs[0].input_width}"
        )
    rng = np.random.default_rng(seed) if training else None
    cache = ForwardCache(params=params)
    for spec, lp in zip(params.specs, params.layers):
        z = h @ lp.weights.T + lp.biases
        if spec.activation == "prelu":
            act = np.where(z > 0.0, z, lp.prelu_leakage * z)
        else:
            act = z
        mask = None
        if training and spec.dropout_retention < 1.0:
            keep = rng.random(act.shape) < spec.dropout_retention
            mask = keep / spec.dropout_retention
            act = act * mask
        cache.layers.append(_LayerCache(inputs=h, pre_activation=z, mask=mask))
        h = act
    return h, cache


def backward(params: NetworkParams, cache: ForwardCache, grad_logits) -> list[LayerParams]:
    """Backpropagate a logits gradient; returns per-layer parameter gradients.

    The leakage gradient collects pre-activation * upstream over the
    negative-input positions.
    """
    if cache.params is not params:
        raise StaleCacheError("cache does not belong to these parameters")
    d = np.asarray(grad_logits, dtype=float)
    grads: list[LayerParams] = []
    for spec, lp, lc in zip(reversed(params.specs), reversed(params.layers), reversed(cache.layers)):
        if d.shape != (lc.inputs.shape[0], spec.output_width):
            raise ValueError("upstream gradient shape mismatch")
        if lc.mask is not None:
            d = d * lc.mask
        if spec.activation == "prelu":
            negative = lc.pre_activation <= 0.0
            dleak = float((lc.pre_activation * d)[negative].sum())
            d = d * np.where(negative, lp.prelu_leakage, 1.0)
        else:
            dleak = 0.0
        grads.append(LayerParams(weights=d.T @ lc.inputs, biases=d.sum(axis=0), prelu_leakage=dleak))
        d = d @ lp.weights
    grads.reverse()
    return grads


def flatten(layers: list[LayerParams]) -> np.ndarray:
    """Concatenate weights, biases, and leakages into one parameter vector."""
    parts = []
    for lp in layers:
        parts.append(lp.weights.ravel())
        parts.append(lp.biases)
        parts.append(np.array([lp.prelu_leakage]))
    return np.concatenate(parts)


def unflatten(vector: np.ndarray, specs) -> list[LayerParams]:
    expected = sum(s.output_width * (s.input_width + 1) + 1 for s in specs)
    if vector.size != expected:
        raise ValueError(f"vector length {vector.size} does not match the layer specs ({expected})")
    layers = []
    offset = 0
    for s in specs:
        nw = s.output_width * s.input_width
        w = vector[offset : offset + nw].reshape(s.output_width, s.input_width)
        offset += nw
        b = vector[offset : offset + s.output_width].copy()
        offset += s.output_width
        leak = float(vector[offset])
        offset += 1
        layers.append(LayerParams(weights=w.copy(), biases=b, prelu_leakage=leak))
    return layers


def to_json(params: NetworkParams) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "layers": [
            {
                "input_width": s.input_width,
                "output_width": s.output_width,
                "activation": s.activation,
                "dropout_retention": s.dropout_retention,
                "weights": lp.weights.tolist(),
                "biases": lp.biases.tolist(),
                "prelu_leakage": lp.prelu_leakage,
            }
            for s, lp in zip(params.specs, params.layers)
        ],
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> NetworkParams:
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    specs = []
    layers = []
    for entry in doc["layers"]:
        specs.append(
            LayerSpec(
                input_width=entry["input_width"],
                output_width=entry["output_width"],
                activation=entry["activation"],
                dropout_retention=entry["dropout_retention"],
            )
        )
        layers.append(
            LayerParams(
                weights=np.asarray(entry["weights"], dtype=float),
                biases=np.asarray(entry["biases"], dtype=float),
                prelu_leakage=float(entry["prelu_leakage"]),
            )
        )
    return NetworkParams(specs=tuple(specs), layers=layers)


def save_params(params: NetworkParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(params))
        fh.write("\n")


def load_params(path) -> NetworkParams:
    with open(path, encoding="utf-8") as fh:
        return from_json(fh.read())
