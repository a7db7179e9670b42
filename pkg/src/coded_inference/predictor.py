"""Deployed-model abstraction and the portable weights format.

Every worker hosts the same model f mapping a length-d query to a length-C
vector of class scores.  The pipeline never looks inside f, so anything
deterministic and total over finite inputs plugs in: coded queries land off
the data manifold and f must still evaluate there.

Multi-layer predictors are described by a small versioned JSON document
rather than a framework checkpoint, keeping the serving stack free of ML
framework dependencies.  Numbers round-trip exactly: serialization uses the
shortest decimal representation that parses back to the same float.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import DimensionError, WeightsFormatError

WEIGHTS_FORMAT_VERSION = 1

ACTIVATIONS = ("relu", "identity", "softmax")


@runtime_checkable
class Predictor(Protocol):
    def predict(self, query: np.ndarray) -> np.ndarray: ...

    def input_dim(self) -> int: ...

    def num_classes(self) -> int: ...


def predict_batch(predictor: Predictor, queries: np.ndarray) -> np.ndarray:
    """Row-wise prediction; one predict call per query keeps every consumer
    of a predictor on the same floating-point path."""
    queries = np.asarray(queries, dtype=float)
    if queries.ndim != 2:
        raise DimensionError("expected a (num_queries, d) array")
    return np.stack([predictor.predict(q) for q in queries])


@dataclass(frozen=True)
class ConstantPredictor:
    value: np.ndarray
    declared_input_dim: int = 1

    def predict(self, query: np.ndarray) -> np.ndarray:
        return self.value.copy()

    def input_dim(self) -> int:
        return self.declared_input_dim

    def num_classes(self) -> int:
        return self.value.size


def constant_predictor(c: Sequence[float], input_dim: int = 1) -> ConstantPredictor:
    """Predictor returning the same vector for every query, of any length."""
    value = np.asarray(c, dtype=float).ravel()
    if value.size == 0 or not np.all(np.isfinite(value)):
        raise DimensionError("constant output must be a nonempty finite vector")
    return ConstantPredictor(value=value, declared_input_dim=input_dim)


@dataclass(frozen=True)
class AffinePredictor:
    weight: np.ndarray
    bias: np.ndarray

    def predict(self, query: np.ndarray) -> np.ndarray:
        q = np.asarray(query, dtype=float).ravel()
        if q.size != self.weight.shape[1]:
            raise DimensionError(
                f"query has dimension {q.size}, predictor expects {self.weight.shape[1]}"
            )
        return self.weight @ q + self.bias

    def input_dim(self) -> int:
        return self.weight.shape[1]

    def num_classes(self) -> int:
        return self.weight.shape[0]


def affine_predictor(weight: np.ndarray, bias: np.ndarray) -> AffinePredictor:
    """Predictor computing W x + b."""
    w = np.asarray(weight, dtype=float)
    b = np.asarray(bias, dtype=float).ravel()
    if w.ndim != 2 or w.shape[0] != b.size:
        raise DimensionError("weight must be C x d with a length-C bias")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise DimensionError("weights and bias must be finite")
    return AffinePredictor(weight=w, bias=b)


@dataclass(frozen=True)
class Layer:
    rows: int
    cols: int
    weights: tuple[float, ...]  # row-major
    bias: tuple[float, ...]
    activation: str

    def matrix(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float).reshape(self.rows, self.cols)

    def bias_vector(self) -> np.ndarray:
        return np.asarray(self.bias, dtype=float)


@dataclass(frozen=True)
class WeightsFile:
    format_version: int
    input_dim: int
    layers: tuple[Layer, ...]

    @property
    def num_classes(self) -> int:
        return self.layers[-1].rows


def _validate_weights(weights: WeightsFile) -> None:
    if weights.format_version != WEIGHTS_FORMAT_VERSION:
        raise WeightsFormatError(
            f"unsupported format_version {weights.format_version}"
        )
    if weights.input_dim < 1 or not weights.layers:
        raise WeightsFormatError("need a positive input_dim and at least one layer")
    expected = weights.input_dim
    for idx, layer in enumerate(weights.layers):
        if layer.activation not in ACTIVATIONS:
            raise WeightsFormatError(
                f"layer {idx}: unknown activation {layer.activation!r}"
            )
        if layer.cols != expected:
            raise WeightsFormatError(
                f"layer {idx}: expects {layer.cols} inputs but receives {expected}"
            )
        if len(layer.weights) != layer.rows * layer.cols:
            raise WeightsFormatError(
                f"layer {idx}: {len(layer.weights)} weights for a "
                f"{layer.rows}x{layer.cols} matrix"
            )
        if len(layer.bias) != layer.rows:
            raise WeightsFormatError(f"layer {idx}: bias length != rows")
        entries = np.concatenate([layer.matrix().ravel(), layer.bias_vector()])
        if not np.all(np.isfinite(entries)):
            raise WeightsFormatError(f"layer {idx}: non-finite entries")
        expected = layer.rows


def weights_from_dict(doc: dict) -> WeightsFile:
    try:
        layers = tuple(
            Layer(
                rows=int(layer["rows"]),
                cols=int(layer["cols"]),
                weights=tuple(float(v) for v in layer["weights"]),
                bias=tuple(float(v) for v in layer["bias"]),
                activation=str(layer["activation"]),
            )
            for layer in doc["layers"]
        )
        weights = WeightsFile(
            format_version=int(doc["format_version"]),
            input_dim=int(doc["input_dim"]),
            layers=layers,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightsFormatError(f"malformed weights document: {exc}") from exc
    _validate_weights(weights)
    return weights


def weights_to_dict(weights: WeightsFile) -> dict:
    return {
        "format_version": weights.format_version,
        "input_dim": weights.input_dim,
        "layers": [
            {
                "rows": layer.rows,
                "cols": layer.cols,
                "weights": list(layer.weights),
                "bias": list(layer.bias),
                "activation": layer.activation,
            }
            for layer in weights.layers
        ],
    }


def load_weights(path: str | Path) -> WeightsFile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WeightsFormatError(f"not valid JSON: {exc}") from exc
    return weights_from_dict(doc)


def save_weights(weights: WeightsFile, path: str | Path) -> None:
    _validate_weights(weights)
    Path(path).write_text(dumps_weights(weights))


def dumps_weights(weights: WeightsFile) -> str:
    # canonical form: sorted keys, fixed indentation, shortest-repr floats
    return json.dumps(weights_to_dict(weights), indent=2, sort_keys=True) + "\n"


class MlpPredictor:
    def __init__(self, weights: WeightsFile) -> None:
        _validate_weights(weights)
        self._weights = weights
        self._stages = [
            (layer.matrix(), layer.bias_vector(), layer.activation)
            for layer in weights.layers
        ]

    def predict(self, query: np.ndarray) -> np.ndarray:
        h = np.asarray(query, dtype=float).ravel()
        if h.size != self._weights.input_dim:
            raise DimensionError(
                f"query has dimension {h.size}, model expects {self._weights.input_dim}"
            )
        for matrix, bias, activation in self._stages:
            h = matrix @ h + bias
            if activation == "relu":
                h = np.maximum(h, 0.0)
            elif activation == "softmax":
                shifted = np.exp(h - np.max(h))
                h = shifted / shifted.sum()
        return h

    def input_dim(self) -> int:
        return self._weights.input_dim

    def num_classes(self) -> int:
        return self._weights.num_classes


def mlp_predictor(weights: WeightsFile) -> MlpPredictor:
    """Feed-forward predictor over the portable weights description."""
    return MlpPredictor(weights)
