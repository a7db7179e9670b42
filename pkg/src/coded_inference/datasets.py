"""Bundled evaluation datasets, model fixtures, and the external-CSV loader."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError
from .predictor import MlpPredictor, WeightsFile, mlp_predictor, weights_from_dict

FIXTURE_MODELS = ("blobs_mlp", "digits_logreg")
FIXTURE_DATASETS = ("fixture_blobs", "fixture_digits")

# which bundled model goes with which bundled evaluation set
_DATASET_MODEL = {"fixture_blobs": "blobs_mlp", "fixture_digits": "digits_logreg"}
_DATASET_FILE = {"fixture_blobs": "blobs_eval.json", "fixture_digits": "digits_eval.json"}


@dataclass(frozen=True)
class ForwardFixture:
    """One reference forward pass: model tag, query, and expected class scores."""

    model: str
    query: tuple[float, ...]
    expected: tuple[float, ...]


def _read_bundled(name: str) -> str:
    return resources.files("coded_inference").joinpath("data", name).read_text()


def load_fixture_weights(name: str) -> WeightsFile:
    """Load one of the bundled weight files by model tag."""
    if name not in FIXTURE_MODELS:
        raise ConfigError(f"unknown fixture model {name!r}; choose from {FIXTURE_MODELS}")
    return weights_from_dict(json.loads(_read_bundled(f"{name}.json")))


def load_fixture_predictor(name: str) -> MlpPredictor:
    return mlp_predictor(load_fixture_weights(name))


def load_eval_set(dataset: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (queries, labels) for a bundled dataset tag."""
    if dataset not in _DATASET_FILE:
        raise ConfigError(f"unknown dataset {dataset!r}; choose from {FIXTURE_DATASETS}")
    doc = json.loads(_read_bundled(_DATASET_FILE[dataset]))
    queries = np.asarray(doc["queries"], dtype=np.float64)
    labels = np.asarray(doc["labels"], dtype=np.int64)
    if queries.shape != (doc["num_examples"], doc["input_dim"]):
        raise ConfigError(f"dataset {dataset!r} is internally inconsistent")
    return queries, labels


def fixture_model_for(dataset: str) -> str:
    """Model tag paired with a bundled dataset tag."""
    if dataset not in _DATASET_MODEL:
        raise ConfigError(f"unknown dataset {dataset!r}; choose from {FIXTURE_DATASETS}")
    return _DATASET_MODEL[dataset]


def load_forward_fixtures() -> tuple[ForwardFixture, ...]:
    """Reference (query, expected-output) pairs generated by an independent exporter."""
    doc = json.loads(_read_bundled("forward_fixtures.json"))
    return tuple(
        ForwardFixture(
            model=str(row["model"]),
            query=tuple(float(v) for v in row["query"]),
            expected=tuple(float(v) for v in row["expected"]),
        )
        for row in doc
    )


def load_calibration() -> dict:
    """Baseline quality numbers recorded against the bundled fixtures.

    Regression tests rerun the same seeded sweeps and compare against these
    frozen aggregates; see scripts/make_calibration.py for the protocol.
    """
    return json.loads(_read_bundled("calibration.json"))


def load_csv_dataset(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Load an external dataset: one example per row, features then an integer label.

    A single header line is tolerated and skipped if the first cell is not numeric.
    """
    try:
        table = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        table = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    if table.shape[1] < 2:
        raise ConfigError("csv dataset needs at least one feature column and a label column")
    queries = table[:, :-1].astype(np.float64)
    labels = table[:, -1]
    rounded = np.rint(labels)
    if not np.all(np.isfinite(labels)) or np.any(np.abs(labels - rounded) > 0):
        raise ConfigError("csv label column must hold integers")
    return queries, rounded.astype(np.int64)


def resolve_dataset(dataset: str) -> tuple[np.ndarray, np.ndarray]:
    """Map a dataset tag (bundled name or ``csv:<path>``) to (queries, labels)."""
    if dataset in _DATASET_FILE:
        return load_eval_set(dataset)
    if dataset.startswith("csv:"):
        return load_csv_dataset(dataset[len("csv:") :])
    raise ConfigError(
        f"unknown dataset {dataset!r}; choose from {FIXTURE_DATASETS} or csv:<path>"
    )
