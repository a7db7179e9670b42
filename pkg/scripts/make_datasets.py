"""Regenerate the shared datasets consumed by both toolchains.

Writes two artifacts per dataset from one canonical sampling/shuffle:

- frontend/data/<name>.json: the full dataset (train split first) that the
  exporter package trains on. Digits pixels are stored as raw 0..16 integers
  with a scale field to keep the file small; consumers divide by scale.
- src/coded_inference/data/<name>_eval.json: the held-out evaluation rows
  bundled with the serving package, already scaled to model space.

Model training lives in the exporter package (frontend/); rerun its export
command and scripts/import_fixtures.py after regenerating datasets.

Run from the repository root:  python3 scripts/make_datasets.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits, make_blobs

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = ROOT / "src" / "coded_inference" / "data"
FRONTEND_DATA = ROOT / "frontend" / "data"

BLOBS_SEED = 20240811
DIGITS_SEED = 20240812


def canonical_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def compact_json(doc) -> str:
    # the full training sets are large; keep them one-line compact
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def dataset_doc(x: np.ndarray, y: np.ndarray) -> dict:
    return {
        "num_examples": int(x.shape[0]),
        "input_dim": int(x.shape[1]),
        "queries": [[float(v) for v in row] for row in x],
        "labels": [int(v) for v in y],
    }


def training_doc(name, x, y, train_count, scale, as_int) -> dict:
    cast = (lambda v: int(v)) if as_int else (lambda v: float(v))
    return {
        "name": name,
        "num_examples": int(x.shape[0]),
        "input_dim": int(x.shape[1]),
        "train_count": int(train_count),
        "scale": scale,
        "queries": [[cast(v) for v in row] for row in x],
        "labels": [int(v) for v in y],
    }


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    FRONTEND_DATA.mkdir(parents=True, exist_ok=True)

    # ten well-separated gaussian blobs in six dimensions, max-abs scaled
    x_blobs, y_blobs = make_blobs(
        n_samples=800,
        n_features=6,
        centers=10,
        cluster_std=1.2,
        random_state=BLOBS_SEED,
    )
    x_blobs = x_blobs / np.abs(x_blobs).max()
    (FRONTEND_DATA / "blobs.json").write_text(
        compact_json(training_doc("blobs", x_blobs, y_blobs, 600, 1.0, as_int=False))
    )
    (DATA_DIR / "blobs_eval.json").write_text(
        canonical_json(dataset_doc(x_blobs[600:800], y_blobs[600:800]))
    )

    # the classic 8x8 digits set, shuffled once; pixels are 0..16 integers
    digits = load_digits()
    rng = np.random.default_rng(DIGITS_SEED)
    order = rng.permutation(len(digits.data))
    x_dig = digits.data[order]
    y_dig = digits.target[order]
    cut = len(x_dig) - 300
    (FRONTEND_DATA / "digits.json").write_text(
        compact_json(training_doc("digits", x_dig, y_dig, cut, 16.0, as_int=True))
    )
    (DATA_DIR / "digits_eval.json").write_text(
        canonical_json(dataset_doc(x_dig[cut : cut + 200] / 16.0, y_dig[cut : cut + 200]))
    )

    print(f"blobs: 800 examples (600 train), digits: {len(x_dig)} examples ({cut} train)")


if __name__ == "__main__":
    main()
