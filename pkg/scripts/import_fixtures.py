#!/usr/bin/env python3
"""Bundle exporter-produced model weights and forward fixtures into the package.

The weights exporter (frontend/) trains the fixture models and writes, per
model, a weights document plus reference (input, expected) forward-pass
triples.  This script validates those artifacts against the package's own
predictor, re-serializes the weights in the package's canonical form, and
installs everything under src/coded_inference/data/.

Run the exports first:

    cd frontend && npm run build
    node dist/cli.js export --dataset blobs  --arch mlp    --seed 20240811 --out out
    node dist/cli.js export --dataset digits --arch logreg --seed 20240812 --out out

then:  python3 scripts/import_fixtures.py [--src frontend/out]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from coded_inference import predictor  # noqa: E402

DATA_DIR = REPO / "src" / "coded_inference" / "data"
MODELS = ("blobs_mlp", "digits_logreg")


def canonical_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def import_model(src: Path, name: str) -> tuple[str, list[dict]]:
    """Validate one exported model; return (canonical weights text, fixture rows)."""
    raw = (src / f"{name}.json").read_text()
    weights = predictor.weights_from_dict(json.loads(raw))
    canonical = predictor.dumps_weights(weights)
    if canonical == raw:
        print(f"{name}: exporter serialization already canonical")
    else:
        print(f"{name}: re-serialized into canonical form")

    model = predictor.mlp_predictor(weights)
    triples = json.loads((src / f"{name}.fixtures.json").read_text())
    if len(triples) < 20:
        raise SystemExit(f"{name}: only {len(triples)} fixtures; expected at least 20")
    worst = 0.0
    rows = []
    for triple in triples:
        query = np.asarray(triple["input"], dtype=np.float64)
        expected = np.asarray(triple["expected"], dtype=np.float64)
        got = model.predict(query)
        diff = float(np.max(np.abs(got - expected)))
        worst = max(worst, diff)
        if diff > float(triple["tolerance"]):
            raise SystemExit(f"{name}: fixture disagrees with predictor by {diff:.3e}")
        rows.append(
            {
                "model": name,
                "query": triple["input"],
                "expected": triple["expected"],
            }
        )
    print(f"{name}: {len(rows)} fixtures verified, worst abs diff {worst:.3e}")
    return canonical, rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--src", default=str(REPO / "frontend" / "out"))
    args = parser.parse_args()
    src = Path(args.src)

    all_rows: list[dict] = []
    for name in MODELS:
        canonical, rows = import_model(src, name)
        (DATA_DIR / f"{name}.json").write_text(canonical)
        all_rows.extend(rows)
    (DATA_DIR / "forward_fixtures.json").write_text(canonical_json(all_rows))
    print(f"installed {len(MODELS)} models and {len(all_rows)} fixtures into {DATA_DIR}")


if __name__ == "__main__":
    main()
