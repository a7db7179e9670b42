"""Record baseline coded-inference quality numbers for the bundled fixtures.

Two deterministic experiment sweeps are run against the bundled models and
their per-cell aggregates frozen into src/coded_inference/data/calibration.json:

1. Accuracy degradation under stragglers: digits classifier, K=8, S in
   {1,2,3}, E=0, 200 seeded rounds per cell. Regression tests compare fresh
   runs of the same sweep against these means.
2. Agreement under located-and-excluded corruption: digits classifier, K=12,
   E in {1,2,3}, S=0, sigma=1, 100 seeded rounds per cell. The recorded
   loss budget is 1 minus the worst cell's mean agreement plus one
   percentage point of slack.

Run from the repository root after make_fixtures.py:
    python3 scripts/make_calibration.py
"""

from __future__ import annotations

import json
from datetime import date
from pathlib import Path

from coded_inference import experiments

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "coded_inference" / "data"

ACCURACY_ROUNDS = 200
LOCATOR_ROUNDS = 100
AGREEMENT_SLACK_PP = 1.0


def canonical_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def accuracy_degradation() -> dict:
    config = experiments.ExperimentConfig(
        name="calibration_accuracy",
        dataset="fixture_digits",
        sweep_k=(8,),
        sweep_s=(1, 2, 3),
        sweep_e=(0,),
        sweep_sigma=(0.0,),
        seeds=tuple(range(ACCURACY_ROUNDS)),
    )
    result = experiments.run_experiment(config)
    cells = [
        {
            "s": c.s,
            "mean_agreement": c.mean_agreement,
            "mean_coded_accuracy": c.mean_coded_accuracy,
            "mean_base_accuracy": c.mean_base_accuracy,
        }
        for c in result.summaries
    ]
    return {
        "dataset": config.dataset,
        "model": "digits_logreg",
        "k": 8,
        "e": 0,
        "sigma": 0.0,
        "rounds": ACCURACY_ROUNDS,
        "agreement_slack_pp": AGREEMENT_SLACK_PP,
        "cells": cells,
    }


def locator_agreement() -> dict:
    config = experiments.ExperimentConfig(
        name="calibration_locator",
        dataset="fixture_digits",
        sweep_k=(12,),
        sweep_s=(0,),
        sweep_e=(1, 2, 3),
        sweep_sigma=(1.0,),
        seeds=tuple(range(LOCATOR_ROUNDS)),
    )
    result = experiments.run_experiment(config)
    cells = [{"e": c.e, "mean_agreement": c.mean_agreement} for c in result.summaries]
    worst = min(c["mean_agreement"] for c in cells)
    return {
        "dataset": config.dataset,
        "model": "digits_logreg",
        "k": 12,
        "s": 0,
        "sigma": 1.0,
        "rounds": LOCATOR_ROUNDS,
        "loss_budget": round(1.0 - worst + AGREEMENT_SLACK_PP / 100.0, 6),
        "cells": cells,
    }


def main() -> None:
    doc = {
        "format_version": 1,
        "created": date.today().isoformat(),
        "accuracy_degradation": accuracy_degradation(),
        "locator_agreement": locator_agreement(),
    }
    (DATA_DIR / "calibration.json").write_text(canonical_json(doc))
    acc = doc["accuracy_degradation"]
    for cell in acc["cells"]:
        print(
            f"S={cell['s']}: agreement={cell['mean_agreement']:.4f} "
            f"coded={cell['mean_coded_accuracy']:.4f} "
            f"base={cell['mean_base_accuracy']:.4f}"
        )
    loc = doc["locator_agreement"]
    for cell in loc["cells"]:
        print(f"E={cell['e']}: agreement={cell['mean_agreement']:.4f}")
    print(f"loss_budget={loc['loss_budget']}")


if __name__ == "__main__":
    main()
