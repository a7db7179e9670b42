"""Sweep runner: coded rounds across (K, S, E, sigma) grids with CSV metrics.

An experiment is a cross-product sweep over coding parameters, noise scales,
and seeds, run either through the in-process cluster simulator or against
spawned socket workers. Each round becomes one metrics row; per-cell
aggregates and a gnuplot script are emitted alongside so results can be
plotted without any plotting dependency here.
"""

from __future__ import annotations

import asyncio
import csv
import io
import json
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from . import codec, datasets, simulator
from .codec import CodingConfig
from .dispatcher import DispatchPolicy, dispatch_async
from .errors import (
    ConfigError,
    InsufficientResultsError,
    RecoveryError,
    RoundFailureError,
)
from .predictor import MlpPredictor, Predictor, load_weights, mlp_predictor, predict_batch
from .worker import FaultInjection, WorkerServer

METRICS_FORMAT_VERSION = 1

CSV_HEADER = (
    "experiment",
    "K",
    "S",
    "E",
    "sigma",
    "seed",
    "round_index",
    "base_accuracy",
    "coded_accuracy",
    "agreement_with_base",
    "locator_exact_hit",
    "round_latency_ms",
    "workers_used",
    "replication_workers_equivalent",
    "failed",
)

MODES = ("simulate", "dispatch")

# entropy stream tags so per-round and per-plan draws never collide
_ROUND_TAG = 11
_PLAN_TAG = 12
_BATCH_TAG = 13

_DEFAULT_LATENCY = simulator.LatencyModel(base_ms=10.0, tail="exponential", mean_ms=20.0)


def replication_workers_equivalent(k: int, s: int, e: int) -> int:
    """Worker count a replication scheme needs for the same fault target."""
    return (2 * e + 1) * k if e > 0 else (s + 1) * k


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep definition; JSON-compatible via `from_dict` / `to_dict`.

    `weights` may be empty, in which case the bundled model paired with the
    dataset is used. `deadline_ms` only matters in dispatch mode.
    """

    name: str
    dataset: str
    sweep_k: tuple[int, ...]
    sweep_s: tuple[int, ...]
    sweep_e: tuple[int, ...]
    sweep_sigma: tuple[float, ...]
    seeds: tuple[int, ...]
    mode: str = "simulate"
    weights: str = ""
    output: str = ""
    deadline_ms: float = 5000.0

    def __post_init__(self):
        if not self.name:
            raise ConfigError("experiment name must be non-empty")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if not (self.sweep_k and self.sweep_s and self.sweep_e and self.sweep_sigma):
            raise ConfigError("every sweep axis needs at least one value")
        for k, s, e in product(self.sweep_k, self.sweep_s, self.sweep_e):
            codec.make_config(k, s, e)  # raises ConfigError on a bad cell

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            sweep = doc["sweep"]
            return cls(
                name=str(doc["name"]),
                dataset=str(doc["dataset"]),
                sweep_k=tuple(int(v) for v in sweep["k"]),
                sweep_s=tuple(int(v) for v in sweep["s"]),
                sweep_e=tuple(int(v) for v in sweep["e"]),
                sweep_sigma=tuple(float(v) for v in sweep["sigma"]),
                seeds=tuple(int(v) for v in sweep["seeds"]),
                mode=str(doc.get("mode", "simulate")),
                weights=str(doc.get("weights", "")),
                output=str(doc.get("output", "")),
                deadline_ms=float(doc.get("deadline_ms", 5000.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"experiment config missing field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dataset": self.dataset,
            "sweep": {
                "k": list(self.sweep_k),
                "s": list(self.sweep_s),
                "e": list(self.sweep_e),
                "sigma": list(self.sweep_sigma),
                "seeds": list(self.seeds),
            },
            "mode": self.mode,
            "weights": self.weights,
            "output": self.output,
            "deadline_ms": self.deadline_ms,
        }


def load_experiment_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class MetricsRow:
    experiment: str
    k: int
    s: int
    e: int
    sigma: float
    seed: int
    round_index: int
    base_accuracy: float | None
    coded_accuracy: float | None
    agreement_with_base: float | None
    locator_exact_hit: int | None
    round_latency_ms: float | None
    workers_used: int
    replication_workers_equivalent: int
    failed: int

    def to_csv_fields(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(v) if isinstance(v, float) else str(v)

        return [
            self.experiment,
            str(self.k),
            str(self.s),
            str(self.e),
            repr(self.sigma),
            str(self.seed),
            str(self.round_index),
            num(self.base_accuracy),
            num(self.coded_accuracy),
            num(self.agreement_with_base),
            num(self.locator_exact_hit),
            num(self.round_latency_ms),
            str(self.workers_used),
            str(self.replication_workers_equivalent),
            str(self.failed),
        ]


@dataclass(frozen=True)
class CellSummary:
    k: int
    s: int
    e: int
    sigma: float
    rounds: int
    failures: int
    mean_base_accuracy: float
    mean_coded_accuracy: float
    min_coded_accuracy: float
    mean_agreement: float
    locator_hit_rate: float
    mean_latency_ms: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple[MetricsRow, ...]
    summaries: tuple[CellSummary, ...]


def _sigma_bits(sigma: float) -> int:
    # seed material must be integral; use the IEEE bit pattern so any float works
    return int(np.float64(sigma).view(np.uint64))


def _derived_seed(tag: int, seed: int, k: int, s: int, e: int, sigma: float) -> int:
    stream = np.random.SeedSequence([tag, seed, k, s, e, _sigma_bits(sigma)])
    return int(stream.generate_state(1)[0])


def _round_batch(
    queries: np.ndarray, labels: np.ndarray, k: int, batch_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(batch_seed)
    replace = len(queries) < k
    rows = rng.choice(len(queries), size=k, replace=replace)
    return queries[rows], labels[rows]


def _exact_hit(plan: simulator.AdversaryPlan, returned: Sequence[int], excluded: Sequence[int]) -> int:
    effective = set(plan.byzantine_ids) & set(returned)
    return int(effective <= set(excluded))


def _row_from_round(
    config: ExperimentConfig,
    cell: tuple[int, int, int, float],
    seed: int,
    round_index: int,
    labels: np.ndarray,
    plan: simulator.AdversaryPlan,
    returned: Sequence[int],
    excluded: Sequence[int],
    base_argmax: np.ndarray,
    coded_argmax: np.ndarray,
    latency_ms: float,
) -> MetricsRow:
    k, s, e, sigma = cell
    return MetricsRow(
        experiment=config.name,
        k=k,
        s=s,
        e=e,
        sigma=sigma,
        seed=seed,
        round_index=round_index,
        base_accuracy=float(np.mean(base_argmax == labels)),
        coded_accuracy=float(np.mean(coded_argmax == labels)),
        agreement_with_base=float(np.mean(base_argmax == coded_argmax)),
        locator_exact_hit=_exact_hit(plan, returned, excluded),
        round_latency_ms=float(latency_ms),
        workers_used=codec.make_config(k, s, e).num_workers,
        replication_workers_equivalent=replication_workers_equivalent(k, s, e),
        failed=0,
    )


def _failed_row(
    config: ExperimentConfig, cell: tuple[int, int, int, float], seed: int, round_index: int
) -> MetricsRow:
    k, s, e, sigma = cell
    return MetricsRow(
        experiment=config.name,
        k=k,
        s=s,
        e=e,
        sigma=sigma,
        seed=seed,
        round_index=round_index,
        base_accuracy=None,
        coded_accuracy=None,
        agreement_with_base=None,
        locator_exact_hit=None,
        round_latency_ms=None,
        workers_used=codec.make_config(k, s, e).num_workers,
        replication_workers_equivalent=replication_workers_equivalent(k, s, e),
        failed=1,
    )


def _load_model(config: ExperimentConfig) -> MlpPredictor:
    if config.weights:
        try:
            return mlp_predictor(load_weights(config.weights))
        except OSError as exc:
            raise ConfigError(f"weights file unreadable: {exc}") from exc
    if config.dataset in datasets.FIXTURE_DATASETS:
        return datasets.load_fixture_predictor(datasets.fixture_model_for(config.dataset))
    raise ConfigError("external datasets need an explicit weights path")


def _simulate_round(
    model: Predictor,
    coding: CodingConfig,
    cell: tuple[int, int, int, float],
    batch: np.ndarray,
    seed: int,
) -> tuple[simulator.AdversaryPlan, simulator.RoundResult]:
    k, s, e, sigma = cell
    plan = simulator.random_plan(coding, seed=_derived_seed(_PLAN_TAG, seed, *cell))
    workers = simulator.make_workers(
        coding.num_workers,
        latency=_DEFAULT_LATENCY,
        byzantine_sigma={i: sigma for i in plan.byzantine_ids},
    )
    result = simulator.run_round(
        batch, coding, model, workers, plan, seed=_derived_seed(_ROUND_TAG, seed, *cell)
    )
    return plan, result


async def _dispatch_round(
    model: Predictor,
    coding: CodingConfig,
    cell: tuple[int, int, int, float],
    batch: np.ndarray,
    seed: int,
    deadline_ms: float,
):
    k, s, e, sigma = cell
    plan = simulator.random_plan(coding, seed=_derived_seed(_PLAN_TAG, seed, *cell))
    round_seed = _derived_seed(_ROUND_TAG, seed, *cell)
    faults: dict[int, FaultInjection] = {}
    for wid in plan.straggler_ids:
        faults[wid] = FaultInjection(delay_ms=deadline_ms + 1000.0)
    for wid in plan.byzantine_ids:
        base = faults.get(wid, FaultInjection())
        faults[wid] = FaultInjection(
            delay_ms=base.delay_ms,
            noise_sigma=sigma,
            noise_seed=simulator.worker_noise_seed(round_seed, wid),
        )
    servers = []
    try:
        for i in range(coding.num_workers):
            servers.append(await WorkerServer.start(model, fault=faults.get(i)))
        endpoints = [("127.0.0.1", srv.port) for srv in servers]
        result = await dispatch_async(
            batch, coding, endpoints, DispatchPolicy(deadline_ms=deadline_ms)
        )
    finally:
        for srv in servers:
            await srv.stop()
    return plan, result


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the whole sweep; never raises on individual round failures."""
    queries, labels = datasets.resolve_dataset(config.dataset)
    model = _load_model(config)
    if model.input_dim() != queries.shape[1]:
        raise ConfigError(
            f"model expects {model.input_dim()} features, dataset has {queries.shape[1]}"
        )
    rows: list[MetricsRow] = []
    cells = sorted(
        product(config.sweep_k, config.sweep_s, config.sweep_e, config.sweep_sigma)
    )
    for cell in cells:
        k, s, e, sigma = cell
        coding = codec.make_config(k, s, e)
        for round_index, seed in enumerate(config.seeds):
            batch, batch_labels = _round_batch(
                queries, labels, k, _derived_seed(_BATCH_TAG, seed, *cell)
            )
            try:
                if config.mode == "simulate":
                    plan, result = _simulate_round(model, coding, cell, batch, seed)
                    base_argmax = np.asarray(result.base_argmax)
                    coded_argmax = np.asarray(result.coded_argmax)
                    returned = result.returned
                    excluded = result.excluded
                    latency = result.round_latency_ms
                else:
                    plan, net = asyncio.run(
                        _dispatch_round(model, coding, cell, batch, seed, config.deadline_ms)
                    )
                    base_argmax = predict_batch(model, batch).argmax(axis=1)
                    coded_argmax = net.decoded.argmax(axis=1)
                    returned = net.returned
                    excluded = net.excluded
                    latency = net.round_latency_ms
            except (RoundFailureError, InsufficientResultsError, RecoveryError):
                rows.append(_failed_row(config, cell, seed, round_index))
                continue
            rows.append(
                _row_from_round(
                    config,
                    cell,
                    seed,
                    round_index,
                    batch_labels,
                    plan,
                    returned,
                    excluded,
                    base_argmax,
                    coded_argmax,
                    latency,
                )
            )
    return ExperimentResult(config, tuple(rows), tuple(_summarize(rows)))


def _summarize(rows: Sequence[MetricsRow]) -> list[CellSummary]:
    cells: dict[tuple[int, int, int, float], list[MetricsRow]] = {}
    for row in rows:
        cells.setdefault((row.k, row.s, row.e, row.sigma), []).append(row)
    out = []
    for key in sorted(cells):
        group = cells[key]
        ok = [r for r in group if not r.failed]
        out.append(
            CellSummary(
                k=key[0],
                s=key[1],
                e=key[2],
                sigma=key[3],
                rounds=len(group),
                failures=len(group) - len(ok),
                mean_base_accuracy=_mean(r.base_accuracy for r in ok),
                mean_coded_accuracy=_mean(r.coded_accuracy for r in ok),
                min_coded_accuracy=_min(r.coded_accuracy for r in ok),
                mean_agreement=_mean(r.agreement_with_base for r in ok),
                locator_hit_rate=_mean(r.locator_exact_hit for r in ok),
                mean_latency_ms=_mean(r.round_latency_ms for r in ok),
            )
        )
    return out


def _mean(values) -> float:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else float("nan")


def _min(values) -> float:
    vals = [v for v in values if v is not None]
    return float(min(vals)) if vals else float("nan")


def metrics_csv_text(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.to_csv_fields())
    return buf.getvalue()


def summary_csv_text(summaries: Sequence[CellSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "K",
            "S",
            "E",
            "sigma",
            "rounds",
            "failures",
            "mean_base_accuracy",
            "mean_coded_accuracy",
            "min_coded_accuracy",
            "mean_agreement",
            "locator_hit_rate",
            "mean_latency_ms",
        ]
    )
    for c in summaries:
        writer.writerow(
            [
                c.k,
                c.s,
                c.e,
                repr(c.sigma),
                c.rounds,
                c.failures,
                repr(c.mean_base_accuracy),
                repr(c.mean_coded_accuracy),
                repr(c.min_coded_accuracy),
                repr(c.mean_agreement),
                repr(c.locator_hit_rate),
                repr(c.mean_latency_ms),
            ]
        )
    return buf.getvalue()


def summary_table_text(summaries: Sequence[CellSummary]) -> str:
    lines = [
        f"{'K':>3} {'S':>3} {'E':>3} {'sigma':>8} {'rounds':>7} {'fail':>5} "
        f"{'base_acc':>9} {'coded_acc':>10} {'agree':>7} {'loc_hit':>8} {'lat_ms':>8}"
    ]
    for c in summaries:
        lines.append(
            f"{c.k:>3} {c.s:>3} {c.e:>3} {c.sigma:>8g} {c.rounds:>7} {c.failures:>5} "
            f"{c.mean_base_accuracy:>9.4f} {c.mean_coded_accuracy:>10.4f} "
            f"{c.mean_agreement:>7.4f} {c.locator_hit_rate:>8.4f} {c.mean_latency_ms:>8.2f}"
        )
    return "\n".join(lines) + "\n"


def gnuplot_script_text(name: str, summary_csv_path: str) -> str:
    """A plot of per-cell accuracy and agreement against the cell index."""
    return (
        "set datafile separator ','\n"
        f"set title '{name}: per-cell accuracy'\n"
        "set key outside\n"
        "set xlabel 'sweep cell (sorted by K,S,E,sigma)'\n"
        "set ylabel 'rate'\n"
        "set yrange [0:1.05]\n"
        "set grid\n"
        f"plot '{summary_csv_path}' using 0:7 with linespoints title 'base accuracy', \\\n"
        f"     '{summary_csv_path}' using 0:8 with linespoints title 'coded accuracy', \\\n"
        f"     '{summary_csv_path}' using 0:10 with linespoints title 'agreement', \\\n"
        f"     '{summary_csv_path}' using 0:11 with linespoints title 'locator hit rate'\n"
    )


def output_paths(output_path: str) -> dict[str, str]:
    """Derived sibling paths for one metrics CSV path."""
    stem = output_path[:-4] if output_path.endswith(".csv") else output_path
    return {
        "metrics": output_path,
        "summary": f"{stem}_summary.csv",
        "plot": f"{stem}.gp",
    }


def write_experiment_outputs(result: ExperimentResult, output_path: str) -> dict[str, str]:
    """Write metrics CSV, summary CSV, and gnuplot script; returns the paths."""
    paths = output_paths(output_path)
    with open(paths["metrics"], "w", newline="") as fh:
        fh.write(metrics_csv_text(result.rows))
    with open(paths["summary"], "w", newline="") as fh:
        fh.write(summary_csv_text(result.summaries))
    with open(paths["plot"], "w") as fh:
        fh.write(gnuplot_script_text(result.config.name, paths["summary"]))
    return paths
