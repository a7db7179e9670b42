"""Deterministic in-process simulation of coded serving rounds.

One round encodes a K-query batch across N+1 simulated workers, samples
per-worker latencies, corrupts the planned Byzantine workers' outputs with
seeded Gaussian noise, takes the quorum, locates and excludes corrupted
responses, and decodes.  All randomness flows from the round seed through
fixed derivation tags, so identical inputs give bit-identical results; there
are no threads and no real clock.

The corruption stream for worker w is keyed by (noise seed derived from the
round seed and w, request id).  The networked worker accepts the same seed
through a flag and draws from the same stream, which is what makes the
simulated and the socket-served rounds comparable bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterator, Literal, Sequence

import numpy as np

from . import codec, locator
from .codec import CodingConfig
from .errors import ConfigError, DimensionError, RoundFailureError
from .predictor import Predictor, predict_batch

_LATENCY_TAG = 1
_NOISE_TAG = 2
_PLAN_TAG = 3

# extra wall-clock charged to a planned straggler in baselines that cannot
# proceed without it; coded rounds never wait for stragglers
STRAGGLER_HOLDUP_MS = 10_000.0

AdversaryHook = Callable[[np.ndarray, int], np.ndarray]


def worker_noise_seed(round_seed: int, worker_id: int) -> int:
    """Seed for worker worker_id's corruption stream within a round."""
    seq = np.random.SeedSequence([round_seed, _NOISE_TAG, worker_id])
    return int(seq.generate_state(1)[0])


def corruption_noise(noise_seed: int, request_id: int, sigma: float, c: int) -> np.ndarray:
    """Additive Gaussian corruption, reproducible across process boundaries."""
    return np.random.default_rng([noise_seed, request_id]).normal(0.0, sigma, c)


@dataclass(frozen=True)
class LatencyModel:
    """Per-response latency: a base plus an optional heavy-tail component."""

    base_ms: float = 10.0
    tail: Literal["fixed", "exponential", "lognormal"] = "fixed"
    mean_ms: float = 0.0
    mu: float = 0.0
    sigma_ln: float = 0.0

    def __post_init__(self) -> None:
        if self.base_ms < 0:
            raise ConfigError("base_ms must be nonnegative")
        if self.tail not in ("fixed", "exponential", "lognormal"):
            raise ConfigError(f"unknown latency tail {self.tail!r}")
        if self.tail == "exponential" and self.mean_ms < 0:
            raise ConfigError("exponential tail needs mean_ms >= 0")
        if self.tail == "lognormal" and self.sigma_ln < 0:
            raise ConfigError("lognormal tail needs sigma_ln >= 0")

    def sample(self, rng: np.random.Generator) -> float:
        if self.tail == "exponential":
            return self.base_ms + float(rng.exponential(self.mean_ms))
        if self.tail == "lognormal":
            return self.base_ms + float(rng.lognormal(self.mu, self.sigma_ln))
        return self.base_ms


@dataclass(frozen=True)
class WorkerSpec:
    id: int
    latency: LatencyModel = LatencyModel()
    byzantine: bool = False
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")


def make_workers(
    count: int,
    latency: LatencyModel | Sequence[LatencyModel] = LatencyModel(),
    byzantine_sigma: dict[int, float] | None = None,
) -> tuple[WorkerSpec, ...]:
    """Dense worker table; byzantine_sigma maps worker id to its noise scale."""
    sigmas = dict(byzantine_sigma or {})
    if isinstance(latency, LatencyModel):
        models = [latency] * count
    else:
        models = list(latency)
        if len(models) != count:
            raise ConfigError(f"got {len(models)} latency models for {count} workers")
    return tuple(
        WorkerSpec(
            id=i,
            latency=models[i],
            byzantine=i in sigmas,
            noise_sigma=float(sigmas.get(i, 0.0)),
        )
        for i in range(count)
    )


@dataclass(frozen=True)
class AdversaryPlan:
    """Per-round choice of corrupted and straggling workers.

    A worker may appear in both sets: it then straggles, so its corruption
    never reaches the decoder.
    """

    byzantine_ids: frozenset[int] = frozenset()
    straggler_ids: frozenset[int] = frozenset()


def random_plan(
    config: CodingConfig,
    seed: int,
    num_byzantine: int | None = None,
    num_stragglers: int | None = None,
) -> AdversaryPlan:
    """Uniformly drawn plan within the configured budgets."""
    e = config.e if num_byzantine is None else num_byzantine
    s = config.s if num_stragglers is None else num_stragglers
    if e > config.e or s > config.s:
        raise ConfigError("plan exceeds the configured adversary budgets")
    rng = np.random.default_rng([seed, _PLAN_TAG])
    ids = np.arange(config.num_workers)
    byz = rng.choice(ids, size=e, replace=False) if e else np.empty(0, dtype=int)
    slow = rng.choice(ids, size=s, replace=False) if s else np.empty(0, dtype=int)
    return AdversaryPlan(
        byzantine_ids=frozenset(int(i) for i in byz),
        straggler_ids=frozenset(int(i) for i in slow),
    )


def enumerate_straggler_plans(config: CodingConfig) -> Iterator[AdversaryPlan]:
    """Every straggler subset of size 0..S, no corruption."""
    ids = range(config.num_workers)
    for size in range(config.s + 1):
        for subset in combinations(ids, size):
            yield AdversaryPlan(straggler_ids=frozenset(subset))


@dataclass(frozen=True)
class RoundResult:
    returned: tuple[int, ...]
    latencies_ms: dict[int, float]
    excluded: tuple[int, ...]
    decoded: np.ndarray
    base_argmax: tuple[int, ...]
    coded_argmax: tuple[int, ...]
    agreement: tuple[bool, ...]
    round_latency_ms: float
    inconsistent: bool = False

    @property
    def agreement_rate(self) -> float:
        return float(np.mean(self.agreement))


def _check_round_inputs(
    batch: np.ndarray,
    config: CodingConfig,
    workers: Sequence[WorkerSpec],
    plan: AdversaryPlan,
) -> np.ndarray:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] != config.k:
        raise DimensionError(f"batch must be ({config.k}, d)")
    if len(workers) != config.num_workers:
        raise ConfigError(
            f"need {config.num_workers} workers for this configuration, got {len(workers)}"
        )
    if sorted(w.id for w in workers) != list(range(len(workers))):
        raise ConfigError("worker ids must be dense and unique")
    if len(plan.byzantine_ids) > config.e:
        raise ConfigError("plan corrupts more workers than the E budget")
    if len(plan.straggler_ids) > config.s:
        raise ConfigError("plan stalls more workers than the S budget")
    out_of_range = (plan.byzantine_ids | plan.straggler_ids) - set(range(len(workers)))
    if out_of_range:
        raise ConfigError(f"plan names unknown workers {sorted(out_of_range)}")
    return batch


def _sample_latencies(
    workers: Sequence[WorkerSpec], seed: int
) -> dict[int, float]:
    return {
        w.id: w.latency.sample(np.random.default_rng([seed, _LATENCY_TAG, w.id]))
        for w in workers
    }


def run_round(
    batch: np.ndarray,
    config: CodingConfig,
    predictor: Predictor,
    workers: Sequence[WorkerSpec],
    plan: AdversaryPlan,
    seed: int,
    adversary_hook: AdversaryHook | None = None,
) -> RoundResult:
    """Simulate one coded round end to end.

    `adversary_hook`, when given, replaces the Gaussian corruption applied to
    planned Byzantine survivors; it receives (clean vector, worker id) and is
    an exploration aid with no networked counterpart.
    """
    batch = _check_round_inputs(batch, config, workers, plan)
    by_id = {w.id: w for w in workers}
    latencies = _sample_latencies(workers, seed)
    survivors = sorted(
        (i for i in by_id if i not in plan.straggler_ids),
        key=lambda i: (latencies[i], i),
    )
    if len(survivors) < config.quorum:
        raise RoundFailureError(
            f"only {len(survivors)} workers can return, quorum is {config.quorum}",
            responsive=set(survivors),
        )
    coded = codec.encode(batch, config)
    returned: dict[int, np.ndarray] = {}
    for i in survivors:
        vec = predictor.predict(coded[i])
        if i in plan.byzantine_ids:
            if adversary_hook is not None:
                vec = adversary_hook(vec, i)
            elif by_id[i].noise_sigma > 0:
                vec = vec + corruption_noise(
                    worker_noise_seed(seed, i), i, by_id[i].noise_sigma, vec.size
                )
        returned[i] = vec
    if config.e > 0:
        report = locator.locate_corrupted(returned, config)
        excluded = report.located
        inconsistent = (
            locator.exclusion_residual(returned, config, set(excluded))
            > locator.INCONSISTENCY_RESIDUAL_TOL
        )
    else:
        excluded = ()
        inconsistent = False
    decoded = codec.decode(returned, config, excluded=set(excluded))
    base = predict_batch(predictor, batch)
    base_argmax = tuple(int(i) for i in base.argmax(axis=1))
    coded_argmax = tuple(int(i) for i in decoded.argmax(axis=1))
    return RoundResult(
        returned=tuple(survivors),
        latencies_ms=latencies,
        excluded=tuple(excluded),
        decoded=decoded,
        base_argmax=base_argmax,
        coded_argmax=coded_argmax,
        agreement=tuple(b == c for b, c in zip(base_argmax, coded_argmax)),
        round_latency_ms=latencies[survivors[config.quorum - 1]],
        inconsistent=inconsistent,
    )


def replication_round(
    batch: np.ndarray,
    e: int,
    predictor: Predictor,
    workers: Sequence[WorkerSpec],
    plan: AdversaryPlan,
    seed: int,
) -> RoundResult:
    """Replication baseline: each query runs on 2E+1 workers, majority wins.

    Every replica must report before its query can be voted on, so planned
    stragglers charge `STRAGGLER_HOLDUP_MS` to the round clock instead of
    being ridden out the way the coded path rides them out.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2:
        raise DimensionError("batch must be (K, d)")
    k = batch.shape[0]
    replicas = 2 * e + 1
    if len(workers) != replicas * k:
        raise ConfigError(
            f"replication with K={k}, E={e} needs {replicas * k} workers, got {len(workers)}"
        )
    if sorted(w.id for w in workers) != list(range(len(workers))):
        raise ConfigError("worker ids must be dense and unique")
    by_id = {w.id: w for w in workers}
    latencies = _sample_latencies(workers, seed)
    effective = {
        i: latencies[i] + (STRAGGLER_HOLDUP_MS if i in plan.straggler_ids else 0.0)
        for i in by_id
    }
    outputs: dict[int, np.ndarray] = {}
    for i in sorted(by_id):
        vec = predictor.predict(batch[i // replicas])
        if i in plan.byzantine_ids and by_id[i].noise_sigma > 0:
            vec = vec + corruption_noise(
                worker_noise_seed(seed, i), i, by_id[i].noise_sigma, vec.size
            )
        outputs[i] = vec
    decoded = np.zeros((k, predictor.num_classes()))
    for j in range(k):
        group = list(range(j * replicas, (j + 1) * replicas))
        votes: dict[int, list[int]] = {}
        for i in group:
            votes.setdefault(int(outputs[i].argmax()), []).append(i)
        winner = max(sorted(votes), key=lambda cls: len(votes[cls]))
        decoded[j] = outputs[min(votes[winner])]
    base = predict_batch(predictor, batch)
    base_argmax = tuple(int(i) for i in base.argmax(axis=1))
    coded_argmax = tuple(int(i) for i in decoded.argmax(axis=1))
    arrival = sorted(by_id, key=lambda i: (effective[i], i))
    return RoundResult(
        returned=tuple(arrival),
        latencies_ms=latencies,
        excluded=(),
        decoded=decoded,
        base_argmax=base_argmax,
        coded_argmax=coded_argmax,
        agreement=tuple(b == c for b, c in zip(base_argmax, coded_argmax)),
        round_latency_ms=max(effective.values()),
    )
