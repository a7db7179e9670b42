"""Networked round driver: encode, fan out to workers, decode the fastest quorum.

The dispatcher mirrors the simulator's round semantics over real sockets. It
sends one coded query per worker, decodes as soon as the first `quorum`
responses have arrived, and abandons the rest; a worker that errors, drops the
connection, or misses the deadline is treated as a straggler. Late responses
are never incorporated, which keeps the decode input a deterministic function
of which workers answered in time.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
from dataclasses import dataclass

import numpy as np

from . import codec, locator, netproto
from .codec import CodingConfig
from .errors import ConfigError, ProtocolError, RoundFailureError
from .netproto import Frame, MsgType
from .worker import parse_endpoint


@dataclass(frozen=True)
class DispatchPolicy:
    """Straggler handling knobs; coding replaces retries, so none exist."""

    deadline_ms: float
    retry_count: int = 0

    def __post_init__(self):
        if self.deadline_ms <= 0:
            raise ConfigError("deadline_ms must be positive")
        if self.retry_count != 0:
            raise ConfigError("stragglers are never retried; retry_count is fixed at 0")


@dataclass(frozen=True)
class DispatchResult:
    """Outcome of one networked round.

    `returned` lists the quorum snapshot in arrival order; `latencies_ms` are
    wall-clock measurements and carry no reproducibility promise, unlike the
    decoded scores which depend only on the responding set.
    """

    returned: tuple[int, ...]
    latencies_ms: dict[int, float]
    excluded: tuple[int, ...]
    decoded: np.ndarray
    round_latency_ms: float
    inconsistent: bool


@dataclass(frozen=True)
class _Reply:
    worker_id: int
    scores: np.ndarray
    latency_ms: float


class _WorkerUnavailable(Exception):
    """Transport failure or ERROR frame; the worker counts as a straggler."""


async def _query_worker(
    endpoint: tuple[str, int], worker_id: int, coded_query: np.ndarray, started: float
) -> _Reply:
    loop = asyncio.get_running_loop()
    try:
        reader, writer = await asyncio.open_connection(*endpoint)
    except OSError as exc:
        raise _WorkerUnavailable(f"worker {worker_id}: {exc}") from exc
    try:
        request = Frame(
            MsgType.PREDICT_REQ, worker_id, netproto.pack_vector(coded_query)
        )
        writer.write(netproto.encode_frame(request))
        await writer.drain()
        while True:
            try:
                frame = await netproto.read_frame(reader)
            except (asyncio.IncompleteReadError, ProtocolError, OSError) as exc:
                raise _WorkerUnavailable(f"worker {worker_id}: {exc}") from exc
            if frame.msg_type == MsgType.PREDICT_RESP and frame.request_id == worker_id:
                scores = netproto.unpack_vector(frame.payload)
                return _Reply(worker_id, scores, (loop.time() - started) * 1000.0)
            if frame.msg_type == MsgType.ERROR:
                code, message = netproto.unpack_error(frame.payload)
                raise _WorkerUnavailable(f"worker {worker_id} error {code}: {message}")
            # unrelated frame types are ignored; keep reading
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError, OSError):
            pass


async def dispatch_async(
    batch: np.ndarray,
    config: CodingConfig,
    endpoints: list[tuple[str, int]],
    policy: DispatchPolicy,
) -> DispatchResult:
    """Run one coded round against live workers; see the module docstring."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] != config.k:
        raise ConfigError(f"batch must be ({config.k}, d)")
    if len(endpoints) != config.num_workers:
        raise ConfigError(
            f"need {config.num_workers} worker endpoints, got {len(endpoints)}"
        )
    coded = codec.encode(batch, config)
    loop = asyncio.get_running_loop()
    started = loop.time()
    deadline = started + policy.deadline_ms / 1000.0
    tasks = {
        asyncio.create_task(_query_worker(endpoints[i], i, coded[i], started)): i
        for i in range(config.num_workers)
    }
    pending: set[asyncio.Task] = set(tasks)
    arrived: list[_Reply] = []
    try:
        while pending and len(arrived) < config.quorum:
            remaining = deadline - loop.time()
            if remaining <= 0:
                break
            done, pending = await asyncio.wait(
                pending, timeout=remaining, return_when=asyncio.FIRST_COMPLETED
            )
            fresh = []
            for task in done:
                try:
                    fresh.append(task.result())
                except _WorkerUnavailable:
                    continue
            # near-simultaneous completions land in one batch; order them stably
            fresh.sort(key=lambda r: (r.latency_ms, r.worker_id))
            arrived.extend(fresh)
    finally:
        for task in pending:
            task.cancel()
        if pending:
            await asyncio.gather(*pending, return_exceptions=True)
    if len(arrived) < config.quorum:
        raise RoundFailureError(
            f"{len(arrived)} responses by deadline, quorum is {config.quorum}",
            responsive={r.worker_id for r in arrived},
        )
    snapshot = arrived[: config.quorum]
    returned = {r.worker_id: r.scores for r in snapshot}
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
    return DispatchResult(
        returned=tuple(r.worker_id for r in snapshot),
        latencies_ms={r.worker_id: r.latency_ms for r in snapshot},
        excluded=tuple(excluded),
        decoded=decoded,
        round_latency_ms=snapshot[-1].latency_ms,
        inconsistent=inconsistent,
    )


def dispatch(
    batch: np.ndarray,
    config: CodingConfig,
    endpoints: list[tuple[str, int]],
    policy: DispatchPolicy,
) -> DispatchResult:
    return asyncio.run(dispatch_async(batch, config, endpoints, policy))


def load_query_batch(path: str) -> np.ndarray:
    """Read a (K, d) query batch from CSV, one query per row."""
    batch = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(batch, dtype=float)


def write_scores_csv(path: str, decoded: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "argmax"] + [f"score_{j}" for j in range(decoded.shape[1])])
        for i, row in enumerate(decoded):
            writer.writerow([i, int(np.argmax(row))] + [repr(float(v)) for v in row])


def add_dispatch_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--workers", required=True, help="comma-separated addr:port list, one per worker"
    )
    parser.add_argument("--k", type=int, required=True)
    parser.add_argument("--s", type=int, required=True)
    parser.add_argument("--e", type=int, required=True)
    parser.add_argument("--deadline-ms", type=float, required=True)
    parser.add_argument("--queries", required=True, help="CSV file, one query per row")
    parser.add_argument("--out", required=True, help="CSV file for decoded scores")


def run_dispatch(args: argparse.Namespace) -> DispatchResult:
    config = codec.make_config(args.k, args.s, args.e)
    endpoints = [parse_endpoint(part) for part in args.workers.split(",") if part]
    batch = load_query_batch(args.queries)
    result = dispatch(batch, config, endpoints, DispatchPolicy(deadline_ms=args.deadline_ms))
    write_scores_csv(args.out, result.decoded)
    return result


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="run one coded round against live workers")
    add_dispatch_args(parser)
    args = parser.parse_args(argv)
    try:
        result = run_dispatch(args)
    except RoundFailureError as exc:
        print(f"round failed: {exc} (responsive: {sorted(exc.responsive)})")
        return 1
    note = f"; excluded {list(result.excluded)}" if result.excluded else ""
    print(
        f"decoded {result.decoded.shape[0]} queries from workers {list(result.returned)}"
        f" in {result.round_latency_ms:.1f} ms{note}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
