"""Command-line client for the coded prediction-serving pipeline.

Every subcommand except `serve` is a thin client of the HTTP service: by
default the app is mounted in-process (no server required), and `--api URL`
points the same calls at a remote instance. `serve` runs a socket worker
directly, since workers speak the binary frame protocol rather than HTTP.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import json
import sys

import numpy as np

from . import experiments, worker
from .dispatcher import add_dispatch_args, load_query_batch, parse_endpoint  # noqa: F401
from .errors import CodedInferenceError


def _make_client(api: str | None):
    if api:
        import httpx

        return httpx.Client(base_url=api, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # this environment's starlette warns about its own test-client shim
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json()
        except ValueError:
            detail = {"detail": resp.text}
        print(f"error {resp.status_code}: {detail.get('detail', detail)}", file=sys.stderr)
        if "responsive" in detail:
            print(f"responsive workers: {detail['responsive']}", file=sys.stderr)
        raise SystemExit(1)
    return resp.json()


def _load_matrix(path: str) -> list[list[float]]:
    return np.loadtxt(path, delimiter=",", ndmin=2).tolist()


def _matrix_csv_text(rows: list[list[float]]) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in rows) + "\n"


def _scores_csv_text(decoded: list[list[float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    width = len(decoded[0]) if decoded else 0
    writer.writerow(["query_index", "argmax"] + [f"score_{j}" for j in range(width)])
    for i, row in enumerate(decoded):
        arg = int(np.argmax(row))
        writer.writerow([i, arg] + [repr(float(v)) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _coding_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, required=True)
    parser.add_argument("--s", type=int, default=0)
    parser.add_argument("--e", type=int, default=0)


def cmd_encode(client, args) -> int:
    doc = _post(
        client,
        "/v1/encode",
        {"k": args.k, "s": args.s, "e": args.e, "batch": _load_matrix(args.infile)},
    )
    _emit(_matrix_csv_text(doc["coded"]), args.out)
    return 0


def cmd_decode(client, args) -> int:
    with open(args.infile) as fh:
        returned = json.load(fh)
    excluded = [int(v) for v in args.excluded.split(",") if v] if args.excluded else []
    doc = _post(
        client,
        "/v1/decode",
        {"k": args.k, "s": args.s, "e": args.e, "returned": returned, "excluded": excluded},
    )
    _emit(_scores_csv_text(doc["decoded"]), args.out)
    return 0


def cmd_locate(client, args) -> int:
    with open(args.infile) as fh:
        returned = json.load(fh)
    doc = _post(
        client, "/v1/locate", {"k": args.k, "s": args.s, "e": args.e, "returned": returned}
    )
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_simulate(client, args) -> int:
    payload = {
        "k": args.k,
        "s": args.s,
        "e": args.e,
        "sigma": args.sigma,
        "seed": args.seed,
        "dataset": args.dataset,
        "weights": args.weights,
        "num_stragglers": args.num_stragglers,
        "num_byzantine": args.num_byzantine,
    }
    if args.queries:
        payload["batch"] = _load_matrix(args.queries)
    doc = _post(client, "/v1/simulate", payload)
    print(
        f"round: returned {doc['returned']} "
        f"stragglers {doc['straggler_ids']} byzantine {doc['byzantine_ids']} "
        f"excluded {doc['excluded']}"
    )
    line = f"agreement {doc['agreement_rate']:.4f} in {doc['round_latency_ms']:.1f} ms"
    if doc["coded_accuracy"] is not None:
        line += f"; accuracy base {doc['base_accuracy']:.4f} coded {doc['coded_accuracy']:.4f}"
    print(line)
    if args.out:
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_dispatch(client, args) -> int:
    batch = load_query_batch(args.queries)
    doc = _post(
        client,
        "/v1/dispatch",
        {
            "k": args.k,
            "s": args.s,
            "e": args.e,
            "workers": [part for part in args.workers.split(",") if part],
            "batch": batch.tolist(),
            "deadline_ms": args.deadline_ms,
        },
    )
    _emit(_scores_csv_text(doc["decoded"]), args.out)
    note = f"; excluded {doc['excluded']}" if doc["excluded"] else ""
    print(
        f"decoded {len(doc['decoded'])} queries from workers {doc['returned']}"
        f" in {doc['round_latency_ms']:.1f} ms{note}"
    )
    return 0


def cmd_experiment(client, args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    if args.out:
        config["output"] = args.out
    doc = _post(client, "/v1/experiment", {"config": config})
    output = config.get("output", "")
    if output:
        paths = experiments.output_paths(output)
        _emit(doc["metrics_csv"], paths["metrics"])
        _emit(doc["summary_csv"], paths["summary"])
        _emit(doc["gnuplot"], paths["plot"])
        print(f"wrote {paths['metrics']}, {paths['summary']}, {paths['plot']}")
    sys.stdout.write(doc["summary_table"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coded-inference",
        description="coded prediction serving: codec utilities, simulator, and cluster client",
    )
    parser.add_argument(
        "--api",
        default=None,
        help="base URL of a running service; default handles everything in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a query batch into coded worker inputs")
    _coding_flags(p)
    p.add_argument("--in", dest="infile", required=True, help="CSV batch, one query per row")
    p.add_argument("--out", default=None, help="CSV output; default stdout")

    p = sub.add_parser("decode", help="decode worker results back into predictions")
    _coding_flags(p)
    p.add_argument(
        "--in", dest="infile", required=True,
        help="JSON map of worker index to prediction vector",
    )
    p.add_argument("--excluded", default="", help="comma-separated worker indices to drop")
    p.add_argument("--out", default=None, help="CSV output; default stdout")

    p = sub.add_parser("locate", help="locate corrupted workers from returned results")
    _coding_flags(p)
    p.add_argument(
        "--in", dest="infile", required=True,
        help="JSON map of worker index to prediction vector",
    )
    p.add_argument("--out", default=None, help="JSON report output; default stdout")

    p = sub.add_parser("simulate", help="run one simulated coded round")
    _coding_flags(p)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", default="", help="bundled dataset tag or csv:<path>")
    p.add_argument("--weights", default="", help="weights JSON path (for external batches)")
    p.add_argument("--queries", default="", help="CSV batch; default draws from the dataset")
    p.add_argument("--num-stragglers", type=int, default=None)
    p.add_argument("--num-byzantine", type=int, default=None)
    p.add_argument("--out", default=None, help="write the full round result as JSON")

    p = sub.add_parser("serve", help="run a prediction worker on the frame protocol")
    worker.add_worker_args(p)

    p = sub.add_parser("dispatch", help="run one coded round against live workers")
    add_dispatch_args(p)

    p = sub.add_parser("experiment", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="metrics CSV path (overrides config output)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        try:
            asyncio.run(worker.run_worker(args))
        except KeyboardInterrupt:
            pass
        except (OSError, CodedInferenceError) as exc:
            print(f"serve failed: {exc}", file=sys.stderr)
            return 1
        return 0
    handlers = {
        "encode": cmd_encode,
        "decode": cmd_decode,
        "locate": cmd_locate,
        "simulate": cmd_simulate,
        "dispatch": cmd_dispatch,
        "experiment": cmd_experiment,
    }
    with _make_client(args.api) as client:
        try:
            return handlers[args.command](client, args)
        except OSError as exc:
            print(f"{args.command} failed: {exc}", file=sys.stderr)
            return 1


if __name__ == "__main__":
    raise SystemExit(main())
