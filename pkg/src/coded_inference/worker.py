"""Socket worker: serves model predictions over the binary frame protocol.

A worker holds one immutable predictor and answers PREDICT_REQ frames with
PREDICT_RESP frames. Fault injection (fixed response delay, additive Gaussian
noise) exists so that demos and integration tests can stage stragglers and
Byzantine workers on real sockets; both are off by default.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
from dataclasses import dataclass

import numpy as np

from . import netproto
from .errors import ProtocolError
from .netproto import ErrorCode, Frame, MsgType
from .predictor import Predictor, load_weights, mlp_predictor
from .simulator import corruption_noise

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FaultInjection:
    """Staged misbehavior: delay every prediction, or corrupt it with noise.

    When `noise_seed` is set the noise stream is the same one the cluster
    simulator uses for a byzantine worker with that seed, keyed by request id,
    so networked rounds can be compared bit for bit against simulated ones.
    """

    delay_ms: float = 0.0
    noise_sigma: float = 0.0
    noise_seed: int | None = None


class WorkerServer:
    """Asyncio TCP server wrapping one predictor; use `start` / `stop`."""

    def __init__(self, predictor: Predictor, fault: FaultInjection | None = None):
        self._predictor = predictor
        self._fault = fault or FaultInjection()
        self._server: asyncio.AbstractServer | None = None
        self._entropy = np.random.default_rng()

    @classmethod
    async def start(
        cls,
        predictor: Predictor,
        host: str = "127.0.0.1",
        port: int = 0,
        fault: FaultInjection | None = None,
    ) -> "WorkerServer":
        self = cls(predictor, fault)
        self._server = await asyncio.start_server(self._handle, host, port)
        return self

    @property
    def port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def serve_forever(self) -> None:
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    def _corrupt(self, scores: np.ndarray, request_id: int) -> np.ndarray:
        sigma = self._fault.noise_sigma
        if sigma <= 0:
            return scores
        if self._fault.noise_seed is not None:
            return scores + corruption_noise(
                self._fault.noise_seed, request_id, sigma, scores.size
            )
        return scores + self._entropy.normal(0.0, sigma, scores.size)

    async def _answer(self, frame: Frame) -> Frame:
        if frame.msg_type in (MsgType.HELLO, MsgType.PING):
            payload = bytes([netproto.PROTOCOL_VERSION]) if frame.msg_type == MsgType.HELLO else frame.payload
            return Frame(frame.msg_type, frame.request_id, payload)
        if frame.msg_type != MsgType.PREDICT_REQ:
            return Frame(
                MsgType.ERROR,
                frame.request_id,
                netproto.pack_error(
                    ErrorCode.UNSUPPORTED_TYPE,
                    f"workers do not accept {frame.msg_type.name} frames",
                ),
            )
        try:
            query = netproto.unpack_vector(frame.payload)
        except ProtocolError as exc:
            return Frame(
                MsgType.ERROR,
                frame.request_id,
                netproto.pack_error(ErrorCode.MALFORMED_PAYLOAD, str(exc)),
            )
        if query.shape[0] != self._predictor.input_dim():
            return Frame(
                MsgType.ERROR,
                frame.request_id,
                netproto.pack_error(
                    ErrorCode.DIMENSION_MISMATCH,
                    f"model expects {self._predictor.input_dim()} features, got {query.shape[0]}",
                ),
            )
        try:
            scores = self._predictor.predict(query)
        except Exception as exc:  # surface, do not kill the connection
            log.exception("prediction failed")
            return Frame(
                MsgType.ERROR,
                frame.request_id,
                netproto.pack_error(ErrorCode.INTERNAL, str(exc)),
            )
        scores = self._corrupt(np.asarray(scores, dtype=float), frame.request_id)
        if self._fault.delay_ms > 0:
            await asyncio.sleep(self._fault.delay_ms / 1000.0)
        return Frame(MsgType.PREDICT_RESP, frame.request_id, netproto.pack_vector(scores))

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        try:
            while True:
                try:
                    frame = await netproto.read_frame(reader)
                except asyncio.IncompleteReadError:
                    return  # clean disconnect
                except ProtocolError as exc:
                    # header-level garbage: frame alignment is gone, so report and drop
                    writer.write(
                        netproto.encode_frame(
                            Frame(
                                MsgType.ERROR,
                                0,
                                netproto.pack_error(ErrorCode.MALFORMED_PAYLOAD, str(exc)),
                            )
                        )
                    )
                    await writer.drain()
                    return
                reply = await self._answer(frame)
                writer.write(netproto.encode_frame(reply))
                await writer.drain()
        except (ConnectionResetError, BrokenPipeError):
            log.debug("connection from %s dropped", peer)
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint {text!r} is not host:port")
    return host, int(port)


def add_worker_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--listen", required=True, help="addr:port to listen on")
    parser.add_argument("--weights", required=True, help="path to a weights JSON file")
    parser.add_argument("--inject-delay-ms", type=float, default=0.0)
    parser.add_argument("--inject-noise-sigma", type=float, default=0.0)
    parser.add_argument(
        "--inject-noise-seed",
        type=int,
        default=None,
        help="seed for the injected-noise stream; omit for nondeterministic noise",
    )


async def run_worker(args: argparse.Namespace) -> None:
    host, port = parse_endpoint(args.listen)
    model = mlp_predictor(load_weights(args.weights))
    fault = FaultInjection(
        delay_ms=args.inject_delay_ms,
        noise_sigma=args.inject_noise_sigma,
        noise_seed=args.inject_noise_seed,
    )
    server = await WorkerServer.start(model, host, port, fault)
    log.info("worker listening on %s:%d", host, server.port)
    print(f"listening on {host}:{server.port}", flush=True)
    await server.serve_forever()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="serve predictions over the frame protocol")
    add_worker_args(parser)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    try:
        asyncio.run(run_worker(args))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
