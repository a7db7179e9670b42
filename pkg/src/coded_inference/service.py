"""HTTP service exposing the codec, locator, simulator, and dispatcher.

Every pipeline operation is a POST endpoint with a pydantic request/response
model, so one long-running process can serve many clients. The CLI is a thin
client of this app; by default it mounts the app in-process, so no server
needs to be running for one-shot use.
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import codec, datasets, dispatcher, experiments, locator, simulator
from .errors import (
    CodedInferenceError,
    ConfigError,
    DimensionError,
    InconsistentRoundError,
    InsufficientPointsError,
    InsufficientResultsError,
    ProtocolError,
    RecoveryError,
    RoundFailureError,
    WeightsFormatError,
)
from .predictor import Predictor, load_weights, mlp_predictor, predict_batch

SERVICE_VERSION = "1"

# client-side mistakes vs rounds that legitimately failed to complete
_BAD_REQUEST_ERRORS = (
    ConfigError,
    DimensionError,
    InsufficientPointsError,
    ProtocolError,
    WeightsFormatError,
)
_ROUND_FAILURE_ERRORS = (
    InsufficientResultsError,
    InconsistentRoundError,
    RecoveryError,
    RoundFailureError,
)

_SIM_BATCH_TAG = 14


class CodingParams(BaseModel):
    k: int
    s: int = 0
    e: int = 0

    def config(self) -> codec.CodingConfig:
        return codec.make_config(self.k, self.s, self.e)


class CodingSummary(BaseModel):
    k: int
    s: int
    e: int
    n: int
    quorum: int
    num_workers: int
    overhead: float

    @classmethod
    def from_config(cls, cfg: codec.CodingConfig) -> "CodingSummary":
        return cls(
            k=cfg.k,
            s=cfg.s,
            e=cfg.e,
            n=cfg.n,
            quorum=cfg.quorum,
            num_workers=cfg.num_workers,
            overhead=cfg.overhead,
        )


class EncodeRequest(CodingParams):
    batch: list[list[float]]


class EncodeResponse(BaseModel):
    coded: list[list[float]]
    config: CodingSummary


class DecodeRequest(CodingParams):
    returned: dict[int, list[float]]
    excluded: list[int] = Field(default_factory=list)


class DecodeResponse(BaseModel):
    decoded: list[list[float]]
    argmax: list[int]


class LocateRequest(CodingParams):
    returned: dict[int, list[float]]


class LocateResponse(BaseModel):
    excluded: list[int]
    vote_counts: dict[int, int]
    residual_after_exclusion: float | None
    inconsistent: bool


class SimulateRequest(CodingParams):
    sigma: float = 0.0
    seed: int = 0
    dataset: str = ""
    weights: str = ""
    batch: list[list[float]] | None = None
    num_stragglers: int | None = None
    num_byzantine: int | None = None


class SimulateResponse(BaseModel):
    returned: list[int]
    excluded: list[int]
    straggler_ids: list[int]
    byzantine_ids: list[int]
    decoded: list[list[float]]
    base_argmax: list[int]
    coded_argmax: list[int]
    agreement_rate: float
    round_latency_ms: float
    inconsistent: bool
    base_accuracy: float | None
    coded_accuracy: float | None


class DispatchRequest(CodingParams):
    workers: list[str]
    batch: list[list[float]]
    deadline_ms: float = 5000.0


class DispatchResponse(BaseModel):
    returned: list[int]
    excluded: list[int]
    decoded: list[list[float]]
    argmax: list[int]
    latencies_ms: dict[int, float]
    round_latency_ms: float
    inconsistent: bool


class ExperimentRequest(BaseModel):
    config: dict


class ExperimentResponse(BaseModel):
    metrics_csv: str
    summary_csv: str
    summary_table: str
    gnuplot: str
    cells: list[dict]


def _matrix(rows: list[list[float]], what: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{what} must be a non-empty 2-d array")
    return arr


def _returned_map(doc: dict[int, list[float]]) -> dict[int, np.ndarray]:
    if not doc:
        raise DimensionError("returned map must not be empty")
    widths = {len(v) for v in doc.values()}
    if len(widths) != 1:
        raise DimensionError("returned prediction vectors must share one length")
    return {int(i): np.asarray(v, dtype=float) for i, v in doc.items()}


def _sim_model_and_batch(req: SimulateRequest, cfg: codec.CodingConfig):
    """Resolve the predictor, query batch, and labels for one simulated round."""
    labels = None
    if req.weights:
        try:
            model: Predictor = mlp_predictor(load_weights(req.weights))
        except OSError as exc:
            raise ConfigError(f"weights file unreadable: {exc}") from exc
    elif req.dataset in datasets.FIXTURE_DATASETS:
        model = datasets.load_fixture_predictor(datasets.fixture_model_for(req.dataset))
    elif req.batch is not None:
        raise ConfigError("an explicit batch needs a weights path or bundled dataset")
    else:
        raise ConfigError("give a dataset tag, or a batch plus weights")
    if req.batch is not None:
        batch = _matrix(req.batch, "batch")
    else:
        queries, all_labels = datasets.resolve_dataset(req.dataset)
        rng = np.random.default_rng([_SIM_BATCH_TAG, req.seed, cfg.k])
        rows = rng.choice(len(queries), size=cfg.k, replace=len(queries) < cfg.k)
        batch, labels = queries[rows], all_labels[rows]
    return model, batch, labels


def create_app() -> FastAPI:
    app = FastAPI(title="coded-inference", version=SERVICE_VERSION)

    @app.exception_handler(CodedInferenceError)
    async def _coded_error(request: Request, exc: CodedInferenceError):
        if isinstance(exc, _BAD_REQUEST_ERRORS):
            status = 400
        elif isinstance(exc, _ROUND_FAILURE_ERRORS):
            status = 409
        else:
            status = 500
        detail: dict = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, RoundFailureError):
            detail["responsive"] = sorted(exc.responsive)
        return JSONResponse(status_code=status, content=detail)

    @app.get("/health")
    async def health():
        return {"status": "ok", "service": "coded-inference", "version": SERVICE_VERSION}

    @app.post("/v1/encode", response_model=EncodeResponse)
    async def encode(req: EncodeRequest) -> EncodeResponse:
        cfg = req.config()
        coded = codec.encode(_matrix(req.batch, "batch"), cfg)
        return EncodeResponse(
            coded=coded.tolist(), config=CodingSummary.from_config(cfg)
        )

    @app.post("/v1/decode", response_model=DecodeResponse)
    async def decode(req: DecodeRequest) -> DecodeResponse:
        cfg = req.config()
        decoded = codec.decode(_returned_map(req.returned), cfg, set(req.excluded))
        return DecodeResponse(
            decoded=decoded.tolist(), argmax=decoded.argmax(axis=1).tolist()
        )

    @app.post("/v1/locate", response_model=LocateResponse)
    async def locate(req: LocateRequest) -> LocateResponse:
        cfg = req.config()
        returned = _returned_map(req.returned)
        if cfg.e == 0:
            return LocateResponse(
                excluded=[],
                vote_counts={},
                residual_after_exclusion=None,
                inconsistent=False,
            )
        report = locator.locate_corrupted(returned, cfg)
        residual = locator.exclusion_residual(returned, cfg, set(report.located))
        return LocateResponse(
            excluded=list(report.located),
            vote_counts=report.vote_counts,
            residual_after_exclusion=residual,
            inconsistent=residual > locator.INCONSISTENCY_RESIDUAL_TOL,
        )

    @app.post("/v1/simulate", response_model=SimulateResponse)
    async def simulate_round(req: SimulateRequest) -> SimulateResponse:
        cfg = req.config()
        model, batch, labels = _sim_model_and_batch(req, cfg)
        plan = simulator.random_plan(
            cfg,
            seed=req.seed,
            num_stragglers=req.num_stragglers,
            num_byzantine=req.num_byzantine,
        )
        workers = simulator.make_workers(
            cfg.num_workers,
            byzantine_sigma={i: req.sigma for i in plan.byzantine_ids},
        )
        result = simulator.run_round(batch, cfg, model, workers, plan, seed=req.seed)
        base_acc = coded_acc = None
        if labels is not None:
            base_acc = float(np.mean(np.asarray(result.base_argmax) == labels))
            coded_acc = float(np.mean(np.asarray(result.coded_argmax) == labels))
        return SimulateResponse(
            returned=list(result.returned),
            excluded=list(result.excluded),
            straggler_ids=sorted(plan.straggler_ids),
            byzantine_ids=sorted(plan.byzantine_ids),
            decoded=result.decoded.tolist(),
            base_argmax=list(result.base_argmax),
            coded_argmax=list(result.coded_argmax),
            agreement_rate=result.agreement_rate,
            round_latency_ms=result.round_latency_ms,
            inconsistent=result.inconsistent,
            base_accuracy=base_acc,
            coded_accuracy=coded_acc,
        )

    @app.post("/v1/dispatch", response_model=DispatchResponse)
    async def dispatch_round(req: DispatchRequest) -> DispatchResponse:
        cfg = req.config()
        endpoints = [dispatcher.parse_endpoint(spec) for spec in req.workers]
        result = await dispatcher.dispatch_async(
            _matrix(req.batch, "batch"),
            cfg,
            endpoints,
            dispatcher.DispatchPolicy(deadline_ms=req.deadline_ms),
        )
        return DispatchResponse(
            returned=list(result.returned),
            excluded=list(result.excluded),
            decoded=result.decoded.tolist(),
            argmax=result.decoded.argmax(axis=1).tolist(),
            latencies_ms=result.latencies_ms,
            round_latency_ms=result.round_latency_ms,
            inconsistent=result.inconsistent,
        )

    @app.post("/v1/experiment", response_model=ExperimentResponse)
    async def experiment(req: ExperimentRequest) -> ExperimentResponse:
        config = experiments.ExperimentConfig.from_dict(req.config)
        result = experiments.run_experiment(config)
        # the gnuplot script references the summary CSV by the basename it
        # will have next to the configured metrics path
        summary_name = os.path.basename(
            experiments.output_paths(config.output or "experiment.csv")["summary"]
        )
        return ExperimentResponse(
            metrics_csv=experiments.metrics_csv_text(result.rows),
            summary_csv=experiments.summary_csv_text(result.summaries),
            summary_table=experiments.summary_table_text(result.summaries),
            gnuplot=experiments.gnuplot_script_text(config.name, summary_name),
            cells=[vars(c) for c in result.summaries],
        )

    return app


app = create_app()
