import asyncio
import json
import threading

import numpy as np
import pytest

from coded_inference import cli, codec, datasets, predictor
from coded_inference.service import app
from coded_inference.worker import WorkerServer


@pytest.fixture(scope="module")
def client():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    with TestClient(app) as c:
        yield c


def affine_weights(d=2, c=3, seed=11):
    rng = np.random.default_rng(seed)
    return predictor.WeightsFile(
        format_version=1,
        input_dim=d,
        layers=(
            predictor.Layer(
                c, d,
                tuple(rng.normal(size=c * d).tolist()),
                tuple(rng.normal(size=c).tolist()),
                "identity",
            ),
        ),
    )


class WorkerPool:
    """Live socket workers on a background event loop, for sync test code."""

    def __init__(self, model, count):
        self.loop = asyncio.new_event_loop()
        self.thread = threading.Thread(target=self.loop.run_forever, daemon=True)
        self.thread.start()
        self.servers = [
            asyncio.run_coroutine_threadsafe(WorkerServer.start(model), self.loop).result(5)
            for _ in range(count)
        ]

    @property
    def endpoints(self):
        return [f"127.0.0.1:{srv.port}" for srv in self.servers]

    def close(self):
        for srv in self.servers:
            asyncio.run_coroutine_threadsafe(srv.stop(), self.loop).result(5)
        self.loop.call_soon_threadsafe(self.loop.stop)
        self.thread.join(5)
        self.loop.close()


class TestServiceEndpoints:
    def test_health(self, client):
        doc = client.get("/health").json()
        assert doc["status"] == "ok"

    def test_encode_matches_scalar_hand_value(self, client):
        resp = client.post(
            "/v1/encode", json={"k": 2, "s": 1, "batch": [[1.0], [0.0]]}
        )
        assert resp.status_code == 200
        doc = resp.json()
        np.testing.assert_allclose(
            np.asarray(doc["coded"]).ravel(),
            [1.2071067811865477, 0.5, -0.20710678118654757],
            rtol=0,
            atol=1e-15,
        )
        assert doc["config"]["num_workers"] == 3
        assert doc["config"]["overhead"] == 1.5

    def test_decode_constant_round_trip(self, client):
        returned = {str(i): [0.3, 0.7] for i in range(3)}
        doc = client.post(
            "/v1/decode", json={"k": 2, "s": 1, "returned": returned}
        ).json()
        np.testing.assert_allclose(doc["decoded"], [[0.3, 0.7]] * 2, atol=1e-9)
        assert doc["argmax"] == [1, 1]

    def test_decode_honors_exclusions(self, client):
        cfg = codec.make_config(2, 2, 0)
        batch = np.array([[2.0], [-1.0]])
        coded = codec.encode(batch, cfg)
        returned = {str(i): [float(coded[i, 0])] for i in range(cfg.num_workers)}
        returned["1"] = [99.0]  # poisoned, then excluded
        doc = client.post(
            "/v1/decode",
            json={"k": 2, "s": 2, "returned": returned, "excluded": [1]},
        ).json()
        expected = codec.decode(
            {i: coded[i] for i in range(cfg.num_workers) if i != 1}, cfg
        )
        np.testing.assert_allclose(doc["decoded"], expected, atol=1e-12)

    def test_locate_finds_planted_corruption(self, client):
        model = predictor.mlp_predictor(affine_weights())
        cfg = codec.make_config(2, 0, 1)
        batch = np.array([[0.4, -0.2], [-0.8, 0.6]])
        coded = codec.encode(batch, cfg)
        returned = {
            str(i): [float(v) for v in model.predict(coded[i])]
            for i in range(cfg.num_workers)
        }
        returned["4"] = [v + 7.5 for v in returned["4"]]
        doc = client.post(
            "/v1/locate", json={"k": 2, "e": 1, "returned": returned}
        ).json()
        assert doc["excluded"] == [4]
        assert doc["inconsistent"] is False
        assert doc["residual_after_exclusion"] < 1e-6

    def test_locate_with_no_error_budget_is_empty(self, client):
        returned = {str(i): [0.5] for i in range(3)}
        doc = client.post("/v1/locate", json={"k": 2, "s": 1, "returned": returned}).json()
        assert doc["excluded"] == []
        assert doc["residual_after_exclusion"] is None

    def test_simulate_is_deterministic_and_scored(self, client):
        payload = {"k": 4, "s": 1, "e": 1, "sigma": 2.0, "seed": 3, "dataset": "fixture_digits"}
        a = client.post("/v1/simulate", json=payload).json()
        b = client.post("/v1/simulate", json=payload).json()
        assert a == b
        assert len(a["straggler_ids"]) == 1
        assert len(a["byzantine_ids"]) == 1
        assert a["base_accuracy"] is not None
        assert 0.0 <= a["agreement_rate"] <= 1.0

    def test_simulate_with_explicit_batch_and_weights(self, client, tmp_path):
        path = tmp_path / "affine.json"
        predictor.save_weights(affine_weights(), path)
        batch = [[0.1, 0.2], [0.3, -0.1], [0.0, 0.5]]
        doc = client.post(
            "/v1/simulate",
            json={"k": 3, "s": 1, "seed": 0, "weights": str(path), "batch": batch},
        ).json()
        assert doc["base_accuracy"] is None  # no labels for an ad-hoc batch
        assert len(doc["decoded"]) == 3

    def test_simulate_rejects_batch_without_model(self, client):
        resp = client.post(
            "/v1/simulate", json={"k": 2, "s": 1, "batch": [[0.1], [0.2]]}
        )
        assert resp.status_code == 400
        assert resp.json()["error"] == "ConfigError"

    def test_dispatch_over_live_workers(self, client):
        model = predictor.mlp_predictor(affine_weights())
        pool = WorkerPool(model, 3)
        try:
            batch = [[0.2, -0.4], [0.5, 0.1]]
            doc = client.post(
                "/v1/dispatch",
                json={"k": 2, "s": 1, "workers": pool.endpoints, "batch": batch},
            ).json()
        finally:
            pool.close()
        assert len(doc["returned"]) == 2
        assert len(doc["decoded"]) == 2
        assert doc["inconsistent"] is False

    def test_dispatch_unreachable_workers_is_round_failure(self, client):
        resp = client.post(
            "/v1/dispatch",
            json={
                "k": 2,
                "s": 1,
                "workers": ["127.0.0.1:9", "127.0.0.1:11", "127.0.0.1:13"],
                "batch": [[0.1], [0.2]],
                "deadline_ms": 200.0,
            },
        )
        assert resp.status_code == 409
        doc = resp.json()
        assert doc["error"] == "RoundFailureError"
        assert doc["responsive"] == []

    def test_experiment_runs_and_reports(self, client):
        config = {
            "name": "svc",
            "dataset": "fixture_blobs",
            "sweep": {"k": [3], "s": [1], "e": [0], "sigma": [0.0], "seeds": [0, 1]},
        }
        doc = client.post("/v1/experiment", json={"config": config}).json()
        assert doc["metrics_csv"].splitlines()[0].startswith("experiment,K,S,E")
        assert len(doc["metrics_csv"].splitlines()) == 3
        assert len(doc["cells"]) == 1
        assert doc["cells"][0]["rounds"] == 2
        assert "svc" in doc["gnuplot"]

    def test_experiment_invalid_config_is_400(self, client):
        config = {
            "name": "svc",
            "dataset": "fixture_blobs",
            "sweep": {"k": [1], "s": [0], "e": [0], "sigma": [0.0], "seeds": [0]},
        }
        resp = client.post("/v1/experiment", json={"config": config})
        assert resp.status_code == 400

    def test_missing_fields_fail_validation(self, client):
        assert client.post("/v1/encode", json={"batch": [[1.0]]}).status_code == 422


class TestCli:
    def run_cli(self, *argv):
        return cli.main(list(argv))

    def test_encode_decode_pipeline(self, tmp_path, capsys):
        batch = tmp_path / "batch.csv"
        batch.write_text("1.0\n0.0\n")
        coded_path = tmp_path / "coded.csv"
        assert self.run_cli(
            "encode", "--k", "2", "--s", "1", "--in", str(batch), "--out", str(coded_path)
        ) == 0
        coded = np.loadtxt(coded_path, delimiter=",", ndmin=2)
        np.testing.assert_allclose(
            coded.ravel(), [1.2071067811865477, 0.5, -0.20710678118654757], atol=1e-15
        )

        returned = tmp_path / "returned.json"
        returned.write_text(json.dumps({str(i): [0.3, 0.7] for i in range(3)}))
        assert self.run_cli("decode", "--k", "2", "--s", "1", "--in", str(returned)) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "query_index,argmax,score_0,score_1"
        assert out[1].startswith("0,1,")

    def test_locate_empty_budget_prints_json(self, tmp_path, capsys):
        returned = tmp_path / "returned.json"
        returned.write_text(json.dumps({str(i): [0.5] for i in range(3)}))
        assert self.run_cli("locate", "--k", "2", "--s", "1", "--in", str(returned)) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["excluded"] == []

    def test_simulate_prints_round_summary(self, capsys, tmp_path):
        out = tmp_path / "round.json"
        code = self.run_cli(
            "simulate", "--k", "4", "--s", "1", "--e", "1", "--sigma", "2.0",
            "--seed", "3", "--dataset", "fixture_digits", "--out", str(out),
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "agreement" in text
        assert "accuracy base" in text
        assert len(json.loads(out.read_text())["byzantine_ids"]) == 1

    def test_experiment_writes_outputs(self, tmp_path, capsys):
        config = tmp_path / "exp.json"
        config.write_text(
            json.dumps(
                {
                    "name": "cli",
                    "dataset": "fixture_blobs",
                    "sweep": {"k": [3], "s": [1], "e": [0], "sigma": [0.0], "seeds": [0, 1]},
                }
            )
        )
        metrics = tmp_path / "run.csv"
        assert self.run_cli("experiment", "--config", str(config), "--out", str(metrics)) == 0
        assert metrics.exists()
        assert (tmp_path / "run_summary.csv").exists()
        plot = (tmp_path / "run.gp").read_text()
        assert "run_summary.csv" in plot
        assert "coded_acc" in capsys.readouterr().out

    def test_dispatch_against_live_workers(self, tmp_path, capsys):
        model = predictor.mlp_predictor(affine_weights())
        queries = tmp_path / "queries.csv"
        queries.write_text("0.2,-0.4\n0.5,0.1\n")
        scores = tmp_path / "scores.csv"
        pool = WorkerPool(model, 3)
        try:
            code = self.run_cli(
                "dispatch", "--workers", ",".join(pool.endpoints),
                "--k", "2", "--s", "1", "--e", "0", "--deadline-ms", "5000",
                "--queries", str(queries), "--out", str(scores),
            )
        finally:
            pool.close()
        assert code == 0
        assert "decoded 2 queries" in capsys.readouterr().out
        header = scores.read_text().splitlines()[0]
        assert header.startswith("query_index,argmax,score_0")

    def test_failed_round_exits_nonzero(self, tmp_path, capsys):
        queries = tmp_path / "queries.csv"
        queries.write_text("0.2\n0.5\n")
        with pytest.raises(SystemExit):
            self.run_cli(
                "dispatch", "--workers", "127.0.0.1:9,127.0.0.1:11,127.0.0.1:13",
                "--k", "2", "--s", "1", "--e", "0", "--deadline-ms", "200",
                "--queries", str(queries), "--out", str(tmp_path / "scores.csv"),
            )
        assert "responsive workers: []" in capsys.readouterr().err

    def test_serve_with_missing_weights_fails_cleanly(self, capsys):
        code = self.run_cli(
            "serve", "--listen", "127.0.0.1:0", "--weights", "/nonexistent/w.json"
        )
        assert code == 1
        assert "serve failed" in capsys.readouterr().err

    def test_missing_input_file_fails_cleanly(self, capsys):
        code = self.run_cli("encode", "--k", "2", "--s", "1", "--in", "/nonexistent/b.csv")
        assert code == 1
        assert "encode failed" in capsys.readouterr().err
