import json

import numpy as np
import pytest

from coded_inference import chebyshev, codec, predictor
from coded_inference.errors import DimensionError, WeightsFormatError


class TestConstantPredictor:
    def test_returns_value_for_any_query(self):
        p = predictor.constant_predictor([1.0, 0.0])
        np.testing.assert_array_equal(p.predict(np.zeros(3)), [1.0, 0.0])
        np.testing.assert_array_equal(p.predict(np.full(17, 9.9)), [1.0, 0.0])
        assert p.num_classes() == 2

    def test_pipeline_passthrough(self):
        cfg = codec.make_config(5, 2, 0)
        p = predictor.constant_predictor(np.arange(4.0))
        queries = np.random.default_rng(1).normal(size=(5, 3))
        coded = codec.encode(queries, cfg)
        returned = {i: p.predict(coded[i]) for i in range(cfg.n + 1)}
        decoded = codec.decode(returned, cfg)
        np.testing.assert_allclose(decoded, np.tile(np.arange(4.0), (5, 1)), atol=1e-9)

    def test_rejects_bad_value(self):
        with pytest.raises(DimensionError):
            predictor.constant_predictor([])
        with pytest.raises(DimensionError):
            predictor.constant_predictor([1.0, np.nan])


class TestAffinePredictor:
    def test_identity(self):
        p = predictor.affine_predictor(np.eye(3), np.zeros(3))
        x = np.array([0.2, -1.5, 4.0])
        np.testing.assert_array_equal(p.predict(x), x)

    def test_zero_weight_gives_bias(self):
        p = predictor.affine_predictor(np.zeros((2, 4)), [5.0, -1.0])
        np.testing.assert_array_equal(p.predict(np.ones(4)), [5.0, -1.0])

    def test_commutes_with_encoding(self):
        # coding an affine model's inputs then predicting equals predicting
        # then coding the outputs, since the basis weights sum to one
        rng = np.random.default_rng(42)
        k, d, c = 5, 4, 3
        w = rng.normal(size=(c, d))
        b = rng.normal(size=c)
        p = predictor.affine_predictor(w, b)
        queries = rng.normal(size=(k, d))
        alpha = chebyshev.first_kind_nodes(k)
        for z in rng.uniform(-1, 1, size=20):
            weights = chebyshev.basis_weights(alpha, z)
            lhs = p.predict(weights @ queries)
            rhs = weights @ np.stack([p.predict(q) for q in queries])
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_dimension_mismatch(self):
        p = predictor.affine_predictor(np.eye(3), np.zeros(3))
        with pytest.raises(DimensionError):
            p.predict(np.zeros(4))

    def test_rejects_nonfinite(self):
        with pytest.raises(DimensionError):
            predictor.affine_predictor(np.full((2, 2), np.inf), np.zeros(2))


def small_weights(activations=("relu", "identity")) -> predictor.WeightsFile:
    rng = np.random.default_rng(7)
    dims = [3, 5, 4][: len(activations) + 1]
    layers = []
    for i, act in enumerate(activations):
        rows, cols = dims[i + 1], dims[i]
        layers.append(
            predictor.Layer(
                rows=rows,
                cols=cols,
                weights=tuple(rng.normal(size=rows * cols).tolist()),
                bias=tuple(rng.normal(size=rows).tolist()),
                activation=act,
            )
        )
    return predictor.WeightsFile(
        format_version=predictor.WEIGHTS_FORMAT_VERSION, input_dim=dims[0], layers=tuple(layers)
    )


class TestMlpPredictor:
    def test_single_identity_layer_is_affine(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=4)
        weights = predictor.WeightsFile(
            format_version=1,
            input_dim=3,
            layers=(
                predictor.Layer(4, 3, tuple(w.ravel().tolist()), tuple(b.tolist()), "identity"),
            ),
        )
        mlp = predictor.mlp_predictor(weights)
        affine = predictor.affine_predictor(w, b)
        x = rng.normal(size=3)
        np.testing.assert_array_equal(mlp.predict(x), affine.predict(x))
        assert mlp.input_dim() == 3 and mlp.num_classes() == 4

    def test_zero_hidden_relu_gives_final_bias(self):
        weights = predictor.WeightsFile(
            format_version=1,
            input_dim=2,
            layers=(
                predictor.Layer(3, 2, (0.0,) * 6, (-1.0, 0.0, 2.0), "relu"),
                predictor.Layer(2, 3, (0.0,) * 6, (0.5, -0.5), "identity"),
            ),
        )
        mlp = predictor.mlp_predictor(weights)
        np.testing.assert_array_equal(mlp.predict(np.array([9.0, -9.0])), [0.5, -0.5])

    def test_softmax_normalizes_and_survives_large_inputs(self):
        weights = predictor.WeightsFile(
            format_version=1,
            input_dim=2,
            layers=(predictor.Layer(3, 2, tuple(range(6)), (0.0,) * 3, "softmax"),),
        )
        mlp = predictor.mlp_predictor(weights)
        out = mlp.predict(np.array([1e4, -1e4]))
        assert np.all(np.isfinite(out))
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(out >= 0)

    def test_deterministic(self):
        mlp = predictor.mlp_predictor(small_weights())
        x = np.array([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(mlp.predict(x), mlp.predict(x))

    def test_query_dimension_checked(self):
        mlp = predictor.mlp_predictor(small_weights())
        with pytest.raises(DimensionError):
            mlp.predict(np.zeros(7))

    def test_batch_matches_per_query(self):
        mlp = predictor.mlp_predictor(small_weights())
        rng = np.random.default_rng(11)
        queries = rng.normal(size=(6, 3))
        batch = predictor.predict_batch(mlp, queries)
        for i, q in enumerate(queries):
            np.testing.assert_array_equal(batch[i], mlp.predict(q))


class TestWeightsFormat:
    def test_round_trip_is_bit_exact(self, tmp_path):
        weights = small_weights(("relu", "softmax"))
        path = tmp_path / "model.json"
        predictor.save_weights(weights, path)
        loaded = predictor.load_weights(path)
        assert loaded == weights
        # canonical serialization is a fixpoint
        assert predictor.dumps_weights(loaded) == path.read_text()

    def test_awkward_floats_survive(self, tmp_path):
        values = (0.1, 1 / 3, 1e-300, 123456789.123456789, -0.0, 2**-1074)
        weights = predictor.WeightsFile(
            format_version=1,
            input_dim=3,
            layers=(predictor.Layer(2, 3, values, (1e300, -1e-7), "identity"),),
        )
        path = tmp_path / "w.json"
        predictor.save_weights(weights, path)
        loaded = predictor.load_weights(path)
        for a, b in zip(loaded.layers[0].weights, values):
            assert (a == b) and (np.signbit(a) == np.signbit(b))

    def test_rejects_bad_documents(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(WeightsFormatError):
            predictor.load_weights(bad)
        with pytest.raises(WeightsFormatError):
            predictor.weights_from_dict({"format_version": 1, "input_dim": 3})

    def test_rejects_version_and_chain_breaks(self):
        good = predictor.weights_to_dict(small_weights())
        wrong_version = dict(good, format_version=99)
        with pytest.raises(WeightsFormatError):
            predictor.weights_from_dict(wrong_version)
        broken = json.loads(json.dumps(good))
        broken["layers"][1]["cols"] = 9
        with pytest.raises(WeightsFormatError):
            predictor.weights_from_dict(broken)
        miscounted = json.loads(json.dumps(good))
        miscounted["layers"][0]["weights"] = [1.0, 2.0]
        with pytest.raises(WeightsFormatError):
            predictor.weights_from_dict(miscounted)
        tagless = json.loads(json.dumps(good))
        tagless["layers"][0]["activation"] = "tanh"
        with pytest.raises(WeightsFormatError):
            predictor.weights_from_dict(tagless)

    def test_rejects_nonfinite_entries(self):
        doc = predictor.weights_to_dict(small_weights())
        doc["layers"][0]["bias"][0] = float("nan")
        with pytest.raises(WeightsFormatError):
            predictor.weights_from_dict(doc)
