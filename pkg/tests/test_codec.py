import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coded_inference import chebyshev, codec
from coded_inference.errors import ConfigError, DimensionError, InsufficientResultsError


class TestMakeConfig:
    @pytest.mark.parametrize(
        "k,s,e,n,quorum",
        [
            (2, 1, 0, 2, 2),
            (8, 1, 0, 8, 8),
            (12, 0, 2, 27, 28),
            (1, 1, 0, 1, 1),
            (4, 3, 3, 16, 14),
        ],
    )
    def test_derived_sizes(self, k, s, e, n, quorum):
        cfg = codec.make_config(k, s, e)
        assert (cfg.n, cfg.quorum) == (n, quorum)
        assert cfg.num_workers == n + 1
        assert cfg.overhead == (n + 1) / k

    def test_overhead_examples(self):
        assert codec.make_config(2, 1, 0).overhead == 1.5
        assert codec.make_config(8, 1, 0).overhead_exact == pytest.approx(9 / 8)
        assert codec.make_config(12, 0, 2).overhead_exact.as_integer_ratio() == (7, 3)

    def test_point_count_bound_with_errors(self):
        for k, s, e in itertools.product(range(1, 13), range(0, 4), range(1, 4)):
            cfg = codec.make_config(k, s, e)
            assert cfg.n == 2 * k + 2 * e + s - 1  # equality at the minimal count

    def test_rejects_degenerate_triples(self):
        with pytest.raises(ConfigError):
            codec.make_config(1, 0, 0)
        with pytest.raises(ConfigError):
            codec.make_config(0, 1, 0)
        with pytest.raises(ConfigError):
            codec.make_config(2, -1, 0)

    def test_replication_worker_count(self):
        assert codec.replication_worker_count(12, 0, 2) == 60
        assert codec.replication_worker_count(12, 2, 0) == 36
        assert codec.replication_worker_count(5, 0, 0) == 5


class TestEncode:
    def test_identical_queries_encode_to_themselves(self):
        cfg = codec.make_config(4, 2, 0)
        x = np.tile([2.5, -1.0, 0.25], (4, 1))
        coded = codec.encode(x, cfg)
        assert coded.shape == (cfg.n + 1, 3)
        np.testing.assert_allclose(coded, np.tile([2.5, -1.0, 0.25], (cfg.n + 1, 1)), atol=1e-12)

    def test_single_query_broadcasts(self):
        cfg = codec.make_config(1, 2, 0)
        coded = codec.encode([[3.0, 4.0]], cfg)
        np.testing.assert_array_equal(coded, [[3.0, 4.0]] * (cfg.n + 1))

    def test_two_query_scalar_values(self):
        # Interpolant through (alpha_0, 1), (alpha_1, 0) evaluated at
        # beta = (1, 0, -1); closed forms are (2+sqrt2)/(2 sqrt2), 1/2,
        # (-2+sqrt2)/(2 sqrt2), checked symbolically.
        cfg = codec.make_config(2, 1, 0)
        coded = codec.encode([[1.0], [0.0]], cfg)
        assert coded[1, 0] == 0.5
        assert coded[0, 0] == pytest.approx(1.2071067811865475, abs=1e-15)
        assert coded[2, 0] == pytest.approx(-0.20710678118654752, abs=1e-15)

    def test_scale_equivariance(self):
        cfg = codec.make_config(5, 2, 0)
        rng = np.random.default_rng(11)
        x = rng.normal(size=(5, 4))
        np.testing.assert_allclose(
            codec.encode(3.5 * x, cfg), 3.5 * codec.encode(x, cfg), rtol=1e-12
        )

    def test_rejects_wrong_batch_size(self):
        cfg = codec.make_config(3, 1, 0)
        with pytest.raises(DimensionError):
            codec.encode(np.zeros((2, 4)), cfg)

    def test_rejects_nonfinite(self):
        cfg = codec.make_config(2, 1, 0)
        with pytest.raises(DimensionError):
            codec.encode([[np.nan], [0.0]], cfg)


def _full_return(coded):
    return {i: coded[i] for i in range(coded.shape[0])}


class TestDecode:
    def test_constant_predictions_decode_exactly(self):
        cfg = codec.make_config(5, 3, 0)
        c = np.array([0.2, 0.7, 0.1])
        returned = {i: c for i in range(cfg.n + 1)}
        decoded = codec.decode(returned, cfg)
        np.testing.assert_allclose(decoded, np.tile(c, (5, 1)), atol=1e-12)

    def test_decode_back_at_surviving_beta_recovers_input(self):
        # Evaluating the decoder interpolant at a surviving node must return
        # that worker's value; here via the collision beta_1 == alpha_0.
        cfg = codec.make_config(2, 3, 0)
        assert cfg.n == 4
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 3))
        coded = codec.encode(x, cfg)

        def f(v):
            return np.tanh(v) + 0.1 * v**2

        returned = {i: f(coded[i]) for i in range(cfg.n + 1)}
        decoded = codec.decode(returned, cfg)
        np.testing.assert_array_equal(decoded[0], returned[1])
        np.testing.assert_array_equal(decoded[1], returned[3])

    def test_linear_in_returned_values(self):
        cfg = codec.make_config(3, 2, 0)
        rng = np.random.default_rng(2)
        r1 = {i: rng.normal(size=4) for i in range(cfg.n + 1)}
        r2 = {i: rng.normal(size=4) for i in range(cfg.n + 1)}
        mixed = {i: 2.0 * r1[i] - 0.5 * r2[i] for i in r1}
        np.testing.assert_allclose(
            codec.decode(mixed, cfg),
            2.0 * codec.decode(r1, cfg) - 0.5 * codec.decode(r2, cfg),
            atol=1e-11,
        )

    def test_dict_order_does_not_matter(self):
        cfg = codec.make_config(4, 2, 0)
        rng = np.random.default_rng(9)
        returned = {i: rng.normal(size=2) for i in range(cfg.n + 1)}
        shuffled = {i: returned[i] for i in rng.permutation(list(returned))}
        np.testing.assert_array_equal(codec.decode(returned, cfg), codec.decode(shuffled, cfg))

    def test_insufficient_survivors_rejected(self):
        cfg = codec.make_config(4, 1, 0)
        returned = {i: np.zeros(2) for i in range(3)}
        with pytest.raises(InsufficientResultsError):
            codec.decode(returned, cfg)

    def test_exclusion_counts_against_quorum(self):
        cfg = codec.make_config(2, 0, 1)  # n=5, need 2K+E=5 survivors
        returned = {i: np.zeros(2) for i in range(5)}
        with pytest.raises(InsufficientResultsError):
            codec.decode(returned, cfg, excluded={0})

    def test_every_straggler_subset_finite_and_constant_exact(self):
        # includes the gapped-survivor pole configurations
        for k, s in [(2, 2), (3, 1), (3, 3), (4, 2), (5, 3)]:
            cfg = codec.make_config(k, s, 0)
            c = np.array([1.0, -2.0])
            workers = range(cfg.n + 1)
            for drop in range(s + 1):
                for subset in itertools.combinations(workers, drop):
                    returned = {i: c for i in workers if i not in subset}
                    decoded = codec.decode(returned, cfg)
                    assert np.all(np.isfinite(decoded))
                    np.testing.assert_allclose(decoded, np.tile(c, (k, 1)), atol=1e-9)

    @staticmethod
    def _max_decode_error(k: int, s: int, x: np.ndarray) -> float:
        cfg = codec.make_config(k, s, 0)
        coded = codec.encode(x, cfg)
        returned = {i: np.exp(coded[i]) for i in range(cfg.n + 1)}
        decoded = codec.decode(returned, cfg)
        return float(np.max(np.abs(decoded - np.exp(x))))

    def test_smooth_function_error_shrinks_with_redundancy(self):
        # Fixed smooth scalar map, growing S. Consecutive S steps oscillate
        # (whenever N is a multiple of 2K every query point coincides with a
        # worker node and the error drops to exactly zero, then rebounds), so
        # the decay is asserted along a collision-free doubling ladder of N
        # and as an early-vs-late window comparison.
        k = 4
        x = np.linspace(-0.8, 0.8, k)[:, None]
        ladder = [self._max_decode_error(k, n - k + 1, x) for n in (5, 11, 21, 43, 85)]
        for prev, nxt in zip(ladder, ladder[1:]):
            assert nxt <= prev * 1.10
        early = max(self._max_decode_error(k, n - k + 1, x) for n in range(3, 9))
        late = max(self._max_decode_error(k, n - k + 1, x) for n in range(33, 65))
        assert late <= 0.25 * early

    def test_interpolant_error_halves_as_node_gap_halves(self):
        # sup-norm error of the worker-node interpolant over a dense probe
        # grid, doubling the node count each step: first-order decay in the
        # largest node gap
        k = 4
        x = np.linspace(-0.8, 0.8, k)[:, None]
        alpha = chebyshev.first_kind_nodes(k)
        probes = np.linspace(-0.99, 0.99, 241)
        g = np.array(
            [np.exp(chebyshev.basis_weights(alpha, z) @ x[:, 0]) for z in probes]
        )
        sup_errors = []
        for n in (8, 16, 32, 64):
            beta = chebyshev.second_kind_nodes(n)
            signs = np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
            coded = np.array([chebyshev.basis_weights(alpha, b) @ x[:, 0] for b in beta])
            preds = np.exp(coded)
            r = np.array(
                [chebyshev.signed_basis_weights(beta, signs, z) @ preds for z in probes]
            )
            sup_errors.append(float(np.max(np.abs(r - g))))
        for prev, nxt in zip(sup_errors, sup_errors[1:]):
            assert nxt <= prev * 0.7

    @given(
        st.integers(min_value=2, max_value=8),
        st.integers(min_value=0, max_value=3),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_arbitrary_survivor_sets_decode_finite(self, k, s, rnd):
        cfg = codec.make_config(k, s, 0)
        rng = np.random.default_rng(rnd.getrandbits(32))
        x = rng.normal(size=(k, 2))
        coded = codec.encode(x, cfg)
        drop = rnd.sample(range(cfg.n + 1), rnd.randint(0, s))
        returned = {i: coded[i] for i in range(cfg.n + 1) if i not in drop}
        decoded = codec.decode(returned, cfg)
        assert decoded.shape == (k, 2)
        assert np.all(np.isfinite(decoded))
