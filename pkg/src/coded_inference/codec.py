"""Encode query batches onto worker nodes and decode predictions from a quorum.

A batch of K queries is interpolated by a Berrut rational function anchored
at the first-kind nodes; evaluating that interpolant at the N+1 second-kind
nodes yields one coded query per worker. Decoding runs the same construction
in reverse: a rational interpolant through the surviving workers' prediction
vectors, evaluated back at the first-kind nodes.

Both maps are fixed linear combinations of their inputs, so the codec is
model-agnostic: it never looks inside a prediction vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from coded_inference import chebyshev
from coded_inference.errors import ConfigError, DimensionError, InsufficientResultsError


@dataclass(frozen=True)
class CodingConfig:
    """Batch size K, straggler budget S, Byzantine budget E, and derived sizes.

    n is the largest worker index (workers 0..n, so n+1 workers total).
    quorum is the number of returned results the decoder waits for:
    K when E = 0, 2(K+E) otherwise.
    """

    k: int
    s: int
    e: int
    n: int
    quorum: int

    @property
    def num_workers(self) -> int:
        return self.n + 1

    @property
    def overhead(self) -> float:
        return (self.n + 1) / self.k

    @property
    def overhead_exact(self) -> Fraction:
        return Fraction(self.n + 1, self.k)


def make_config(k: int, s: int, e: int) -> CodingConfig:
    """Derive worker count and quorum size from the (K, S, E) budgets.

    E = 0 uses N = K + S - 1 with quorum K; E > 0 uses N = 2(K+E) + S - 1
    with quorum 2(K+E), the minimal point count admitting error location.
    """
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    if s < 0 or e < 0:
        raise ConfigError(f"S and E must be >= 0, got S={s}, E={e}")
    if e == 0:
        n = k + s - 1
        quorum = k
    else:
        n = 2 * (k + e) + s - 1
        quorum = 2 * (k + e)
    if n < 1:
        raise ConfigError(
            f"(K={k}, S={s}, E={e}) yields N={n} < 1; the coded node family is undefined"
        )
    return CodingConfig(k=k, s=s, e=e, n=n, quorum=quorum)


def replication_worker_count(k: int, s: int, e: int) -> int:
    """Workers a replication scheme needs for the same budgets: (2E+1)K when
    tolerating E corruptions, (S+1)K when tolerating stragglers only."""
    if e > 0:
        return (2 * e + 1) * k
    return (s + 1) * k


def _as_batch(queries) -> np.ndarray:
    arr = np.asarray(queries, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"queries must be a K x d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("queries must be finite")
    return arr


def encode(queries, config: CodingConfig) -> np.ndarray:
    """Encode K queries into N+1 coded queries, one per worker.

    `queries` is a (K, d) array (a list of K equal-length vectors is
    accepted; scalars are treated as d = 1). Returns an (N+1, d) array where
    row i is the rational interpolant through the queries evaluated at the
    i-th second-kind node. Identical queries encode to themselves because the
    basis weights sum to 1.
    """
    batch = _as_batch(queries)
    if batch.shape[0] != config.k:
        raise DimensionError(
            f"batch has {batch.shape[0]} queries but config expects K={config.k}"
        )
    if config.k == 1:
        # Single basis function is identically 1: every worker gets the query.
        return np.repeat(batch, config.n + 1, axis=0)
    alpha = chebyshev.first_kind_nodes(config.k)
    beta = chebyshev.second_kind_nodes(config.n)
    weights = np.stack([chebyshev.basis_weights(alpha, z) for z in beta])
    return weights @ batch


def decode(
    returned: Mapping[int, np.ndarray],
    config: CodingConfig,
    excluded: frozenset[int] | set[int] = frozenset(),
) -> np.ndarray:
    """Recover the K approximate predictions from surviving worker results.

    `returned` maps worker index -> prediction vector; `excluded` removes
    workers flagged by the error locator. Survivors must number at least K
    when E = 0 and at least 2K + E otherwise. All survivors are used, not
    just a quorum-sized subset: extra interpolation points only refine the
    approximation. Each survivor keeps the sign (-1)^i of its original
    worker index i regardless of which other workers survived.

    Returns a (K, C) array; row j is the decoded prediction for query j.
    """
    survivors = sorted(set(returned) - set(excluded))
    if any(i < 0 or i > config.n for i in survivors):
        raise DimensionError(f"worker indices must lie in 0..{config.n}")
    need = config.k if config.e == 0 else 2 * config.k + config.e
    if len(survivors) < need:
        raise InsufficientResultsError(
            f"{len(survivors)} surviving results, need at least {need}"
        )

    values = np.stack([np.asarray(returned[i], dtype=float) for i in survivors])
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise DimensionError("prediction vectors must share one dimension C")

    alpha = chebyshev.first_kind_nodes(config.k)
    beta = chebyshev.second_kind_nodes(config.n)
    nodes = beta[survivors]
    signs = np.where(np.asarray(survivors) % 2 == 0, 1.0, -1.0)
    out = np.empty((config.k, values.shape[1]))
    for j, z in enumerate(alpha):
        w = chebyshev.signed_basis_weights(nodes, signs, z)
        out[j] = w @ values
    return out
