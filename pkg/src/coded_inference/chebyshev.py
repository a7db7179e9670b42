"""Chebyshev node families and Berrut barycentric basis evaluation.

The codec places queries at Chebyshev points of the first kind and coded
queries at Chebyshev points of the second kind, then moves values between
the two families with the alternating-sign barycentric basis

    l_i(z) = [s_i / (z - x_i)] / sum_k [s_k / (z - x_k)],   s_i = (-1)^i.

With strictly alternating signs the normalizing denominator never vanishes
for real z, so the basis is pole-free on the real line. Decoding from a
survivor subset keeps each point's original sign, which can break the
alternation; `signed_basis_weights` handles the (rare) resulting
near-singular denominators with the algebraic limit of the barycentric
form (see below).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coded_inference.errors import ConfigError

# Absolute distance below which an evaluation point is treated as sitting on a
# node; the basis then degenerates to the indicator vector (the exact algebraic
# limit). Second-kind nodes can coincide bitwise with first-kind nodes, so this
# branch is load-bearing, not defensive.
NODE_HIT_TOL = 1e-12

# Relative threshold |denominator| / sum(|terms|) under which the barycentric
# ratio is numerically singular. Only reachable for survivor subsets whose
# signs no longer alternate; full node sets never trigger it.
_SINGULAR_REL_TOL = 1e-6


def first_kind_nodes(k: int) -> np.ndarray:
    """Return the K Chebyshev points of the first kind, strictly decreasing.

    Mathematically cos((2j+1)*pi / 2K) for j = 0..K-1. Computed through the
    equivalent sine form sin(pi*(K-1-2j) / 2K) so that mirrored nodes are
    exact negations of each other and the middle node of an odd family is
    exactly 0.0.
    """
    if k < 1:
        raise ConfigError(f"need at least one first-kind node, got K={k}")
    j = np.arange(k)
    return np.sin(np.pi * (k - 1 - 2 * j) / (2 * k))


def second_kind_nodes(n: int) -> np.ndarray:
    """Return the N+1 Chebyshev points of the second kind, strictly decreasing.

    Mathematically cos(i*pi / N) for i = 0..N, computed as
    sin(pi*(N-2i) / 2N); the endpoints are exactly +1 and -1 and the middle
    node of an even family is exactly 0.0. N = 0 is rejected: the family is
    undefined there (single-query pipelines never need it because the
    one-node basis is identically 1).
    """
    if n < 1:
        raise ConfigError(f"need N >= 1 for second-kind nodes, got N={n}")
    i = np.arange(n + 1)
    return np.sin(np.pi * (n - 2 * i) / (2 * n))


@dataclass(frozen=True)
class NodeSet:
    """The paired node families for one coding configuration.

    alpha: K first-kind nodes carrying the queries.
    beta: N+1 second-kind nodes carrying the coded queries, one per worker.
    """

    alpha: np.ndarray
    beta: np.ndarray
    k: int
    n: int

    @classmethod
    def build(cls, k: int, n: int) -> "NodeSet":
        return cls(alpha=first_kind_nodes(k), beta=second_kind_nodes(n), k=k, n=n)


def _check_distinct(nodes: np.ndarray) -> None:
    s = np.sort(nodes)
    if len(s) > 1 and np.min(np.diff(s)) <= 0.0:
        raise ConfigError("basis nodes must be pairwise distinct")


def signed_basis_weights(nodes: np.ndarray, signs: np.ndarray, z: float) -> np.ndarray:
    """Evaluate barycentric weights with explicit per-node signs.

    Returns w with w[i] the coefficient of value i in the interpolant at z;
    the weights sum to 1. If z is within NODE_HIT_TOL of a node the indicator
    vector for that node is returned.

    When the signed denominator is numerically zero (possible only when the
    signs do not strictly alternate along the sorted nodes), the weights are
    replaced by the limit of the barycentric ratio along the real line,
    obtained by raising the per-term power 1/(z-x_i) -> 1/(z-x_i)^p until the
    denominator is well-conditioned. For data on which the singularity is
    removable (e.g. identical values) this limit is exact; otherwise it is a
    deterministic finite stand-in at a point where the interpolant itself is
    unbounded.
    """
    nodes = np.asarray(nodes, dtype=float)
    signs = np.asarray(signs, dtype=float)
    if nodes.shape != signs.shape:
        raise ConfigError("nodes and signs must have matching shapes")
    _check_distinct(nodes)

    diffs = z - nodes
    hits = np.abs(diffs) <= NODE_HIT_TOL
    if np.any(hits):
        w = np.zeros_like(nodes)
        w[int(np.argmax(hits))] = 1.0
        return w

    inv = 1.0 / diffs
    for power in range(1, 6):
        terms = signs * inv**power
        denom = terms.sum()
        if abs(denom) > _SINGULAR_REL_TOL * np.abs(terms).sum():
            return terms / denom
    raise ConfigError(f"barycentric denominator degenerate at z={z!r}")


def basis_weights(nodes: np.ndarray, z: float) -> np.ndarray:
    """Berrut basis l_i(z) over `nodes` with the alternating signs (-1)^i."""
    nodes = np.asarray(nodes, dtype=float)
    signs = np.where(np.arange(len(nodes)) % 2 == 0, 1.0, -1.0)
    return signed_basis_weights(nodes, signs, z)


def max_node_gap(nodes: np.ndarray) -> float:
    """Largest gap between adjacent nodes; convergence-rate diagnostic only."""
    s = np.sort(np.asarray(nodes, dtype=float))
    return float(np.max(np.diff(s))) if len(s) > 1 else 0.0
