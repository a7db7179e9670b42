"""Locating corrupted worker responses by rational fitting.

A worker that tampers with its prediction cannot be detected from any single
value in isolation, but the honest responses jointly lie close to a low-order
rational function of the worker node positions.  Fitting numerator and
denominator polynomials P and Q of degree < K+E to the survivor values forces
the denominator to become small exactly at the tampered nodes, because that is
the only way the fit can absorb an arbitrary outlier.  Ranking |Q(x_i)| and
taking the E smallest therefore exposes the corrupted indices.

Two normalizations of the fit are provided.  The practical route pins the
constant term of Q to 1 and solves an overdetermined least-squares system; the
analytic route keeps the system homogeneous and takes the singular direction
of least action.  Per-class voting aggregates scalar locations across the C
coordinates of the prediction vectors.

`bw_recover_rational` additionally reconstructs the underlying rational
function itself, with an exact-arithmetic mode over `fractions.Fraction` used
by tests; the serving path never enables it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Literal, Mapping, Sequence

import numpy as np

from .chebyshev import second_kind_nodes
from .codec import CodingConfig
from .errors import DimensionError, InsufficientPointsError, RecoveryError

Normalization = Literal["q0_fixed", "homogeneous"]

# relative least-squares residual above which a fitted round is reported as
# holding more corruptions than the configured budget
INCONSISTENCY_RESIDUAL_TOL = 1e-3

_DEGENERATE_Q_TOL = 1e-9


@dataclass(frozen=True)
class DensePolynomial:
    """Real polynomial stored densely in ascending degree order.

    Trailing zero coefficients are kept; `degree` reports the structural
    length, not the mathematical degree.
    """

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise DimensionError("polynomial needs at least one coefficient")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        result = np.zeros_like(np.asarray(x, dtype=float))
        for c in reversed(self.coeffs):
            result = result * x + c
        return result if result.ndim else float(result)


@dataclass(frozen=True)
class BwSystem:
    """Linear system enforcing P(x_i) = y_i Q(x_i) at the survivor points.

    Rows follow the order of the supplied points (callers pass them sorted by
    worker index).  Under `q0_fixed` the unknowns are (P_0..P_{K+E-1},
    Q_1..Q_{K+E-1}) and the right-hand side is y; under `homogeneous` Q_0
    joins the unknowns and the right-hand side is zero.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    normalization: Normalization
    k: int
    e: int

    @property
    def num_unknowns(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class SolveResult:
    p: DensePolynomial
    q: DensePolynomial
    relative_residual: float
    rank: int
    full_rank: bool

    @property
    def inconsistent(self) -> bool:
        """True when the fit both lost rank and failed to explain the data."""
        return (not self.full_rank) and self.relative_residual > INCONSISTENCY_RESIDUAL_TOL


@dataclass(frozen=True)
class LocatorReport:
    """Outcome of per-class location with majority voting.

    `candidate_matrix` holds one row per class coordinate, each row listing E
    worker indices in ascending-|Q| order.  `located` is the E most frequent
    entries of the whole matrix, presented sorted ascending.
    """

    candidate_matrix: np.ndarray
    located: tuple[int, ...]
    vote_counts: dict[int, int]
    max_relative_residual: float


@dataclass(frozen=True)
class RationalFunction:
    numerator: DensePolynomial
    denominator: DensePolynomial

    def __call__(self, x):
        return self.numerator(x) / self.denominator(x)


def _as_points_values(points, values) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(points, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise DimensionError("points and values must be one-dimensional")
    if x.shape != y.shape:
        raise DimensionError(f"got {x.size} points but {y.size} values")
    return x, y


def build_system(
    points: Sequence[float],
    values: Sequence[float],
    k: int,
    e: int,
    normalization: Normalization = "q0_fixed",
) -> BwSystem:
    """Assemble the fitting system for degree-(K+E-1) numerator and denominator."""
    x, y = _as_points_values(points, values)
    if normalization not in ("q0_fixed", "homogeneous"):
        raise ValueError(f"unknown normalization {normalization!r}")
    quorum = 2 * (k + e)
    if x.size < quorum:
        raise InsufficientPointsError(
            f"need at least {quorum} points for K={k}, E={e}, got {x.size}"
        )
    if np.unique(x).size != x.size:
        raise DimensionError("evaluation points must be pairwise distinct")
    m = k + e
    vand = x[:, None] ** np.arange(m)
    if normalization == "q0_fixed":
        matrix = np.hstack([vand, -y[:, None] * vand[:, 1:]])
        rhs = y.copy()
    else:
        matrix = np.hstack([vand, -y[:, None] * vand])
        rhs = np.zeros(x.size)
    return BwSystem(matrix=matrix, rhs=rhs, normalization=normalization, k=k, e=e)


def solve_system_full(system: BwSystem) -> SolveResult:
    """Solve for P and Q with rank and residual diagnostics attached."""
    m = system.k + system.e
    if system.normalization == "q0_fixed":
        coef, _, rank, _ = np.linalg.lstsq(system.matrix, system.rhs, rcond=None)
        p = coef[:m]
        q = np.concatenate([[1.0], coef[m:]])
        misfit = system.matrix @ coef - system.rhs
        scale = max(float(np.linalg.norm(system.rhs)), 1e-300)
        residual = float(np.linalg.norm(misfit)) / scale
    else:
        _, singulars, vt = np.linalg.svd(system.matrix, full_matrices=True)
        vec = vt[-1]
        pivot = int(np.argmax(np.abs(vec)))
        if vec[pivot] < 0:
            vec = -vec
        p = vec[:m]
        q = vec[m:]
        top = float(singulars[0]) if singulars.size else 0.0
        tol = max(system.matrix.shape) * np.finfo(float).eps * max(top, 1.0)
        rank = int(np.sum(singulars > tol))
        # unit-norm direction: smallest relative action stands in for residual
        residual = float(singulars[-1] / top) if singulars.size and top > 0 else 0.0
    full = rank >= system.num_unknowns - (system.normalization == "homogeneous")
    return SolveResult(
        p=DensePolynomial(tuple(p)),
        q=DensePolynomial(tuple(q)),
        relative_residual=residual,
        rank=rank,
        full_rank=bool(full),
    )


def solve_system(system: BwSystem) -> tuple[DensePolynomial, DensePolynomial]:
    result = solve_system_full(system)
    return result.p, result.q


def locate_errors_scalar(
    points: Sequence[float],
    values: Sequence[float],
    k: int,
    e: int,
    normalization: Normalization = "q0_fixed",
) -> tuple[int, ...]:
    """Positions of the E smallest |Q(x_i)|, ascending by |Q|, ties by position.

    Positions index into `points`; callers supply points sorted by worker
    index, which makes positional tie-breaking identical to worker-index
    tie-breaking.
    """
    if e < 1:
        raise ValueError("scalar location needs E >= 1")
    system = build_system(points, values, k, e, normalization)
    result = solve_system_full(system)
    magnitudes = np.abs(result.q(np.asarray(points, dtype=float)))
    order = np.lexsort((np.arange(magnitudes.size), magnitudes))
    return tuple(int(i) for i in order[:e])


def locate_errors_majority(
    predictions: Mapping[int, np.ndarray],
    points: Sequence[float],
    k: int,
    e: int,
    c: int,
    normalization: Normalization = "q0_fixed",
) -> LocatorReport:
    """Per-class scalar location with a majority vote across C coordinates.

    `predictions` maps worker index to its length-C prediction vector;
    `points` is indexed by worker id (position i holds worker i's node).
    """
    if c < 1:
        raise DimensionError("need at least one class coordinate")
    workers = sorted(predictions)
    stacked = []
    for w in workers:
        vec = np.asarray(predictions[w], dtype=float).ravel()
        if vec.size != c:
            raise DimensionError(
                f"worker {w} returned {vec.size} coordinates, expected {c}"
            )
        stacked.append(vec)
    if e == 0:
        return LocatorReport(
            candidate_matrix=np.zeros((c, 0), dtype=int),
            located=(),
            vote_counts={},
            max_relative_residual=0.0,
        )
    values = np.stack(stacked)
    nodes = np.asarray(points, dtype=float)[workers]
    candidate = np.zeros((c, e), dtype=int)
    worst = 0.0
    for j in range(c):
        system = build_system(nodes, values[:, j], k, e, normalization)
        result = solve_system_full(system)
        worst = max(worst, result.relative_residual)
        magnitudes = np.abs(result.q(nodes))
        order = np.lexsort((np.arange(magnitudes.size), magnitudes))
        candidate[j] = [workers[i] for i in order[:e]]
    located, votes = majority_vote(candidate, e)
    return LocatorReport(
        candidate_matrix=candidate,
        located=located,
        vote_counts=votes,
        max_relative_residual=worst,
    )


def majority_vote(candidate_matrix: np.ndarray, e: int) -> tuple[tuple[int, ...], dict[int, int]]:
    """E most frequent entries of the candidate matrix, ties by ascending index."""
    votes = Counter(int(v) for v in candidate_matrix.flat)
    winners = sorted(votes.items(), key=lambda item: (-item[1], item[0]))[:e]
    return tuple(sorted(w for w, _ in winners)), dict(votes)


def locate_corrupted(
    returned: Mapping[int, np.ndarray],
    config: CodingConfig,
    normalization: Normalization = "q0_fixed",
) -> LocatorReport:
    """Locate corrupted workers from a round's returned prediction vectors."""
    if not returned:
        raise InsufficientPointsError("no returned predictions")
    c = int(np.asarray(next(iter(returned.values()))).size)
    beta = second_kind_nodes(config.n)
    return locate_errors_majority(returned, beta, config.k, config.e, c, normalization)


def exclusion_residual(
    returned: Mapping[int, np.ndarray],
    config: CodingConfig,
    excluded: frozenset[int] | set[int],
) -> float:
    """Worst per-class fit residual after dropping the excluded workers.

    With all corrupted workers excluded, the remainder should be explained by
    a degree < K rational with no locator factor; a residual above
    `INCONSISTENCY_RESIDUAL_TOL` suggests more corruptions than the budget.
    """
    survivors = sorted(set(returned) - set(excluded))
    beta = second_kind_nodes(config.n)
    nodes = beta[survivors]
    values = np.stack([np.asarray(returned[w], dtype=float).ravel() for w in survivors])
    worst = 0.0
    for j in range(values.shape[1]):
        system = build_system(nodes, values[:, j], config.k, 0, "q0_fixed")
        worst = max(worst, solve_system_full(system).relative_residual)
    return worst


def bw_recover_rational(
    points: Sequence[float],
    values: Sequence[float],
    k: int,
    e: int,
    normalization: Normalization = "homogeneous",
) -> RationalFunction:
    """Reconstruct the rational function underlying corrupted evaluations.

    Requires at least 2K+2E points of which all but at most E carry exact
    evaluations of a rational function with numerator and denominator degree
    below K.  Raises `RecoveryError` when the fitted denominator degenerates
    to zero.
    """
    system = build_system(points, values, k, e, normalization)
    result = solve_system_full(system)
    q_scale = float(np.max(np.abs(result.q.coeffs)))
    total = max(q_scale, float(np.max(np.abs(result.p.coeffs))), 1e-300)
    if q_scale <= _DEGENERATE_Q_TOL * total:
        raise RecoveryError("denominator fit collapsed to zero")
    return RationalFunction(numerator=result.p, denominator=result.q)


ExactPoly = tuple[Fraction, ...]


def _exact_nullspace(rows: list[list[Fraction]], width: int) -> list[list[Fraction]]:
    """Basis of the nullspace of an exact rational matrix via elimination."""
    matrix = [row[:] for row in rows]
    pivot_cols: list[int] = []
    r = 0
    for col in range(width):
        pivot = next((i for i in range(r, len(matrix)) if matrix[i][col] != 0), None)
        if pivot is None:
            continue
        matrix[r], matrix[pivot] = matrix[pivot], matrix[r]
        inv = matrix[r][col]
        matrix[r] = [v / inv for v in matrix[r]]
        for i in range(len(matrix)):
            if i != r and matrix[i][col] != 0:
                factor = matrix[i][col]
                matrix[i] = [a - factor * b for a, b in zip(matrix[i], matrix[r])]
        pivot_cols.append(col)
        r += 1
        if r == len(matrix):
            break
    free_cols = [c for c in range(width) if c not in pivot_cols]
    basis = []
    for free in free_cols:
        vec = [Fraction(0)] * width
        vec[free] = Fraction(1)
        for row_idx, piv in enumerate(pivot_cols):
            vec[piv] = -matrix[row_idx][free]
        basis.append(vec)
    return basis


def bw_recover_rational_exact(
    points: Sequence[Fraction],
    values: Sequence[Fraction],
    k: int,
    e: int,
) -> tuple[ExactPoly, ExactPoly]:
    """Exact-arithmetic recovery over rationals; test oracle, not a serving path.

    Returns the coefficient tuples (P, Q) of an exact nullspace solution with
    Q not identically zero.  Raises `RecoveryError` when every solution has a
    zero denominator, the degenerate case excluded by the recovery guarantee.
    """
    n_pts = len(points)
    if n_pts != len(values):
        raise DimensionError(f"got {n_pts} points but {len(values)} values")
    if n_pts < 2 * (k + e):
        raise InsufficientPointsError(
            f"need at least {2 * (k + e)} points for K={k}, E={e}, got {n_pts}"
        )
    if len(set(points)) != n_pts:
        raise DimensionError("evaluation points must be pairwise distinct")
    m = k + e
    rows = []
    for x, y in zip(points, values):
        powers = [x**a for a in range(m)]
        rows.append([*powers, *(-y * pw for pw in powers)])
    basis = _exact_nullspace(rows, 2 * m)
    for vec in basis:
        q = tuple(vec[m:])
        if any(coef != 0 for coef in q):
            return tuple(vec[:m]), q
    raise RecoveryError("every exact solution has a zero denominator")
