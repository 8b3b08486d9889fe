"""Unordered Q-tuples of vectors and the optimal-matching distance between them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

# Above this Q the exhaustive search is replaced by an assignment solver.
EXHAUSTIVE_MAX_Q = 4


class DimensionMismatch(ValueError):
    pass


class UndefinedSeparation(ValueError):
    pass


@lru_cache(maxsize=None)
def permutations(q: int) -> np.ndarray:
    """All permutations of ``range(q)`` as rows, in lexicographic order."""
    return np.array(list(itertools.permutations(range(q))), dtype=np.intp).reshape(-1, q)


def _as_values(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a (q, n) array of sheet values, got shape {arr.shape}")
    return arr


def canonical_order(values: np.ndarray) -> np.ndarray:
    """Row order that sorts ``values`` lexicographically (first coordinate first)."""
    return np.lexsort(values.T[::-1])


@dataclass(frozen=True, eq=False)
class QPoint:
    """A point of A_Q(R^n): Q vectors in R^n, stored in canonical (sorted) order.

    Equality is multiset equality; ``atol`` in :meth:`isclose` gives the
    tolerant version.
    """

    values: np.ndarray

    def __init__(self, values):
        arr = _as_values(values)
        arr = arr[canonical_order(arr)]
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zero(cls, q: int, n: int) -> "QPoint":
        return cls(np.zeros((q, n)))

    @property
    def q(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def isclose(self, other: "QPoint", atol: float = 0.0) -> bool:
        _check_compatible(self, other)
        return g_distance(self, other) <= atol

    def __eq__(self, other):
        if not isinstance(other, QPoint):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.values.shape, self.values.tobytes()))

    def __repr__(self):
        sheets = ", ".join("(" + ", ".join(f"{c:.6g}" for c in row) + ")" for row in self.values)
        return f"QPoint[{sheets}]"

    def scaled(self, factor: float) -> "QPoint":
        return QPoint(self.values * factor)

    def rotated(self, rotation: np.ndarray) -> "QPoint":
        return QPoint(self.values @ np.asarray(rotation).T)

    def norm2(self) -> float:
        """Squared distance to Q[[0]]."""
        return float(np.sum(self.values**2))


@dataclass(frozen=True)
class Matching:
    """Optimal assignment ``a[i] -> b[permutation[i]]`` and its squared cost."""

    permutation: tuple[int, ...]
    cost: float


def _check_compatible(a: QPoint, b: QPoint) -> None:
    if a.q != b.q or a.n != b.n:
        raise DimensionMismatch(f"cannot compare Q={a.q}, n={a.n} with Q={b.q}, n={b.n}")


def pair_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of squared distances ``|a_i - b_j|^2``."""
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _perm_cost(costs: np.ndarray, perm) -> float:
    return float(sum(costs[i, j] for i, j in enumerate(perm)))


def _assignment_lexmin(costs: np.ndarray, tie_tol: float) -> tuple[tuple[int, ...], float]:
    rows, cols = linear_sum_assignment(costs)
    best = float(costs[rows, cols].sum())
    slack = tie_tol * (1.0 + best)
    q = costs.shape[0]
    perm: list[int] = []
    used: set[int] = set()
    fixed = 0.0
    # Greedy lexicographic tie-break: keep the smallest column that still admits an optimum.
    for i in range(q):
        free_rows = list(range(i + 1, q))
        for j in range(q):
            if j in used:
                continue
            free_cols = [c for c in range(q) if c not in used and c != j]
            rest = 0.0
            if free_rows:
                sub = costs[np.ix_(free_rows, free_cols)]
                r, c = linear_sum_assignment(sub)
                rest = float(sub[r, c].sum())
            if fixed + costs[i, j] + rest <= best + slack:
                perm.append(j)
                used.add(j)
                fixed += costs[i, j]
                break
        else:  # pragma: no cover - the optimum always admits some column
            raise RuntimeError("tie-breaking failed to recover an optimal assignment")
    return tuple(perm), _perm_cost(costs, perm)


def best_matching(a: QPoint, b: QPoint, tie_tol: float = 1e-12) -> Matching:
    """Minimizing permutation of Σ|a_i - b_σ(i)|², lexicographically smallest among ties.

    Two permutations tie when their costs differ by at most
    ``tie_tol * (1 + optimum)``.
    """
    _check_compatible(a, b)
    costs = pair_costs(a.values, b.values)
    if a.q <= EXHAUSTIVE_MAX_Q:
        perms = permutations(a.q)
        totals = costs[np.arange(a.q)[None, :], perms].sum(axis=1)
        best = totals.min()
        k = int(np.flatnonzero(totals <= best + tie_tol * (1.0 + best))[0])
        return Matching(tuple(int(p) for p in perms[k]), float(totals[k]))
    perm, cost = _assignment_lexmin(costs, tie_tol)
    return Matching(perm, cost)


def g_distance(a: QPoint, b: QPoint) -> float:
    """Optimal-matching distance on A_Q(R^n)."""
    return float(np.sqrt(best_matching(a, b).cost))


def mean(a: QPoint) -> np.ndarray:
    return a.values.mean(axis=0)


def separation(a: QPoint) -> float:
    """Smallest distance between two sheets of ``a``; zero means a collision."""
    if a.q < 2:
        raise UndefinedSeparation("separation needs at least two sheets")
    return float(np.sqrt(min_pair_gap2(a.values[None])[0]))


# Vectorised kernels used by the field solvers. Arrays have shape (..., q, n).


def min_pair_gap2(values: np.ndarray) -> np.ndarray:
    """Squared minimum sheet separation for a stack of Q-points."""
    q = values.shape[-2]
    if q < 2:
        raise UndefinedSeparation("separation needs at least two sheets")
    out = np.full(values.shape[:-2], np.inf)
    for i, j in itertools.combinations(range(q), 2):
        d = values[..., i, :] - values[..., j, :]
        out = np.minimum(out, np.einsum("...k,...k->...", d, d))
    return out


def batch_matching(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimal permutations and costs for stacks of Q-point pairs.

    ``a`` and ``b`` broadcast to a common shape (..., q, n). Returns the
    permutation array (..., q) mapping a-sheet i to b-sheet perm[i], and the
    squared costs (...). Ties go to the earliest permutation in
    lexicographic order.
    """
    a, b = np.broadcast_arrays(a, b)
    q = a.shape[-2]
    batch = a.shape[:-2]
    if q == 1:
        d = a[..., 0, :] - b[..., 0, :]
        return np.zeros(batch + (1,), dtype=np.intp), np.einsum("...k,...k->...", d, d)
    if q <= EXHAUSTIVE_MAX_Q:
        costs = np.einsum("...ijk,...ijk->...ij", a[..., :, None, :] - b[..., None, :, :],
                          a[..., :, None, :] - b[..., None, :, :])
        perms = permutations(q)
        totals = np.zeros(batch + (len(perms),))
        for i in range(q):
            totals += costs[..., i, perms[:, i]]
        k = np.argmin(totals, axis=-1)
        return perms[k], np.take_along_axis(totals, k[..., None], axis=-1)[..., 0]
    flat_a = a.reshape(-1, q, a.shape[-1])
    flat_b = b.reshape(-1, q, b.shape[-1])
    perm_out = np.empty((flat_a.shape[0], q), dtype=np.intp)
    cost_out = np.empty(flat_a.shape[0])
    for t in range(flat_a.shape[0]):
        c = pair_costs(flat_a[t], flat_b[t])
        rows, cols = linear_sum_assignment(c)
        perm_out[t] = cols
        cost_out[t] = c[rows, cols].sum()
    return perm_out.reshape(batch + (q,)), cost_out.reshape(batch)


def batch_g2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared optimal-matching distances for stacks of Q-point pairs."""
    return batch_matching(a, b)[1]


def apply_matching(b: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Reorder the sheets of ``b`` so that sheet i lines up with a-sheet i."""
    return np.take_along_axis(b, perm[..., :, None], axis=-2)
