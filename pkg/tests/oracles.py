"""Independent brute-force references used by the tests.

None of these import the code they check; they trade speed for being
obviously correct.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def brute_matching_cost(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum of sum_i |a_i - b_sigma(i)|^2 over all Q! permutations."""
    q = len(a)
    best = math.inf
    for perm in itertools.permutations(range(q)):
        cost = sum(float(np.sum((a[i] - b[perm[i]]) ** 2)) for i in range(q))
        best = min(best, cost)
    return best


def brute_lexmin_permutation(a: np.ndarray, b: np.ndarray, tie: float = 1e-12) -> tuple[int, ...]:
    costs = []
    for perm in itertools.permutations(range(len(a))):
        costs.append((sum(float(np.sum((a[i] - b[perm[i]]) ** 2)) for i in range(len(a))), perm))
    best = min(c for c, _ in costs)
    return min(p for c, p in costs if c <= best + tie * (1 + best))


def partial_matching_distance(x: np.ndarray, y: np.ndarray, dump_x: np.ndarray, dump_y: np.ndarray,
                              weight: float = 1.0) -> float:
    """Corner distance for equal atom weights: enumerate every partial injection x -> y.

    With equal weights the transport polytope has integral vertices, so an
    optimal flow sends each atom whole either to one partner or to the wedge.
    """
    n1, n2 = len(x), len(y)
    best = math.inf
    for k in range(min(n1, n2) + 1):
        for xs in itertools.combinations(range(n1), k):
            for ys in itertools.permutations(range(n2), k):
                cost = sum(float(np.sum((x[i] - y[j]) ** 2)) for i, j in zip(xs, ys))
                cost += sum(dump_x[i] for i in range(n1) if i not in xs)
                cost += sum(dump_y[j] for j in range(n2) if j not in ys)
                best = min(best, cost)
    return weight * best


def lp_vertex_minimum(c: np.ndarray, a_eq: np.ndarray, b_eq: np.ndarray, tol: float = 1e-9) -> float:
    """min c.x s.t. A x = b, x >= 0 by enumerating every basis (tiny problems only)."""
    a_eq = np.asarray(a_eq, dtype=float)
    rank = np.linalg.matrix_rank(a_eq)
    # keep an independent subset of rows
    rows: list[int] = []
    for i in range(len(a_eq)):
        if np.linalg.matrix_rank(a_eq[rows + [i]]) > len(rows):
            rows.append(i)
    a, b = a_eq[rows], np.asarray(b_eq, dtype=float)[rows]
    best = math.inf
    for basis in itertools.combinations(range(a.shape[1]), rank):
        sub = a[:, basis]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        xb = np.linalg.solve(sub, b)
        if np.all(xb >= -tol):
            best = min(best, float(np.dot(c[list(basis)], xb)))
    return best


def transport_lp(x: np.ndarray, y: np.ndarray, a: np.ndarray, b: np.ndarray, dump_x=None, dump_y=None):
    """Dense (c, A, b) of the transport LP, optionally with one dump variable per atom."""
    n1, n2 = len(x), len(y)
    cost = np.array([[float(np.sum((x[i] - y[j]) ** 2)) for j in range(n2)] for i in range(n1)]).ravel()
    rows = []
    for i in range(n1):
        r = np.zeros(n1 * n2)
        r[i * n2:(i + 1) * n2] = 1
        rows.append(r)
    for j in range(n2):
        r = np.zeros(n1 * n2)
        r[j::n2] = 1
        rows.append(r)
    a_eq = np.array(rows)
    if dump_x is not None:
        a_eq = np.hstack([a_eq, np.vstack([np.eye(n1), np.zeros((n2, n1))]), np.vstack([np.zeros((n1, n2)), np.eye(n2)])])
        cost = np.concatenate([cost, dump_x, dump_y])
    return cost, a_eq, np.concatenate([a, b])


def halfline_distance2(p: np.ndarray, direction: np.ndarray) -> float:
    """Squared distance from p to the ray {s d : s >= 0} by projection and clamping."""
    d = direction / np.linalg.norm(direction)
    s = max(0.0, float(np.dot(p, d)))
    return float(np.sum((p - s * d) ** 2))


def contingency_tables(rows: tuple[int, ...], cols: tuple[int, ...]) -> list[np.ndarray]:
    """All nonnegative integer matrices with the given margins, by filling every cell freely."""
    n0, n1 = len(rows), len(cols)
    top = max(rows + cols)
    out = []
    for cells in itertools.product(range(top + 1), repeat=n0 * n1):
        m = np.array(cells).reshape(n0, n1)
        if tuple(m.sum(axis=1)) == rows and tuple(m.sum(axis=0)) == cols:
            out.append(m)
    return out
