"""Discrete measures, squared Wasserstein distance and the corner distance with boundary dumping.

Both distances are linear programs over transport plans between atoms.
The corner distance lets each atom send part of its mass to the boundary
wedge instead, at the cost of its squared distance to the wedge, so the
two measures need not have equal mass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, hstack, identity, vstack

BALANCE_TOL = 1e-9


class UnbalancedError(ValueError):
    pass


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms ``points[i]`` with weights ``weights[i] > 0``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.ndim == 1:
            pts = pts.reshape(len(w), -1)
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls, dim: int) -> "DiscreteMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def dirac(cls, point, mass: float = 1.0) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.array([mass]))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.weights)

    def reweighted(self, factors: np.ndarray) -> "DiscreteMeasure":
        """Multiply weights by ``factors``; atoms whose weight drops to zero are removed."""
        w = self.weights * np.asarray(factors, dtype=float)
        keep = w > 0
        return DiscreteMeasure(self.points[keep], w[keep])

    def scaled(self, lam: float, weight_power: float = 0.0) -> "DiscreteMeasure":
        """Pushforward under x -> lam x, with weights multiplied by lam**weight_power."""
        return DiscreteMeasure(self.points * lam, self.weights * lam**weight_power)

    def transformed(self, matrix: np.ndarray) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points @ np.asarray(matrix, dtype=float).T, self.weights)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(np.vstack([self.points, other.points]), np.concatenate([self.weights, other.weights]))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"x{k + 1}" for k in range(self.dim)] + ["weight"])
            for p, w in zip(self.points, self.weights):
                out.writerow([repr(float(x)) for x in p] + [repr(float(w))])

    @classmethod
    def load_csv(cls, path) -> "DiscreteMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header[-1] != "weight":
            raise ValueError("last CSV column must be 'weight'")
        data = np.array(body, dtype=float).reshape(-1, len(header))
        return cls(data[:, :-1], data[:, -1])


@dataclass(frozen=True, eq=False)
class WedgeBoundary:
    """Union of half-planes L + R_+ e, with L spanned by the orthonormal rows of ``spine``."""

    spine: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        s = np.asarray(self.spine, dtype=float).reshape(-1, d.shape[1])
        d = d - (d @ s.T) @ s
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("half-plane directions must leave the spine")
        object.__setattr__(self, "spine", s)
        object.__setattr__(self, "directions", d / norms[:, None])

    @classmethod
    def from_rays(cls, directions, dim: int | None = None) -> "WedgeBoundary":
        """Half-lines from the origin (spine = {0})."""
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        return cls(np.zeros((0, d.shape[1] if dim is None else dim)), d)

    def distance2(self, points: np.ndarray) -> np.ndarray:
        """Squared distance from each point to the union of half-planes."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        y = p - (p @ self.spine.T) @ self.spine
        along = np.maximum(y @ self.directions.T, 0.0)  # (N, k)
        d2 = np.einsum("nd,nd->n", y, y)[:, None] - along**2
        return np.maximum(d2.min(axis=1), 0.0) if len(self.directions) else np.einsum("nd,nd->n", y, y)


def cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plan_constraints(n1: int, n2: int):
    rows = np.repeat(np.arange(n1), n2)
    cols = np.arange(n1 * n2)
    row_sum = coo_matrix((np.ones(n1 * n2), (rows, cols)), shape=(n1, n1 * n2))
    col_sum = coo_matrix((np.ones(n1 * n2), (np.tile(np.arange(n2), n1), cols)), shape=(n2, n1 * n2))
    return row_sum, col_sum


def _solve(c, a_eq, b_eq) -> float:
    # Normalise costs and masses so that rescaled instances give HiGHS the same problem.
    c_scale = float(np.max(np.abs(c))) if len(c) else 0.0
    b_scale = float(np.max(np.abs(b_eq))) if len(b_eq) else 0.0
    if c_scale == 0.0 or b_scale == 0.0:
        return 0.0
    res = linprog(c / c_scale, A_eq=a_eq, b_eq=b_eq / b_scale, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise TransportError(res.message)
    return float(res.fun) * c_scale * b_scale


def w2_squared(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """Optimal transport cost with squared Euclidean ground cost (balanced)."""
    t1, t2 = mu1.total, mu2.total
    if abs(t1 - t2) > BALANCE_TOL * max(t1, t2, 1e-300):
        raise UnbalancedError(f"totals differ: {t1} vs {t2}")
    if len(mu1) == 0 or len(mu2) == 0:
        return 0.0
    n1, n2 = len(mu1), len(mu2)
    row_sum, col_sum = _plan_constraints(n1, n2)
    # The last column constraint is implied by the others and is dropped so tiny imbalance stays feasible.
    a_eq = vstack([row_sum, col_sum.tocsr()[:-1]])
    b_eq = np.concatenate([mu1.weights, mu2.weights[:-1]])
    return max(_solve(cost_matrix(mu1.points, mu2.points).ravel(), a_eq, b_eq), 0.0)


def corner_distance(mu1: DiscreteMeasure, mu2: DiscreteMeasure, w: WedgeBoundary) -> float:
    """Least cost of transporting part of each measure onto the other and dumping the rest on the wedge.

    Variables are the plan pi_ij and dumps d1_i, d2_j with
    sum_j pi_ij + d1_i = a_i and sum_i pi_ij + d2_j = b_j.
    """
    n1, n2 = len(mu1), len(mu2)
    dump1 = w.distance2(mu1.points) if n1 else np.zeros(0)
    dump2 = w.distance2(mu2.points) if n2 else np.zeros(0)
    if n1 == 0 or n2 == 0:
        return float(np.dot(dump1, mu1.weights) + np.dot(dump2, mu2.weights))
    row_sum, col_sum = _plan_constraints(n1, n2)
    a_eq = vstack([
        hstack([row_sum, identity(n1), coo_matrix((n1, n2))]),
        hstack([col_sum, coo_matrix((n2, n1)), identity(n2)]),
    ]).tocsr()
    c = np.concatenate([cost_matrix(mu1.points, mu2.points).ravel(), dump1, dump2])
    b_eq = np.concatenate([mu1.weights, mu2.weights])
    return max(_solve(c, a_eq, b_eq), 0.0)


def bump(xi_norm: np.ndarray) -> np.ndarray:
    """1 on |xi| <= 1/2, (2(1 - |xi|))^2 on 1/2 < |xi| < 1, 0 outside."""
    r = np.asarray(xi_norm, dtype=float)
    out = np.where(r <= 0.5, 1.0, (2.0 * (1.0 - r)) ** 2)
    return np.where(r >= 1.0, 0.0, out)


def bump_weights(points: np.ndarray, center, r: float) -> np.ndarray:
    if r <= 0:
        raise ValueError("r must be positive")
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return bump(np.linalg.norm(p - np.asarray(center, dtype=float), axis=1) / r)


def strong_excess(t_mu: DiscreteMeasure, c_mu: DiscreteMeasure, w: WedgeBoundary, r: float, m: int,
                  center=None) -> float:
    """r^-(m+2) times the corner distance of the bump-weighted measures."""
    if center is None:
        center = np.zeros(t_mu.dim if len(t_mu) else c_mu.dim)
    a = t_mu.reweighted(bump_weights(t_mu.points, center, r)) if len(t_mu) else t_mu
    b = c_mu.reweighted(bump_weights(c_mu.points, center, r)) if len(c_mu) else c_mu
    return r ** -(m + 2) * corner_distance(a, b, w)


# -- cone sampling ---------------------------------------------------------------------------


def quadrant_measure(u, v, radius: float = 1.0, resolution: int = 16, multiplicity: float = 1.0,
                     bend=None, lam: float = 0.0) -> DiscreteMeasure:
    """Midpoint-rule atoms on the quadrant {s u + t v : s, t >= 0} inside B_radius (m = 2).

    Cells have side radius/resolution and weight area * multiplicity. With
    ``bend`` (a unit vector normal to u, v) the sheet is the graph
    s u + t v + lam s t bend, which agrees with the quadrant on both edges;
    weights then carry the graph's area element.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h = radius / resolution
    c = (np.arange(resolution) + 0.5) * h
    s, t = (g.ravel() for g in np.meshgrid(c, c, indexing="ij"))
    pts = s[:, None] * u + t[:, None] * v
    area = np.full(len(s), h * h)
    if bend is not None and lam != 0.0:
        n = np.asarray(bend, dtype=float)
        pts = pts + (lam * s * t)[:, None] * n
        area = area * np.sqrt(1.0 + lam**2 * (s**2 + t**2))
    keep = np.linalg.norm(pts, axis=1) < radius
    return DiscreteMeasure(pts[keep], area[keep] * multiplicity)


def book_measure(quadrants: Sequence[tuple], radius: float = 1.0, resolution: int = 16) -> DiscreteMeasure:
    """Sum of :func:`quadrant_measure` over ``(u, v, multiplicity)`` triples."""
    parts = [quadrant_measure(u, v, radius, resolution, mult) for u, v, mult in quadrants]
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def rotated_quadrant(psi: float, dim: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Rays e1 and cos(psi) e2 + sin(psi) e3."""
    e = np.eye(dim)
    return e[0], np.cos(psi) * e[1] + np.sin(psi) * e[2]
