"""Frequency-function diagnostics for discrete Q-valued fields.

For a centre x and radius r the profile records

    D(r) = energy of the field inside B_r(x) (domain-clipped),
    H(r) = integral of |f|^2 over the sphere ∂B_r(x) (domain-clipped),
    I(r) = r D(r) / H(r).

H is evaluated by angular quadrature of the multilinear interpolant of
|f|^2 (``height="sphere"``, default) or by a thin centred shell of width 2h
(``height="shell"``). The shell estimator carries an O((h/r)^2 p^2) bias for
fields growing like r^p and is kept for comparison only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dirichlet import MultiField
from .domains import OUTER_TAGS, Mesh

RELIABLE_RADIUS_FACTOR = 8.0
CORNER_BOUND = 2.0
CORNER_SLACK = 0.15


class RadiusError(ValueError):
    pass


@dataclass
class FrequencyProfile:
    center: np.ndarray
    radii: np.ndarray
    D: np.ndarray
    H: np.ndarray
    I: np.ndarray
    h: float
    degenerate: bool = False
    height: str = "sphere"

    @property
    def reliable(self) -> np.ndarray:
        return self.radii >= RELIABLE_RADIUS_FACTOR * self.h - 1e-12

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["r", "D", "H", "I"])
            for row in zip(self.radii, self.D, self.H, self.I):
                out.writerow([repr(float(x)) for x in row])


def reliable_radii(h: float, r_max: float, count: int = 6) -> np.ndarray:
    """Evenly spaced radii from 8h up to ``r_max``."""
    lo = RELIABLE_RADIUS_FACTOR * h
    if r_max < lo:
        raise RadiusError(f"no reliable radius below {r_max} at h={h}")
    return np.linspace(lo, r_max, count)


# -- quadrature ---------------------------------------------------------------------


def sphere_quadrature(m: int, r: float, n_angle: int = 2048, n_polar: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the sphere of radius r in R^m (m = 2 or 3).

    Azimuthal nodes use a midpoint rule whose cell boundaries include the
    quarter angles, and the polar rule is split at the equator, so clipping
    by coordinate half-spaces through the centre is integrated exactly.
    """
    if m == 2:
        n = 4 * (n_angle // 4)
        th = (np.arange(n) + 0.5) * 2 * np.pi / n
        return r * np.stack([np.cos(th), np.sin(th)], axis=1), np.full(n, r * 2 * np.pi / n)
    if m == 3:
        x, w = np.polynomial.legendre.leggauss(n_polar)
        cz = np.r_[(x - 1) / 2, (x + 1) / 2]
        wz = np.r_[w / 2, w / 2]
        n = 4 * (n_angle // 16)
        th = (np.arange(n) + 0.5) * 2 * np.pi / n
        sz = np.sqrt(1 - cz**2)
        pts = np.stack([np.outer(sz, np.cos(th)), np.outer(sz, np.sin(th)), np.repeat(cz[:, None], n, axis=1)],
                       axis=-1).reshape(-1, 3)
        wts = np.outer(wz, np.full(n, 2 * np.pi / n)).ravel()
        return r * pts, r**2 * wts
    raise ValueError("sphere quadrature supports m = 2 or 3")


def interpolate_vertex_data(mesh: Mesh, data: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of per-vertex scalars; NaN where a grid cell is incomplete."""
    m = mesh.dim
    s = points / mesh.h
    base = np.floor(s).astype(np.int64)
    frac = s - base
    out = np.zeros(len(points))
    bad = np.zeros(len(points), dtype=bool)
    for corner in range(2**m):
        bits = np.array([(corner >> k) & 1 for k in range(m)])
        w = np.prod(np.where(bits, frac, 1 - frac), axis=1)
        ids = mesh.vertices_at(base + bits)
        missing = ids < 0
        bad |= missing & (w > 1e-12)
        out += np.where(missing, 0.0, w * data[np.where(missing, 0, ids)])
    out[bad] = np.nan
    return out


def _edge_fraction_inside(a: np.ndarray, b: np.ndarray, c: np.ndarray, r: float) -> np.ndarray:
    """Length fraction of each segment [a, b] inside the closed ball B_r(c)."""
    d = b - a
    f = a - c
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2 * np.einsum("ij,ij->i", f, d)
    qc = np.einsum("ij,ij->i", f, f) - r * r
    disc = qb * qb - 4 * qa * qc
    ok = disc > 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    s0 = np.clip((-qb - root) / (2 * qa), 0, 1)
    s1 = np.clip((-qb + root) / (2 * qa), 0, 1)
    return np.where(ok, s1 - s0, 0.0)


def ball_energy(f: MultiField, center, r: float, edge_g2: np.ndarray | None = None) -> float:
    """Energy of the edges inside B_r(center), crossing edges weighted by their inside fraction."""
    mesh = f.mesh
    g2 = f.edge_g2() if edge_g2 is None else edge_g2
    pts = mesh.vertices
    frac = _edge_fraction_inside(pts[mesh.edges[:, 0]], pts[mesh.edges[:, 1]], np.asarray(center, float), r)
    return float(np.sum(mesh.weights * g2 * frac))


def sphere_height(f: MultiField, center, r: float, norm2: np.ndarray | None = None, **quad) -> float:
    """Integral of |f|^2 over the domain part of ∂B_r(center)."""
    mesh = f.mesh
    c = np.asarray(center, dtype=float)
    nodes, wts = sphere_quadrature(mesh.dim, r, **quad)
    pts = c + nodes
    inside = mesh.contains(pts, tol=1e-12)
    if not inside.any():
        raise RadiusError(f"sphere of radius {r} about {c} misses the domain")
    vals = interpolate_vertex_data(mesh, f.norm2() if norm2 is None else norm2, pts[inside])
    if np.any(np.isnan(vals)):
        raise RadiusError(f"sphere of radius {r} about {c} leaves the mesh")
    return float(np.dot(wts[inside], vals))


def shell_height(f: MultiField, center, r: float, norm2: np.ndarray | None = None) -> float:
    """(1/δ) ∫ |f|^2 over the shell r - δ/2 < |x - c| <= r + δ/2, δ = 2h."""
    mesh = f.mesh
    delta = 2 * mesh.h
    c = np.asarray(center, dtype=float)
    dist = np.linalg.norm(mesh.vertices - c, axis=1)
    outer = mesh.tag_mask(*OUTER_TAGS)
    if np.any(outer & (dist <= r + delta)):
        raise RadiusError(f"shell at radius {r} about {c} reaches the outer boundary")
    sel = (dist > r - delta / 2) & (dist <= r + delta / 2)
    vals = f.norm2() if norm2 is None else norm2
    return float(np.sum(vals[sel] * mesh.cell_volumes()[sel]) / delta)


def frequency_profile(f: MultiField, center, radii: Sequence[float], height: str = "sphere") -> FrequencyProfile:
    """D, H and I = rD/H at each radius about ``center`` (a point or a vertex id)."""
    mesh = f.mesh
    c = mesh.vertices[center] if isinstance(center, (int, np.integer)) else np.asarray(center, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    g2 = f.edge_g2()
    n2 = f.norm2()
    D = np.array([ball_energy(f, c, r, g2) for r in radii])
    if height == "sphere":
        H = np.array([sphere_height(f, c, r, n2) for r in radii])
    elif height == "shell":
        H = np.array([shell_height(f, c, r, n2) for r in radii])
    else:
        raise ValueError(f"unknown height estimator {height!r}")
    degenerate = bool(np.any(H <= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        I = np.where(H > 0, radii * D / np.where(H > 0, H, 1.0), np.nan)
    return FrequencyProfile(c, radii, D, H, I, mesh.h, degenerate, height)


@dataclass
class MonotoneCheck:
    passed: bool
    worst_increment: float
    inconclusive: bool = False


def check_monotone(p: FrequencyProfile, slack: float, reliable_only: bool = True) -> MonotoneCheck:
    """Pass iff I(r_{k+1}) >= I(r_k) - slack over the (reliable) radii with defined I."""
    keep = np.isfinite(p.I) & (p.reliable if reliable_only else True)
    vals = p.I[keep]
    if len(vals) < 2:
        return MonotoneCheck(True, 0.0, inconclusive=True)
    worst = float(np.min(np.diff(vals)))
    return MonotoneCheck(worst >= -slack, worst)


@dataclass
class CornerBound:
    passed: bool
    plateau: float
    inconclusive: bool = False


def plateau(p: FrequencyProfile) -> float:
    """Median of I over the three smallest reliable radii; NaN if there are none."""
    keep = np.flatnonzero(p.reliable & np.isfinite(p.I))
    if len(keep) == 0:
        return float("nan")
    return float(np.median(p.I[keep[:3]]))


def corner_frequency_bound(p: FrequencyProfile, slack: float = CORNER_SLACK) -> CornerBound:
    """Check that the small-radius frequency at a corner is at least 2 (up to ``slack``)."""
    value = plateau(p)
    if np.isnan(value):
        return CornerBound(False, value, inconclusive=True)
    return CornerBound(value >= CORNER_BOUND - slack, value)


@dataclass(frozen=True)
class HomogeneousSolution:
    """Sampler for x -> Σ_i [[v_i sin(kθ) ρ^k]], θ and ρ polar coordinates of (x1, x2)."""

    k: int
    vectors: np.ndarray = field(repr=False)

    def __call__(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        theta = np.arctan2(p[:, 1], p[:, 0])
        rho = np.hypot(p[:, 0], p[:, 1])
        amp = np.sin(self.k * theta) * rho**self.k
        return amp[:, None, None] * self.vectors[None, :, :]

    def at(self, theta: float, r: float):
        from .qpoints import QPoint

        return QPoint(np.sin(self.k * theta) * r**self.k * self.vectors)

    @property
    def q(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]


def homogeneous_2d_solution(k: int, v_list) -> HomogeneousSolution:
    """k-homogeneous harmonic Q-valued map vanishing on both quarter-plane walls (k even)."""
    if k <= 0 or k % 2:
        raise ValueError("k must be a positive even integer")
    vecs = np.array(v_list, dtype=float)
    if vecs.ndim == 1:
        vecs = vecs[:, None]
    return HomogeneousSolution(k, vecs)


@dataclass
class HeightDecay:
    passed: bool
    outer_radius: float
    ratios: np.ndarray  # LHS / RHS at each sampled radius (<= 1 passes)
    radii: np.ndarray


def ball_mass(f: MultiField, center, r: float, norm2: np.ndarray | None = None) -> float:
    """Discrete ∫_{B_r(center)} |f|^2."""
    mesh = f.mesh
    dist = np.linalg.norm(mesh.vertices - np.asarray(center, float), axis=1)
    vals = f.norm2() if norm2 is None else norm2
    sel = dist <= r
    return float(np.sum(vals[sel] * mesh.cell_volumes()[sel]))


def height_decay_check(f: MultiField, center, alpha: float, outer_radius: float = 1.0, radii=None,
                       slack: float = 0.2) -> HeightDecay:
    """Check ∫_{B_r}|f|² <= R/(m+1) (r/R)^{m-1+2α} H(R) (1 + slack) for r <= R/2.

    R is ``outer_radius`` reduced, in steps of h/4, until the sphere of
    radius R stays inside the mesh; the scaled inequality holds for any
    outer radius when the frequency is monotone.
    """
    mesh = f.mesh
    c = np.asarray(center, dtype=float)
    m = mesh.dim
    n2 = f.norm2()
    R = outer_radius
    while True:
        try:
            HR = sphere_height(f, c, R, n2)
            break
        except RadiusError:
            R -= mesh.h / 4
            if R <= 2 * mesh.h:
                raise
    if radii is None:
        radii = np.linspace(mesh.h, R / 2, 12)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii > R / 2 + 1e-12):
        raise RadiusError(f"sampled radii must not exceed R/2 = {R / 2}")
    lhs = np.array([ball_mass(f, c, r, n2) for r in radii])
    rhs = R / (m + 1) * (radii / R) ** (m - 1 + 2 * alpha) * HR * (1 + slack)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return HeightDecay(bool(np.all(ratios <= 1.0)), R, ratios, radii)
