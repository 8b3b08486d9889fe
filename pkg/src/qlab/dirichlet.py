"""Discrete Dirichlet energy of Q-valued fields and its minimisation.

A field stores one Q-point per mesh vertex as an array of shape (nv, q, n).
The energy is ``sum_e w_e G(f(a), f(b))**2`` over mesh edges, with ``G`` the
optimal-matching distance.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from .domains import Mesh, Tag
from .qpoints import QPoint, apply_matching, batch_g2, batch_matching

# Largest t for which 1 - t^2 - t^4 >= 0.
MOBIUS_T_MAX = float(np.sqrt((np.sqrt(5.0) - 1.0) / 2.0))


class DomainError(ValueError):
    pass


class MultiField:
    """Q-valued samples on every vertex of a mesh, plus the Dirichlet vertex set."""

    def __init__(self, mesh: Mesh, values, fixed=None):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[0] != mesh.nv:
            raise ValueError(f"values must have shape (nv={mesh.nv}, q, n), got {values.shape}")
        self.mesh = mesh
        self.values = values
        self.fixed = np.zeros(mesh.nv, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool).copy()

    @classmethod
    def zeros(cls, mesh: Mesh, q: int, n: int, fixed=None) -> "MultiField":
        return cls(mesh, np.zeros((mesh.nv, q, n)), fixed)

    @classmethod
    def from_function(cls, mesh: Mesh, fn: Callable[[np.ndarray], np.ndarray], fixed=None) -> "MultiField":
        """Sample ``fn(points) -> (N, q, n)`` at every vertex."""
        return cls(mesh, fn(mesh.vertices), fixed)

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def __getitem__(self, v: int) -> QPoint:
        return QPoint(self.values[v])

    def copy(self) -> "MultiField":
        return MultiField(self.mesh, self.values.copy(), self.fixed)

    def with_values(self, values) -> "MultiField":
        return MultiField(self.mesh, values, self.fixed)

    def norm2(self) -> np.ndarray:
        """|f(v)|^2 = G(f(v), Q[[0]])^2 at each vertex."""
        return np.einsum("vqn,vqn->v", self.values, self.values)

    def edge_g2(self) -> np.ndarray:
        e = self.mesh.edges
        return batch_g2(self.values[e[:, 0]], self.values[e[:, 1]])

    def save(self, path) -> None:
        """One line per vertex: the vertex index followed by its q*n coordinates.

        The header records q, n and the Dirichlet vertices.
        """
        lines = [f"# qlab-field v1 q={self.q} n={self.n} nv={self.mesh.nv}",
                 "# fixed " + " ".join(str(v) for v in np.flatnonzero(self.fixed))]
        for v, row in enumerate(self.values.reshape(self.mesh.nv, -1)):
            lines.append(f"{v} " + " ".join(repr(float(c)) for c in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path, mesh: Mesh) -> "MultiField":
        text = Path(path).read_text().splitlines()
        head = dict(tok.split("=") for tok in text[0].split()[3:])
        q, n = int(head["q"]), int(head["n"])
        fixed = np.zeros(mesh.nv, dtype=bool)
        body = []
        for line in text[1:]:
            if line.startswith("# fixed"):
                ids = [int(t) for t in line.split()[2:]]
                fixed[ids] = True
            elif line and not line.startswith("#"):
                body.append(line)
        values = np.zeros((mesh.nv, q * n))
        for line in body:
            parts = line.split()
            values[int(parts[0])] = [float(c) for c in parts[1:]]
        return cls(mesh, values.reshape(mesh.nv, q, n), fixed)


def energy(f: MultiField) -> float:
    """Discrete Dirichlet energy."""
    return float(np.dot(f.mesh.weights, f.edge_g2()))


# -- boundary traces ------------------------------------------------------------


class TraceKind(str, enum.Enum):
    ZERO = "ZERO"
    SQRT_CYLINDER = "SQRT_CYLINDER"
    SQRT_PLANAR = "SQRT_PLANAR"
    CUSTOM = "CUSTOM"


def _complex_sqrt_pair(z: np.ndarray, scale: np.ndarray) -> np.ndarray:
    w = np.sqrt(z.astype(complex)) * scale
    sheet = np.stack([w.real, w.imag], axis=-1)
    return np.stack([sheet, -sheet], axis=1)


def sqrt_values(points) -> np.ndarray:
    """Array form of :func:`sqrt_trace`: rows (x, y, t) -> (N, 2, 2)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return _complex_sqrt_pair(p[:, 0] + 1j * p[:, 1], p[:, 2])


def sqrt_trace(points: Sequence) -> list[QPoint]:
    """The two-valued map (z, t) -> {w t, -w t}, w^2 = z, as pairs of R^2 vectors.

    ``points`` holds (z, t) with z complex, or rows (x, y, t).
    """
    rows = [(complex(p[0]).real, complex(p[0]).imag, p[1]) if len(p) == 2 else p for p in points]
    return [QPoint(v) for v in sqrt_values(rows)]


def mobius_values(points, tol: float = 1e-9) -> np.ndarray:
    """Rows (x, y, t) with |x + iy| = 1 -> (N, 2, 5) pairs on the unit sphere of R^5."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    z = p[:, 0] + 1j * p[:, 1]
    t = p[:, 2]
    if np.any(np.abs(np.abs(z) - 1.0) > tol):
        raise DomainError("z must lie on the unit circle")
    radial = 1.0 - t**2 - t**4
    if np.any(radial < -tol) or np.any(t < -tol):
        raise DomainError(f"t must lie in [0, {MOBIUS_T_MAX:.6f}] so that 1 - t^2 - t^4 >= 0")
    a = np.sqrt(np.clip(radial, 0.0, None))
    w = np.sqrt(z)
    base = np.stack([a * z.real, a * z.imag, t**2], axis=-1)
    tail = np.stack([t * w.real, t * w.imag], axis=-1)
    return np.stack([np.concatenate([base, tail], axis=-1), np.concatenate([base, -tail], axis=-1)], axis=1)


def mobius_trace(points: Sequence, tol: float = 1e-9) -> list[QPoint]:
    """Pairs ((1-t²-t⁴)^½ z, t², ±t w) with w² = z, for z on S¹."""
    rows = [(complex(p[0]).real, complex(p[0]).imag, p[1]) if len(p) == 2 else p for p in points]
    return [QPoint(v) for v in mobius_values(rows, tol)]


@dataclass(frozen=True)
class Trace:
    """Dirichlet data: ``trace(points) -> (N, q, n)``."""

    kind: TraceKind
    parameters: tuple = ()
    q: int = 2
    n: int = 2
    fn: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind in (TraceKind.SQRT_CYLINDER, TraceKind.SQRT_PLANAR) and self.q != 2:
            raise ValueError("square-root traces are two-valued")
        if self.kind is TraceKind.CUSTOM and self.fn is None:
            raise ValueError("CUSTOM traces need fn")

    @classmethod
    def zero(cls, q: int, n: int) -> "Trace":
        return cls(TraceKind.ZERO, q=q, n=n)

    @classmethod
    def custom(cls, fn, q: int, n: int, *parameters) -> "Trace":
        return cls(TraceKind.CUSTOM, tuple(parameters), q, n, fn)

    def __call__(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is TraceKind.ZERO:
            return np.zeros((len(p), self.q, self.n))
        if self.kind is TraceKind.SQRT_CYLINDER:
            return sqrt_values(p)
        if self.kind is TraceKind.SQRT_PLANAR:
            return _complex_sqrt_pair(p[:, 0] + 1j * p[:, 1], np.ones(len(p)))
        return np.asarray(self.fn(p), dtype=float).reshape(len(p), self.q, self.n)


def dirichlet_problem(mesh: Mesh, q: int, n: int, boundary: Sequence[tuple]) -> MultiField:
    """Field whose tagged vertices carry Dirichlet data.

    ``boundary`` lists ``(tags, trace)`` pairs; a vertex takes its data from
    the first pair whose tags it carries. Other vertices start at zero and
    are free.
    """
    values = np.zeros((mesh.nv, q, n))
    fixed = np.zeros(mesh.nv, dtype=bool)
    pts = mesh.vertices
    for tags, trace in boundary:
        if isinstance(tags, (str, Tag)):
            tags = (tags,)
        hit = mesh.tag_mask(*tags) & ~fixed
        if hit.any():
            values[hit] = trace(pts[hit])
            fixed |= hit
    return MultiField(mesh, values, fixed)


# -- minimisation ------------------------------------------------------------------


class Status(str, enum.Enum):
    CONVERGED = "CONVERGED"
    NOT_CONVERGED = "NOT_CONVERGED"


@dataclass
class ConvergenceReport:
    status: Status
    sweeps: int
    energies: list[float]
    displacements: list[float]
    omega: float

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["sweep", "energy", "max_displacement"])
            for k, (e, d) in enumerate(zip(self.energies, self.displacements)):
                out.writerow([k, repr(e), repr(d)])


def _laplacian(mesh: Mesh):
    e, w = mesh.edges, mesh.weights
    rows = np.r_[e[:, 0], e[:, 1], e[:, 0], e[:, 1]]
    cols = np.r_[e[:, 1], e[:, 0], e[:, 0], e[:, 1]]
    data = np.r_[-w, -w, w, w]
    return coo_matrix((data, (rows, cols)), shape=(mesh.nv, mesh.nv)).tocsr()


def harmonic_extension(mesh: Mesh, data: np.ndarray, fixed: np.ndarray) -> np.ndarray:
    """Discrete harmonic function (any trailing shape) agreeing with ``data`` on ``fixed``."""
    data = np.asarray(data, dtype=float)
    flat = data.reshape(mesh.nv, -1)
    out = flat.copy()
    free = ~fixed
    if not free.any():
        return data.copy()
    if not fixed.any():
        out[:] = flat.mean(axis=0)
        return out.reshape(data.shape)
    lap = _laplacian(mesh)
    a = lap[free][:, free].tocsc()
    rhs = -(lap[free][:, fixed] @ flat[fixed])
    sol = spsolve(a, rhs)
    out[free] = sol.reshape(free.sum(), -1)
    return out.reshape(data.shape)


def initial_guess(f0: MultiField) -> np.ndarray:
    """Harmonic extension of the barycentre, copied to every sheet and split along e1.

    The split is h times the largest Dirichlet value, so zero data starts
    (and stays) at zero and the start scales with the data.
    """
    mesh, q = f0.mesh, f0.q
    bary = harmonic_extension(mesh, f0.values.mean(axis=1), f0.fixed)
    values = np.repeat(bary[:, None, :], q, axis=1)
    scale = float(np.sqrt(f0.norm2()[f0.fixed].max())) if f0.fixed.any() else 0.0
    if q > 1:
        offsets = (2.0 * np.arange(q) / (q - 1) - 1.0) * mesh.h * scale
        values[:, :, 0] += offsets[None, :]
    values[f0.fixed] = f0.values[f0.fixed]
    return values


def default_omega(mesh: Mesh) -> float:
    """Near-optimal over-relaxation factor for the grid Laplacian on this mesh."""
    extent = float(np.max(np.ptp(mesh.vertices, axis=0)))
    return 2.0 / (1.0 + np.sin(np.pi * mesh.h / extent))


def relax_vertices(values: np.ndarray, verts: np.ndarray, nbr: np.ndarray, wt: np.ndarray,
                   omega: float = 1.0) -> np.ndarray:
    """Move each vertex in ``verts`` towards the matched weighted mean of its neighbours.

    Neighbours are matched against the current value of the vertex; the
    matched mean is the exact minimiser of the local energy for those
    matchings. Returns the new values of ``verts`` (``values`` untouched).
    """
    cur = values[verts]
    nb = values[nbr[verts]]  # (k, deg, q, n)
    perms, _ = batch_matching(cur[:, None], nb)
    aligned = apply_matching(nb, perms)
    w = wt[verts]
    target = np.einsum("kd,kdqn->kqn", w, aligned) / w.sum(axis=1)[:, None, None]
    return cur + omega * (target - cur)


def minimize(f0: MultiField, tol: float = 1e-10, max_sweeps: int = 100_000, omega: float | None = None,
             init: str = "harmonic") -> tuple[MultiField, ConvergenceReport]:
    """Nonlinear Gauss-Seidel (red-black, over-relaxed) descent of the discrete energy.

    Stops once a full sweep lowers the energy by less than
    ``tol * (energy + 1)``. ``omega=1`` is plain Gauss-Seidel; the default
    picks the grid-optimal over-relaxation. Each vertex update can only
    lower the energy for any ``0 < omega < 2``. Fixed vertices are never
    written.
    """
    mesh = f0.mesh
    if omega is None:
        omega = default_omega(mesh)
    if not 0.0 < omega < 2.0:
        raise ValueError("omega must lie in (0, 2)")
    if init == "harmonic":
        values = initial_guess(f0)
    elif init == "given":
        values = f0.values.copy()
    else:
        raise ValueError(f"unknown init {init!r}")
    values[f0.fixed] = f0.values[f0.fixed]
    nbr, wt = mesh.neighbor_table()
    colors = mesh.colors()
    free = ~f0.fixed & (wt.sum(axis=1) > 0)
    classes = [np.flatnonzero(free & (colors == c)) for c in (0, 1)]

    field_ = f0.with_values(values)
    values = field_.values
    energies = [energy(field_)]
    displacements = [0.0]
    status = Status.NOT_CONVERGED
    for sweep in range(1, max_sweeps + 1):
        moved = 0.0
        for verts in classes:
            if len(verts) == 0:
                continue
            new = relax_vertices(values, verts, nbr, wt, omega)
            step = np.sqrt(np.einsum("kqn,kqn->k", new - values[verts], new - values[verts]))
            moved = max(moved, float(step.max()))
            values[verts] = new
        e = energy(field_)
        energies.append(e)
        displacements.append(moved)
        if energies[-2] - e < tol * (e + 1.0):
            status = Status.CONVERGED
            break
    report = ConvergenceReport(status, len(energies) - 1, energies, displacements, omega)
    return field_, report


def local_improvement(f: MultiField, v: int) -> float:
    """Energy drop from replacing f(v) by the matched mean of its neighbours."""
    nbr, wt = f.mesh.neighbor_table()
    before = energy(f)
    trial = f.values.copy()
    trial[v] = relax_vertices(f.values, np.array([v]), nbr, wt)[0]
    return before - energy(f.with_values(trial))
