"""Structured grids on the quarter ball, the disk and the unit cylinder.

Every mesh is a tensor grid of spacing ``h`` clipped to the closed domain.
Edges join grid neighbours; their weights are the 2m-point stencil weights
``h**(m-2)`` times the fraction of the dual face lying inside the domain, so
that ``sum(w * (u_a - u_b)**2)`` approximates the Dirichlet integral.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

_EPS = 1e-9


class Tag(str, enum.Enum):
    V0 = "V0"
    V1 = "V1"
    CORNER_L = "CORNER_L"
    LATERAL = "LATERAL"
    BOTTOM = "BOTTOM"
    TOP = "TOP"
    FREE = "FREE"


# Boundary pieces the domain continues past only in the analytic sense;
# a frequency ball touching them has left the mesh.
OUTER_TAGS = frozenset({Tag.LATERAL, Tag.TOP})


class ResolutionError(ValueError):
    pass


@dataclass(eq=False)
class Mesh:
    kind: str
    params: dict
    h: float
    index: np.ndarray  # (nv, m) integer grid coordinates
    edges: np.ndarray  # (ne, 2)
    weights: np.ndarray  # (ne,)
    tags: tuple  # per-vertex frozenset of Tag
    _occ: object = field(default=None, repr=False)

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=np.int64)
        self.edges = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self._occ = _Occupancy(self.index)
        for arr in (self.index, self.edges, self.weights):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.index.shape[1]

    @property
    def vertices(self) -> np.ndarray:
        return self.index * self.h

    @property
    def nv(self) -> int:
        return self.index.shape[0]

    def __len__(self):
        return self.nv

    def vertex_at(self, idx) -> int:
        """Vertex id at integer grid position ``idx``, or -1."""
        return int(self._occ.lookup(np.asarray(idx, dtype=np.int64).reshape(1, -1))[0])

    def vertices_at(self, idx: np.ndarray) -> np.ndarray:
        return self._occ.lookup(np.asarray(idx, dtype=np.int64))

    def nearest_vertex(self, point) -> int:
        d = np.linalg.norm(self.vertices - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def has_tag(self, v: int, tag: Tag) -> bool:
        return Tag(tag) in self.tags[v]

    def tag_mask(self, *tags: Tag) -> np.ndarray:
        wanted = {Tag(t) for t in tags}
        return np.fromiter((bool(t & wanted) for t in self.tags), dtype=bool, count=self.nv)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        """Membership in the closed analytic domain."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "quarter_ball":
            r = self.params["r"]
            return (p[:, 0] >= -tol) & (p[:, 1] >= -tol) & (np.linalg.norm(p, axis=1) <= r + tol)
        if self.kind == "disk":
            return np.linalg.norm(p, axis=1) <= self.params["r"] + tol
        if self.kind == "cylinder":
            return (np.linalg.norm(p[:, :2], axis=1) <= 1 + tol) & (p[:, 2] >= -tol) & (p[:, 2] <= 1 + tol)
        raise ValueError(f"unknown domain kind {self.kind!r}")

    def cell_volumes(self) -> np.ndarray:
        """Dual-cell volume of each vertex (half cells on straight walls)."""
        m = self.dim
        vol = np.full(self.nv, self.h**m)
        for axis in range(m):
            step = np.zeros(m, dtype=np.int64)
            step[axis] = 1
            plus = self._present(self.index + step)
            minus = self._present(self.index - step)
            vol *= np.maximum(0.5 * (plus + minus), 0.5)
        return vol

    def _present(self, idx: np.ndarray) -> np.ndarray:
        return (self._occ.lookup(idx) >= 0).astype(float)

    def is_connected(self) -> bool:
        n, _ = connected_components(self.adjacency(), directed=False)
        return n == 1

    def adjacency(self):
        e = self.edges
        data = np.ones(2 * len(e))
        return coo_matrix((data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(self.nv, self.nv)).tocsr()

    def colors(self) -> np.ndarray:
        """Two-colouring by parity of the grid coordinates (grid graphs are bipartite)."""
        return (self.index.sum(axis=1) % 2).astype(np.int8)

    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded neighbour ids (nv, deg) and matching edge weights (0 on padding)."""
        src = np.r_[self.edges[:, 0], self.edges[:, 1]]
        dst = np.r_[self.edges[:, 1], self.edges[:, 0]]
        w = np.r_[self.weights, self.weights]
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        deg = np.bincount(src, minlength=self.nv)
        width = int(deg.max()) if self.nv else 0
        start = np.r_[0, np.cumsum(deg)[:-1]]
        slot = np.arange(len(src)) - start[src]
        nbr = np.tile(np.arange(self.nv)[:, None], (1, width))
        wt = np.zeros((self.nv, width))
        nbr[src, slot] = dst
        wt[src, slot] = w
        return nbr, wt

    def energy(self, values: np.ndarray) -> float:
        """Dirichlet energy of a single-valued function given at the vertices."""
        values = np.asarray(values, dtype=float)
        diff = values[self.edges[:, 0]] - values[self.edges[:, 1]]
        if diff.ndim > 1:
            diff = np.sqrt(np.sum(diff.reshape(len(diff), -1) ** 2, axis=1))
        return float(np.sum(self.weights * diff**2))

    # -- plain-text export ---------------------------------------------------

    def save(self, path) -> None:
        """Write the mesh as text.

        Header lines start with ``#``. Then one line per vertex
        (coordinates, then tags joined by ``|``), then one line per edge
        (two vertex indices and the weight).
        """
        params = " ".join(f"{k}={float(v)!r}" for k, v in sorted(self.params.items()))
        lines = [
            "# qlab-mesh v1",
            f"# kind={self.kind} dim={self.dim} h={float(self.h)!r} nv={self.nv} ne={len(self.edges)} {params}".rstrip(),
        ]
        for idx, tags in zip(self.index, self.tags):
            coords = " ".join(repr(float(c) * self.h) for c in idx)
            lines.append(f"{coords} {'|'.join(sorted(t.value for t in tags))}")
        for (a, b), w in zip(self.edges, self.weights):
            lines.append(f"{a} {b} {float(w)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Mesh":
        text = Path(path).read_text().splitlines()
        header = dict(tok.split("=", 1) for tok in text[1][1:].split())
        h = float(header["h"])
        dim, nv, ne = int(header["dim"]), int(header["nv"]), int(header["ne"])
        params = {k: float(v) for k, v in header.items() if k not in {"kind", "dim", "h", "nv", "ne"}}
        body = text[2:]
        index, tags = [], []
        for line in body[:nv]:
            parts = line.split()
            index.append([round(float(c) / h) for c in parts[:dim]])
            tags.append(frozenset(Tag(t) for t in parts[dim].split("|")))
        edges, weights = [], []
        for line in body[nv:nv + ne]:
            a, b, w = line.split()
            edges.append((int(a), int(b)))
            weights.append(float(w))
        return cls(header["kind"], params, h, np.array(index), np.array(edges), np.array(weights), tuple(tags))


class _Occupancy:
    """Dense presence lookup for a set of integer grid points."""

    def __init__(self, index: np.ndarray):
        self.lo = index.min(axis=0) - 1
        shape = index.max(axis=0) - self.lo + 2
        self.ids = np.full(tuple(shape), -1, dtype=np.intp)
        self.ids[tuple((index - self.lo).T)] = np.arange(len(index))

    def lookup(self, idx: np.ndarray) -> np.ndarray:
        rel = idx - self.lo
        ok = np.all((rel >= 0) & (rel < np.array(self.ids.shape)), axis=1)
        out = np.full(len(idx), -1, dtype=np.intp)
        out[ok] = self.ids[tuple(rel[ok].T)]
        return out


def _grid_mesh(kind: str, params: dict, h: float, index: np.ndarray, tagger) -> Mesh:
    m = index.shape[1]
    occ = _Occupancy(index)
    unit = np.eye(m, dtype=np.int64)
    edges, weights = [], []
    for axis in range(m):
        b = occ.lookup(index + unit[axis])
        a = np.flatnonzero(b >= 0)
        b = b[a]
        frac = np.ones(len(a))
        for other in range(m):
            if other == axis:
                continue
            side = np.zeros(len(a))
            for sgn in (1, -1):
                off = sgn * unit[other]
                side += 0.25 * ((occ.lookup(index[a] + off) >= 0).astype(float)
                                + (occ.lookup(index[b] + off) >= 0))
            frac *= np.maximum(side, 0.25)
        edges.append(np.stack([a, b], axis=1))
        weights.append(h ** (m - 2) * frac)
    points = index * h
    tags = tuple(tagger(p) for p in points)
    return Mesh(kind, params, h, index, np.concatenate(edges), np.concatenate(weights), tags)


def _check_resolution(h: float, r: float) -> None:
    if not (0 < h < r):
        raise ResolutionError(f"need 0 < h < {r}, got h={h}")


def _axis_range(lo: float, hi: float, h: float) -> np.ndarray:
    return np.arange(int(np.ceil(lo / h - _EPS)), int(np.floor(hi / h + _EPS)) + 1)


def quarter_ball(m: int, r: float, h: float) -> Mesh:
    """Grid on B_r ∩ (R+ × R+ × R^{m-2}).

    Walls {x1=0} and {x2=0} are tagged V0 and V1, their intersection
    CORNER_L, and the spherical part (within h of |x|=r) LATERAL.
    """
    if m not in (2, 3):
        raise ValueError("quarter_ball supports m = 2 or 3")
    _check_resolution(h, r)
    axes = [_axis_range(0, r, h), _axis_range(0, r, h)] + [_axis_range(-r, r, h)] * (m - 2)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    keep = np.linalg.norm(grid * h, axis=1) <= r + _EPS * h
    index = grid[keep]

    def tagger(p):
        t = set()
        if abs(p[0]) < _EPS * h:
            t.add(Tag.V0)
        if abs(p[1]) < _EPS * h:
            t.add(Tag.V1)
        if Tag.V0 in t and Tag.V1 in t:
            t.add(Tag.CORNER_L)
        if np.linalg.norm(p) > r - h + _EPS * h:
            t.add(Tag.LATERAL)
        return frozenset(t or {Tag.FREE})

    return _grid_mesh("quarter_ball", {"r": float(r)}, h, index, tagger)


def disk(r: float, h: float) -> Mesh:
    """Grid on the closed disk of radius r; the rim (within h of |z|=r) is LATERAL."""
    _check_resolution(h, r)
    ax = _axis_range(-r, r, h)
    grid = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    index = grid[np.linalg.norm(grid * h, axis=1) <= r + _EPS * h]

    def tagger(p):
        return frozenset({Tag.LATERAL} if np.linalg.norm(p) > r - h + _EPS * h else {Tag.FREE})

    return _grid_mesh("disk", {"r": float(r)}, h, index, tagger)


def cylinder(h: float) -> Mesh:
    """Grid on {|z| <= 1} × [0, 1] with BOTTOM (t=0), TOP (last layer) and LATERAL (rim) tags."""
    _check_resolution(h, 1.0)
    ax = _axis_range(-1, 1, h)
    tz = _axis_range(0, 1, h)
    grid = np.stack(np.meshgrid(ax, ax, tz, indexing="ij"), axis=-1).reshape(-1, 3)
    index = grid[np.linalg.norm(grid[:, :2] * h, axis=1) <= 1 + _EPS * h]
    top = tz.max() * h

    def tagger(p):
        t = set()
        if abs(p[2]) < _EPS * h:
            t.add(Tag.BOTTOM)
        if abs(p[2] - top) < _EPS * h:
            t.add(Tag.TOP)
        if np.linalg.norm(p[:2]) > 1 - h + _EPS * h:
            t.add(Tag.LATERAL)
        return frozenset(t or {Tag.FREE})

    return _grid_mesh("cylinder", {}, h, index, tagger)
