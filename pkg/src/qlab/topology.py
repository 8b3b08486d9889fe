"""Sheet tracking and monodromy for Q-valued fields on planar grids.

Where the sheets of a field stay apart, optimal matchings along mesh edges
are unique and glue the sheets into a covering graph over the separated
region. Lifting loops through that graph gives permutations of the sheets;
a loop with non-identity monodromy cannot be contracted inside the region,
so the complement it surrounds must contain a point where no continuous
splitting of the field into single-valued sheets exists.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .dirichlet import MultiField
from .domains import Mesh, Tag, disk
from .qpoints import batch_matching, min_pair_gap2

DEFAULT_OSCILLATION_FACTOR = 10.0


class RefineMeshError(ValueError):
    pass


class LoopError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def cycle_notation(perm: Sequence[int]) -> str:
    """1-based cycle notation, e.g. ``(1 2)``; the identity is ``()``."""
    seen: set[int] = set()
    parts = []
    for start in range(len(perm)):
        if start in seen or perm[start] == start:
            seen.add(start)
            continue
        cyc = []
        i = start
        while i not in seen:
            seen.add(i)
            cyc.append(i + 1)
            i = perm[i]
        parts.append("(" + " ".join(str(c) for c in cyc) + ")")
    return "".join(parts) or "()"


def compose(first: Sequence[int], then: Sequence[int]) -> tuple[int, ...]:
    """Monodromy of ``first`` followed by ``then``."""
    return tuple(int(then[i]) for i in first)


def inverse(perm: Sequence[int]) -> tuple[int, ...]:
    out = [0] * len(perm)
    for i, p in enumerate(perm):
        out[p] = i
    return tuple(out)


def _canonical_values(values: np.ndarray) -> np.ndarray:
    order = np.lexsort(np.moveaxis(values[..., ::-1], -1, 0), axis=-1)
    return np.take_along_axis(values, order[..., None], axis=1)


def vertex_separation(f: MultiField) -> np.ndarray:
    return np.sqrt(min_pair_gap2(f.values))


@dataclass
class SheetGraph:
    """Covering graph of the separated region.

    Sheet ``i`` at vertex ``v`` is the i-th value of f(v) in canonical
    order. ``edge_perm[(a, b)]`` maps sheets at ``a`` to sheets at ``b``.
    """

    base: Mesh
    values: np.ndarray
    region: np.ndarray
    s_min: float
    edge_perm: dict = field(repr=False)

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @property
    def cover_vertices(self) -> list[tuple[int, int]]:
        return [(int(v), i) for v in np.flatnonzero(self.region) for i in range(self.q)]

    @property
    def cover_edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        out = []
        for (a, b), perm in self.edge_perm.items():
            if a < b:
                out.extend(((a, i), (b, int(perm[i]))) for i in range(self.q))
        return out

    def step(self, a: int, b: int) -> tuple[int, ...]:
        try:
            return self.edge_perm[(a, b)]
        except KeyError:
            raise LoopError(f"edge ({a}, {b}) is not in the cover") from None

    def region_edges(self) -> np.ndarray:
        return np.array(sorted((a, b) for a, b in self.edge_perm if a < b), dtype=np.intp).reshape(-1, 2)


def oscillation(f: MultiField) -> np.ndarray:
    """G(f(a), f(b)) on every mesh edge."""
    return np.sqrt(f.edge_g2())


def default_s_min(f: MultiField, factor: float = DEFAULT_OSCILLATION_FACTOR, shrink: float = 0.95) -> float:
    """Smallest threshold s on a geometric scan down from the largest separation with
    s >= factor * (max edge oscillation inside {separation > s}).

    The scan stops at the first threshold that fails the inequality.
    """
    sep = vertex_separation(f)
    osc = oscillation(f)
    e = f.mesh.edges
    s = float(sep.max())
    best = s
    while s > 1e-12:
        inside = (sep[e[:, 0]] > s) & (sep[e[:, 1]] > s)
        worst = float(osc[inside].max()) if inside.any() else 0.0
        if s < factor * worst:
            break
        best = s
        s *= shrink
    return best


def build_sheet_graph(f: MultiField, s_min: float) -> SheetGraph:
    """Cover of {v : separation(f(v)) > s_min} built from unique optimal matchings.

    Every edge inside the region must satisfy G(f(a), f(b)) < sep/2 at both
    ends, which makes its optimal matching unique; otherwise the mesh is too
    coarse and :class:`RefineMeshError` names the worst edge.
    """
    mesh = f.mesh
    values = _canonical_values(f.values)
    sep = np.sqrt(min_pair_gap2(values)) if f.q > 1 else np.full(mesh.nv, np.inf)
    region = sep > s_min
    e = mesh.edges
    inside = region[e[:, 0]] & region[e[:, 1]]
    ee = e[inside]
    perms, costs = batch_matching(values[ee[:, 0]], values[ee[:, 1]])
    osc = np.sqrt(costs)
    bound = 0.5 * np.minimum(sep[ee[:, 0]], sep[ee[:, 1]])
    bad = osc >= bound
    if bad.any():
        k = int(np.argmax(osc / bound))
        a, b = (int(x) for x in ee[k])
        raise RefineMeshError(f"edge ({a}, {b}) oscillates by {osc[k]:.4g} against sheet separation "
                              f"{2 * bound[k]:.4g}; refine the mesh or raise s_min")
    edge_perm = {}
    for (a, b), p in zip(ee.tolist(), perms):
        fwd = tuple(int(x) for x in p)
        edge_perm[(a, b)] = fwd
        edge_perm[(b, a)] = inverse(fwd)
    return SheetGraph(mesh, values, region, float(s_min), edge_perm)


def loop_monodromy(g: SheetGraph, loop: Sequence[int]) -> tuple[int, ...]:
    """Permutation obtained by lifting the closed vertex loop (last vertex joins the first)."""
    loop = [int(v) for v in loop]
    if len(loop) < 2:
        return tuple(range(g.q))
    if loop[0] == loop[-1]:
        loop = loop[:-1]
    for v in loop:
        if not g.region[v]:
            raise LoopError(f"vertex {v} is outside the separated region")
    state = tuple(range(g.q))
    for a, b in zip(loop, loop[1:] + loop[:1]):
        perm = g.step(a, b)
        state = tuple(perm[s] for s in state)
    return state


@dataclass
class Selection:
    exists: bool
    labels: dict | None = None  # vertex -> tuple: sheet index carried by each global label
    swap_path: list[int] | None = None  # closed base loop with non-identity monodromy


def has_global_selection(g: SheetGraph) -> Selection:
    """Whether the cover over the (connected) region splits into Q single-valued sheets."""
    verts = np.flatnonzero(g.region)
    q = g.q
    if q == 1:
        return Selection(True, {int(v): (0,) for v in verts})
    pos = {int(v): k for k, v in enumerate(verts)}
    edges = g.region_edges()
    if len(verts) > 1:
        from scipy.sparse import coo_matrix

        base = coo_matrix((np.ones(len(edges)), ([pos[a] for a in edges[:, 0]], [pos[b] for b in edges[:, 1]])),
                          shape=(len(verts), len(verts)))
        ncomp, _ = connected_components(base, directed=False)
        if ncomp != 1:
            raise PreconditionError("the separated region is not connected")
    # Breadth-first transport of sheet labels from the first vertex.
    root = int(verts[0])
    label = {root: tuple(range(q))}  # label[v][j] = sheet at v carrying global label j
    parent = {root: None}
    adj: dict[int, list[int]] = {}
    for a, b in edges.tolist():
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    queue = deque([root])
    while queue:
        a = queue.popleft()
        for b in adj.get(a, []):
            moved = tuple(g.edge_perm[(a, b)][s] for s in label[a])
            if b not in label:
                label[b] = moved
                parent[b] = a
                queue.append(b)
            elif moved != label[b]:
                return Selection(False, swap_path=_close_loop(parent, a, b))
    return Selection(True, label)


def _close_loop(parent: dict, a: int, b: int) -> list[int]:
    def chain(v):
        out = []
        while v is not None:
            out.append(v)
            v = parent[v]
        return out

    pa, pb = chain(a), chain(b)
    common = set(pa) & set(pb)
    pa = pa[: next(i for i, v in enumerate(pa) if v in common) + 1]
    pb = pb[: next(i for i, v in enumerate(pb) if v in common)]
    # root-side meeting point -> ... -> a, then b -> ... back towards the meeting point
    return pa[::-1] + pb


# -- planar faces and loops ------------------------------------------------------------


def grid_faces(mesh: Mesh) -> np.ndarray:
    """Complete unit squares of a 2-d grid as counter-clockwise vertex quadruples."""
    if mesh.dim != 2:
        raise ValueError("faces are defined for 2-d meshes")
    idx = mesh.index
    corners = [np.array(c) for c in ((0, 0), (1, 0), (1, 1), (0, 1))]
    ids = np.stack([mesh.vertices_at(idx + c) for c in corners], axis=1)
    return ids[np.all(ids >= 0, axis=1)]


def _boundary_walks(mesh: Mesh, faces: np.ndarray) -> list[list[int]]:
    """Closed boundary walks of a union of faces, interior on the left."""
    directed = set()
    for f in faces.tolist():
        for k in range(4):
            directed.add((f[k], f[(k + 1) % 4]))
    boundary = [(a, b) for a, b in directed if (b, a) not in directed]
    out: dict[int, list[int]] = {}
    for a, b in boundary:
        out.setdefault(a, []).append(b)
    pts = mesh.index
    used: set[tuple[int, int]] = set()
    walks = []
    for start in sorted(boundary):
        if start in used:
            continue
        walk = [start[0]]
        a, b = start
        used.add(start)
        while True:
            walk.append(b)
            nxt = [c for c in out[b] if (b, c) not in used]
            if not nxt:
                break
            if len(nxt) > 1:
                # Pinch vertex: take the sharpest right turn so touching pieces stay in one walk.
                d_in = pts[b] - pts[a]
                nxt.sort(key=lambda c: np.cross(d_in, pts[c] - pts[b]))
            a, b = b, nxt[0]
            used.add((a, b))
        if walk[-1] == walk[0]:
            walk.pop()
        walks.append(walk)
    return walks


def _signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def outer_walk(mesh: Mesh, faces: np.ndarray) -> list[int]:
    walks = _boundary_walks(mesh, faces)
    return max(walks, key=lambda w: _signed_area(mesh.vertices[w]))


def winding_number(points: np.ndarray, loop_points: np.ndarray) -> np.ndarray:
    """Winding number of the closed polygon about each point (points off the polygon)."""
    rel_a = loop_points[None, :, :] - points[:, None, :]
    rel_b = np.roll(loop_points, -1, axis=0)[None, :, :] - points[:, None, :]
    ang = np.arctan2(rel_a[..., 0] * rel_b[..., 1] - rel_a[..., 1] * rel_b[..., 0],
                     np.einsum("pkd,pkd->pk", rel_a, rel_b))
    return np.rint(ang.sum(axis=1) / (2 * np.pi)).astype(int)


def boundary_loop(mesh: Mesh) -> list[int]:
    """Outermost closed loop of grid edges (counter-clockwise)."""
    return outer_walk(mesh, grid_faces(mesh))


def face_holonomy(g: SheetGraph, faces: np.ndarray) -> np.ndarray:
    """Boolean mask: faces inside the region whose boundary lifts to a non-identity permutation."""
    inside = np.flatnonzero(np.all(g.region[faces], axis=1))
    out = np.zeros(len(faces), dtype=bool)
    if len(inside) == 0 or g.q == 1:
        return out
    f = faces[inside]
    state = np.broadcast_to(np.arange(g.q), (len(f), g.q))
    for k in range(4):
        perm, _ = batch_matching(g.values[f[:, k]], g.values[f[:, (k + 1) % 4]])
        state = np.take_along_axis(perm, state, axis=1)
    out[inside] = np.any(state != np.arange(g.q), axis=1)
    return out


# -- singularity localisation --------------------------------------------------------------


class Verdict(str, enum.Enum):
    FORCED = "FORCED"
    NOT_FORCED = "NOT_FORCED"


@dataclass
class SingularComponent:
    vertices: list[int]  # collision vertices (separation <= s_min)
    cells: list[tuple[int, int, int, int]]  # grid faces the component occupies
    loop: list[int]  # certificate loop in the separated region
    monodromy: tuple[int, ...]
    diameter: float

    def contains_point(self, mesh: Mesh, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        if any(np.linalg.norm(mesh.vertices[v] - p) <= tol for v in self.vertices):
            return True
        for cell in self.cells:
            lo, hi = mesh.vertices[list(cell)].min(axis=0), mesh.vertices[list(cell)].max(axis=0)
            if np.all(p >= lo - tol) and np.all(p <= hi + tol):
                return True
        return False


@dataclass
class SingularityReport:
    verdict: Verdict
    s_min: float
    boundary_loop: list[int]
    boundary_monodromy: tuple[int, ...]
    components: list[SingularComponent]
    unforced: list[SingularComponent] = field(default_factory=list)

    @property
    def forced(self) -> bool:
        return self.verdict is Verdict.FORCED

    def to_dict(self, mesh: Mesh) -> dict:
        def comp(c: SingularComponent) -> dict:
            return {
                "vertices": c.vertices,
                "points": [[round(float(x), 12) for x in mesh.vertices[v]] for v in c.vertices],
                "cells": [list(cell) for cell in c.cells],
                "diameter": c.diameter,
                "certificate_loop": c.loop,
                "monodromy": cycle_notation(c.monodromy),
            }

        return {
            "verdict": self.verdict.value,
            "s_min": self.s_min,
            "boundary_loop": self.boundary_loop,
            "boundary_monodromy": cycle_notation(self.boundary_monodromy),
            "forced_components": [comp(c) for c in self.components],
            "unforced_components": [comp(c) for c in self.unforced],
        }

    def save(self, path, mesh: Mesh) -> None:
        Path(path).write_text(json.dumps(self.to_dict(mesh), indent=2, sort_keys=True) + "\n")


def _face_clusters(faces: np.ndarray, bad: np.ndarray) -> list[np.ndarray]:
    """Groups of bad faces connected through shared vertices."""
    ids = np.flatnonzero(bad)
    if len(ids) == 0:
        return []
    owner: dict[int, list[int]] = {}
    for k in ids:
        for v in faces[k]:
            owner.setdefault(int(v), []).append(int(k))
    parent = {int(k): int(k) for k in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for group in owner.values():
        for other in group[1:]:
            ra, rb = find(group[0]), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    clusters: dict[int, list[int]] = {}
    for k in ids:
        clusters.setdefault(find(int(k)), []).append(int(k))
    return [np.array(sorted(c)) for _, c in sorted(clusters.items())]


def _diameter(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    d = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


def locate_essential_singularity(f: MultiField, s_min: float | None = None) -> SingularityReport:
    """Regions of a 2-d field where a sheet collision is forced by monodromy.

    Collision vertices (separation <= s_min) and region faces with
    non-trivial holonomy are grouped into clusters of grid cells. Each
    cluster is surrounded by the outer boundary walk of its cells, which runs
    through the separated region; clusters whose walk has non-identity
    monodromy are reported as forced, with that walk as certificate. If the
    monodromy of the mesh boundary loop is trivial, nothing is forced.
    """
    mesh = f.mesh
    if mesh.dim != 2:
        raise ValueError("singularity localisation needs a 2-d mesh")
    if s_min is None:
        s_min = default_s_min(f)
    g = build_sheet_graph(f, s_min)
    faces = grid_faces(mesh)
    rim = outer_walk(mesh, faces)
    if not np.all(g.region[rim]):
        raise PreconditionError("the boundary loop leaves the separated region; lower s_min")
    identity = tuple(range(g.q))
    rim_perm = loop_monodromy(g, rim)
    if rim_perm == identity:
        return SingularityReport(Verdict.NOT_FORCED, float(s_min), rim, rim_perm, [])

    bad = ~np.all(g.region[faces], axis=1) | face_holonomy(g, faces)
    clusters = _face_clusters(faces, bad)
    centroids = mesh.vertices[faces].mean(axis=1)
    # Merge clusters nested inside another cluster's outer walk until stable.
    changed = True
    walks = [outer_walk(mesh, faces[c]) for c in clusters]
    while changed:
        changed = False
        for i in range(len(clusters)):
            loop_pts = mesh.vertices[walks[i]]
            for j in range(len(clusters)):
                if i == j:
                    continue
                if np.any(winding_number(centroids[clusters[j][:1]], loop_pts) != 0):
                    clusters[i] = np.union1d(clusters[i], clusters[j])
                    del clusters[j]
                    del walks[j]
                    if j < i:
                        i -= 1
                    walks[i] = outer_walk(mesh, faces[clusters[i]])
                    changed = True
                    break
            if changed:
                break

    forced, unforced = [], []
    for cells, walk in zip(clusters, walks):
        if not np.all(g.region[walk]):
            raise PreconditionError("a collision cluster touches the mesh boundary")
        verts = sorted({int(v) for v in faces[cells].ravel() if not g.region[v]})
        comp = SingularComponent(
            vertices=verts,
            cells=[tuple(int(v) for v in faces[k]) for k in cells],
            loop=[int(v) for v in walk],
            monodromy=loop_monodromy(g, walk),
            diameter=_diameter(mesh.vertices[verts]) if verts else _diameter(centroids[cells]),
        )
        (forced if comp.monodromy != identity else unforced).append(comp)
    return SingularityReport(Verdict.FORCED, float(s_min), rim, rim_perm, forced, unforced)


# -- normal map ------------------------------------------------------------------------------


def extract_normal_map(u: MultiField, tol: float = 1e-12) -> MultiField:
    """One-sided normal derivative at the cylinder bottom, as a field on the matching disk grid.

    eta(z) = u(z, h) / h, which is the forward difference because u vanishes
    on the bottom face.
    """
    mesh = u.mesh
    if mesh.kind != "cylinder":
        raise ValueError("extract_normal_map expects a field on the cylinder")
    bottom = mesh.tag_mask(Tag.BOTTOM)
    if np.max(np.abs(u.values[bottom]), initial=0.0) > tol:
        raise PreconditionError("u must vanish on the bottom face")
    base = disk(1.0, mesh.h)
    lift = np.concatenate([base.index, np.ones((base.nv, 1), dtype=np.int64)], axis=1)
    above = mesh.vertices_at(lift)
    if np.any(above < 0):
        raise PreconditionError("cylinder grid does not cover the disk grid")
    eta = u.values[above] / mesh.h
    return MultiField(base, eta, base.tag_mask(Tag.LATERAL))
