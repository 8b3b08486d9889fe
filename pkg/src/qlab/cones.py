"""Cornered open books: enumeration, exact densities and the 2-d quadrant ledger.

A book with boundary pieces V0_1..V0_N0 (multiplicities Q0_k) and
V1_1..V1_N1 (multiplicities Q1_l) is a sum of quarter planes, each bounded
by one V0 piece and one V1 piece. Quadrants with the same label pair
coincide, so a book is a nonnegative integer matrix M[k, l] whose row sums
are Q0 and column sums are Q1.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .transport import DiscreteMeasure, WedgeBoundary, quadrant_measure, strong_excess

INF = math.inf


class BookkeepingError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryConfig:
    q0: tuple[int, ...]
    q1: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "q0", tuple(int(x) for x in self.q0))
        object.__setattr__(self, "q1", tuple(int(x) for x in self.q1))
        if not self.q0 or not self.q1:
            raise ValueError("need at least one piece on each side")
        if min(self.q0 + self.q1) <= 0:
            raise ValueError("boundary multiplicities must be positive")

    @property
    def n0(self) -> int:
        return len(self.q0)

    @property
    def n1(self) -> int:
        return len(self.q1)

    @property
    def q(self) -> int:
        return sum(self.q0)

    @property
    def balanced(self) -> bool:
        return sum(self.q0) == sum(self.q1)

    def to_dict(self) -> dict:
        return {"q0": list(self.q0), "q1": list(self.q1)}


@dataclass(frozen=True)
class Quadrant:
    k0: int  # index of the V0 piece (0-based)
    k1: int  # index of the V1 piece
    multiplicity: int


@dataclass(frozen=True)
class CorneredOpenBook:
    """Book in canonical form: quadrants sorted by label pair, one entry per pair."""

    config: BoundaryConfig
    quadrants: tuple[Quadrant, ...]
    m: int = 2

    @classmethod
    def from_matrix(cls, config: BoundaryConfig, matrix, m: int = 2) -> "CorneredOpenBook":
        mat = np.asarray(matrix, dtype=int)
        quads = tuple(Quadrant(k, l, int(mat[k, l])) for k in range(mat.shape[0]) for l in range(mat.shape[1])
                      if mat[k, l] > 0)
        return cls(config, quads, m)

    @property
    def matrix(self) -> np.ndarray:
        mat = np.zeros((self.config.n0, self.config.n1), dtype=int)
        for qd in self.quadrants:
            mat[qd.k0, qd.k1] += qd.multiplicity
        return mat

    def is_admissible(self) -> bool:
        mat = self.matrix
        return tuple(mat.sum(axis=1)) == self.config.q0 and tuple(mat.sum(axis=0)) == self.config.q1

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "config": self.config.to_dict(),
            "quadrants": [[qd.k0 + 1, qd.k1 + 1, qd.multiplicity] for qd in self.quadrants],
            "density": str(book_density(self)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorneredOpenBook":
        cfg = BoundaryConfig(d["config"]["q0"], d["config"]["q1"])
        quads = tuple(Quadrant(a - 1, b - 1, mult) for a, b, mult in d["quadrants"])
        return cls(cfg, quads, d.get("m", 2))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "CorneredOpenBook":
        return cls.from_dict(json.loads(text))


def _row_fillings(total: int, caps: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Compositions of ``total`` into len(caps) nonnegative parts bounded by ``caps``."""
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(min(total, caps[0]), -1, -1):
        for rest in _row_fillings(total - first, caps[1:]):
            yield (first,) + rest


def enumerate_admissible_books(b: BoundaryConfig, max_sheets: int | None = None) -> list[CorneredOpenBook]:
    """All books with the given boundary marginals and at most ``max_sheets`` distinct quadrants."""
    if max_sheets is None:
        max_sheets = b.n0 * b.n1
    if max_sheets < max(b.n0, b.n1):
        raise ValueError("max_sheets must be at least max(N0, N1)")
    if not b.balanced:
        return []
    out = []

    def fill(row: int, caps: tuple[int, ...], rows: list):
        if row == b.n0:
            if not any(caps):
                mat = np.array(rows)
                if np.count_nonzero(mat) <= max_sheets:
                    out.append(CorneredOpenBook.from_matrix(b, mat))
            return
        for filling in _row_fillings(b.q0[row], caps):
            fill(row + 1, tuple(c - f for c, f in zip(caps, filling)), rows + [filling])

    fill(0, b.q1, [])
    return out


def book_density(c: CorneredOpenBook) -> Fraction:
    """Each perpendicular quadrant fills a quarter of a plane."""
    return Fraction(sum(qd.multiplicity for qd in c.quadrants), 4)


def quadrature_density(c: CorneredOpenBook, h: float = 1 / 512) -> float:
    """|C|(B_1) / omega_2 by counting midpoint cells of one quadrant inside the unit disk."""
    if c.m != 2:
        raise ValueError("quadrature density is implemented for m = 2")
    mid = (np.arange(int(round(1 / h))) + 0.5) * h
    s, t = np.meshgrid(mid, mid, indexing="ij")
    quarter = np.count_nonzero(s**2 + t**2 < 1.0) * h * h
    return quarter * sum(qd.multiplicity for qd in c.quadrants) / math.pi


# -- 2-d classification ledger -------------------------------------------------------------


class PieceType(str, enum.Enum):
    FULL_PLANE = "FULL_PLANE"
    TYPE1 = "TYPE1"  # V0_a to V1_b, orientation respected
    TYPE2 = "TYPE2"  # V0_a to V1_b, orientation reversed
    TYPE3 = "TYPE3"  # joins two pieces of the same side


class Verdict(str, enum.Enum):
    MINIMAL_BOOK = "MINIMAL_BOOK"
    DENSITY_ABOVE_Q4 = "DENSITY_ABOVE_Q4"
    INADMISSIBLE = "INADMISSIBLE"


@dataclass(frozen=True)
class Piece:
    """A piece of a 2-d cone through the corner.

    ``ends`` lists the boundary half-lines the piece ends on: TYPE1/TYPE2
    use ``(a, b)`` meaning V0_a and V1_b; TYPE3 uses ``(side, a, a')`` for two
    distinct pieces of one side; FULL_PLANE has none.
    """

    kind: PieceType
    multiplicity: int
    ends: tuple = ()

    def boundary(self, n0: int, n1: int) -> tuple[np.ndarray, np.ndarray]:
        """Signed multiplicities induced on the V0 and V1 pieces (V1 counted with the book's sign)."""
        c0, c1 = np.zeros(n0, dtype=int), np.zeros(n1, dtype=int)
        m = self.multiplicity
        if self.kind in (PieceType.TYPE1, PieceType.TYPE2):
            a, b = self.ends
            sign = 1 if self.kind is PieceType.TYPE1 else -1
            c0[a] += sign * m
            c1[b] += sign * m
        elif self.kind is PieceType.TYPE3:
            side, a, a2 = self.ends
            if a == a2:
                raise BookkeepingError("a type-3 piece joins two distinct pieces")
            target = c0 if side == 0 else c1
            target[a] += m
            target[a2] -= m
        return c0, c1


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    density: Fraction
    q: int


def _as_piece(item) -> Piece:
    if isinstance(item, Piece):
        return item
    kind, mult = item[0], item[1]
    return Piece(PieceType(kind), int(mult), tuple(item[2]) if len(item) > 2 else ())


def classify_2d_cone(decomposition: Sequence, boundary: BoundaryConfig | None = None) -> Classification:
    """Density, induced boundary multiplicity and verdict for a list of pieces.

    Pieces are :class:`Piece` or ``(type, multiplicity)`` pairs. With a
    ``boundary`` the labelled ends must reproduce its multiplicities;
    without one the net multiplicity Q = #TYPE1 - #TYPE2 must be positive.
    """
    pieces = [_as_piece(p) for p in decomposition]
    if any(p.multiplicity < 0 for p in pieces):
        raise BookkeepingError("multiplicities must be nonnegative")
    pieces = [p for p in pieces if p.multiplicity > 0]
    quarter = sum(p.multiplicity for p in pieces if p.kind is not PieceType.FULL_PLANE)
    full = sum(p.multiplicity for p in pieces if p.kind is PieceType.FULL_PLANE)
    density = Fraction(quarter, 4) + full
    if boundary is not None:
        c0 = np.zeros(boundary.n0, dtype=int)
        c1 = np.zeros(boundary.n1, dtype=int)
        for p in pieces:
            a, b = p.boundary(boundary.n0, boundary.n1)
            c0 += a
            c1 += b
        if tuple(c0) != boundary.q0 or tuple(c1) != boundary.q1:
            raise BookkeepingError(f"pieces induce boundary {tuple(c0)} / {tuple(c1)}, "
                                   f"expected {boundary.q0} / {boundary.q1}")
        q = boundary.q
    else:
        q = sum(p.multiplicity for p in pieces if p.kind is PieceType.TYPE1) - \
            sum(p.multiplicity for p in pieces if p.kind is PieceType.TYPE2)
        if q <= 0:
            raise BookkeepingError("net boundary multiplicity must be positive")
    kinds = {p.kind for p in pieces}
    if PieceType.FULL_PLANE in kinds:
        verdict = Verdict.INADMISSIBLE
    elif PieceType.TYPE3 in kinds:
        verdict = Verdict.DENSITY_ABOVE_Q4
    elif PieceType.TYPE2 in kinds:
        verdict = Verdict.INADMISSIBLE
    elif density == Fraction(q, 4):
        verdict = Verdict.MINIMAL_BOOK
    else:
        verdict = Verdict.DENSITY_ABOVE_Q4
    return Classification(verdict, density, q)


def piece_catalogue(n0: int, n1: int) -> list[tuple[PieceType, tuple]]:
    """Every labelled piece shape for N0 x N1 boundary pieces."""
    out: list[tuple[PieceType, tuple]] = [(PieceType.FULL_PLANE, ())]
    for kind in (PieceType.TYPE1, PieceType.TYPE2):
        out += [(kind, (a, b)) for a in range(n0) for b in range(n1)]
    for side, n in ((0, n0), (1, n1)):
        out += [(PieceType.TYPE3, (side, a, a2)) for a in range(n) for a2 in range(n) if a != a2]
    return out


@dataclass(frozen=True)
class CensusRow:
    config: BoundaryConfig
    pieces: tuple[Piece, ...]
    classification: Classification

    @property
    def all_type1(self) -> bool:
        return all(p.kind is PieceType.TYPE1 for p in self.pieces)


def labelled_decompositions(b: BoundaryConfig, max_pieces: int = 4, max_multiplicity: int = 3) -> list[tuple[Piece, ...]]:
    """Decompositions into distinct labelled pieces whose ends reproduce the boundary of ``b``."""
    shapes = piece_catalogue(b.n0, b.n1)
    vecs = []
    for kind, ends in shapes:
        c0, c1 = Piece(kind, 1, ends).boundary(b.n0, b.n1)
        vecs.append(np.concatenate([c0, c1]))
    vecs = np.array(vecs)
    target = np.array(b.q0 + b.q1)
    mults = np.arange(1, max_multiplicity + 1)
    found = []
    for size in range(1, max_pieces + 1):
        combos = np.array(list(itertools.combinations(range(len(shapes)), size)), dtype=int)
        if len(combos) == 0:
            continue
        grids = np.array(list(itertools.product(mults, repeat=size)), dtype=int)  # (g, size)
        # induced boundary for every (combo, multiplicity) pair
        induced = np.einsum("gs,csd->cgd", grids, vecs[combos])
        hit_c, hit_g = np.nonzero(np.all(induced == target, axis=2))
        for c, g in zip(hit_c, hit_g):
            found.append(tuple(Piece(shapes[i][0], int(m), shapes[i][1]) for i, m in zip(combos[c], grids[g])))
    return found


def boundary_configs(q_max: int, n_max: int) -> list[BoundaryConfig]:
    out = []
    for q in range(1, q_max + 1):
        sides = [c for n in range(1, n_max + 1) for c in _positive_compositions(q, n)]
        out += [BoundaryConfig(a, b) for a in sides for b in sides]
    return out


def _positive_compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    return [c for c in itertools.product(range(1, total + 1), repeat=parts) if sum(c) == total]


def census(q_max: int = 3, n_max: int = 2, max_pieces: int = 4, max_multiplicity: int = 3) -> list[CensusRow]:
    """Classify every labelled decomposition for every boundary configuration within the bounds."""
    rows = []
    for cfg in boundary_configs(q_max, n_max):
        for pieces in labelled_decompositions(cfg, max_pieces, max_multiplicity):
            rows.append(CensusRow(cfg, pieces, classify_2d_cone(pieces, cfg)))
    return rows


# -- uniqueness gap ----------------------------------------------------------------------------


def book_geometry(b: BoundaryConfig) -> tuple[np.ndarray, np.ndarray, WedgeBoundary]:
    """Realise V0_k as e_k and V1_l as e_(N0+l) in R^(N0+N1), so every quadrant is perpendicular."""
    e = np.eye(b.n0 + b.n1)
    v0, v1 = e[: b.n0], e[b.n0:]
    return v0, v1, WedgeBoundary.from_rays(e)


def book_measure(c: CorneredOpenBook, resolution: int = 12, radius: float = 1.0) -> DiscreteMeasure:
    v0, v1, _ = book_geometry(c.config)
    parts = [quadrant_measure(v0[qd.k0], v1[qd.k1], radius, resolution, qd.multiplicity) for qd in c.quadrants]
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def uniqueness_gap(b: BoundaryConfig, resolution: int = 12) -> float:
    """Smallest strong excess between two distinct admissible books at unit scale; INF for at most one book."""
    books = enumerate_admissible_books(b)
    if len(books) <= 1:
        return INF
    _, _, wedge = book_geometry(b)
    measures = [book_measure(c, resolution) for c in books]
    return min(strong_excess(measures[i], measures[j], wedge, 1.0, 2)
               for i in range(len(books)) for j in range(i + 1, len(books)))
