"""Simplicial complexes up to dimension 2 and their mod-2 Betti numbers."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ClosureError, ParameterError


@dataclass(frozen=True)
class SimplicialComplex:
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...] = ()
    triangles: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        object.__setattr__(self, "edges", tuple(tuple(int(v) for v in e) for e in self.edges))
        object.__setattr__(self, "triangles",
                           tuple(tuple(int(v) for v in t) for t in self.triangles))
        for dim, simplices in enumerate((self.vertices, self.edges, self.triangles)):
            if len(set(simplices)) != len(simplices):
                raise ClosureError(f"duplicate {dim}-simplex")
        for s in self.edges + self.triangles:
            if any(a >= b for a, b in zip(s, s[1:])):
                raise ClosureError(f"simplex {s} is not sorted ascending")

    def check_closure(self) -> None:
        vs = set(self.vertices)
        es = set(self.edges)
        for e in self.edges:
            if not vs.issuperset(e):
                raise ClosureError(f"edge {e} uses a vertex outside the complex")
        for t in self.triangles:
            for face in combinations(t, 2):
                if face not in es:
                    raise ClosureError(f"triangle {t} is missing edge {face}")

    def is_subcomplex_of(self, other: "SimplicialComplex") -> bool:
        return (set(self.vertices) <= set(other.vertices)
                and set(self.edges) <= set(other.edges)
                and set(self.triangles) <= set(other.triangles))


def flag_complex(vertices, edges) -> SimplicialComplex:
    """Clique complex truncated at dimension 2: a triangle for every 3-clique."""
    vertices = sorted(int(v) for v in vertices)
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges})
    nbrs: dict[int, set[int]] = {v: set() for v in vertices}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    triangles = []
    for a, b in edges:
        for c in nbrs[a] & nbrs[b]:
            if c > b:
                triangles.append((a, b, c))
    triangles.sort()
    return SimplicialComplex(tuple(vertices), tuple(edges), tuple(triangles))


@dataclass
class Gf2Matrix:
    """Binary matrix kept as one Python-int bit set per column."""

    row_count: int
    col_count: int
    columns: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.columns) != self.col_count:
            raise ValueError("column count mismatch")
        limit = 1 << self.row_count
        if any(c < 0 or c >= limit for c in self.columns):
            raise ValueError("bit index beyond row_count")

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.row_count, self.col_count), dtype=np.uint8)
        for j, col in enumerate(self.columns):
            while col:
                low = col & -col
                out[low.bit_length() - 1, j] = 1
                col ^= low
        return out

    @classmethod
    def from_dense(cls, arr) -> "Gf2Matrix":
        arr = np.asarray(arr) % 2
        rows, cols = arr.shape
        columns = [sum(1 << int(i) for i in np.flatnonzero(arr[:, j])) for j in range(cols)]
        return cls(rows, cols, columns)

    def __matmul__(self, other: "Gf2Matrix") -> "Gf2Matrix":
        if self.col_count != other.row_count:
            raise ValueError("shape mismatch")
        out = []
        for col in other.columns:
            acc = 0
            while col:
                low = col & -col
                acc ^= self.columns[low.bit_length() - 1]
                col ^= low
            out.append(acc)
        return Gf2Matrix(self.row_count, other.col_count, out)

    def is_zero(self) -> bool:
        return not any(self.columns)


def boundary_matrix(cx: SimplicialComplex, k: int) -> Gf2Matrix:
    if k == 1:
        index = {v: i for i, v in enumerate(cx.vertices)}
        rows, simplices = len(cx.vertices), cx.edges
    elif k == 2:
        index = {e: i for i, e in enumerate(cx.edges)}
        rows, simplices = len(cx.edges), cx.triangles
    else:
        raise ParameterError(f"boundary order must be 1 or 2, got {k}")
    columns = []
    for s in simplices:
        col = 0
        for face in combinations(s, k):
            key = face[0] if k == 1 else face
            try:
                col |= 1 << index[key]
            except KeyError:
                raise ClosureError(f"face {face} of {s} is not in the complex") from None
        columns.append(col)
    return Gf2Matrix(rows, len(columns), columns)


def gf2_rank(m: Gf2Matrix) -> int:
    """Rank over GF(2) by elimination on pivot = highest set bit."""
    pivots: dict[int, int] = {}
    for col in m.columns:
        while col:
            top = col.bit_length() - 1
            if top not in pivots:
                pivots[top] = col
                break
            col ^= pivots[top]
    return len(pivots)


@dataclass(frozen=True)
class BettiProfile:
    betti0: int
    betti1: int


def betti_numbers(cx: SimplicialComplex) -> BettiProfile:
    r1 = gf2_rank(boundary_matrix(cx, 1))
    r2 = gf2_rank(boundary_matrix(cx, 2)) if cx.triangles else 0
    return BettiProfile(len(cx.vertices) - r1, len(cx.edges) - r1 - r2)


def vr_complex(points, r: float, metric, threshold_factor: float = 1.0) -> SimplicialComplex:
    """Vietoris–Rips complex truncated at dimension 2.

    ``points`` maps vertex id -> coordinate and ``metric(a, b)`` gives distances.
    A simplex enters when every pairwise distance is at most
    ``threshold_factor * r``; pass 2 to read ``r`` as a ball radius.
    """
    if r < 0:
        raise ParameterError("r must be nonnegative")
    items = list(points.items()) if isinstance(points, dict) else list(enumerate(points))
    cut = threshold_factor * r
    edges = [(a, b) for (a, pa), (b, pb) in combinations(sorted(items, key=lambda t: t[0]), 2)
             if metric(pa, pb) <= cut]
    return flag_complex([v for v, _ in items], edges)
