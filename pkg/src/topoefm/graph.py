"""Erdős–Rényi graphs stored in compressed neighbour-list (CSR) form."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .rng import GRAPH, RngStream, as_generator


@dataclass(frozen=True, eq=False)
class ErGraph:
    """Immutable undirected graph; ``neighbors(i)`` is sorted and loop-free."""

    node_count: int
    offsets: np.ndarray  # length K + 1
    neighbor_ids: np.ndarray
    connect_prob: float
    gen_seed: int

    def neighbors(self, i: int) -> np.ndarray:
        return self.neighbor_ids[self.offsets[i]:self.offsets[i + 1]]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def edge_count(self) -> int:
        return len(self.neighbor_ids) // 2

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.neighbor_ids), dtype=np.int32)
        return sp.csr_matrix((data, self.neighbor_ids, self.offsets),
                             shape=(self.node_count, self.node_count))

    def edges(self) -> np.ndarray:
        """(m, 2) array of pairs with i < j, sorted lexicographically."""
        rows = np.repeat(np.arange(self.node_count), self.degree)
        keep = rows < self.neighbor_ids
        return np.column_stack([rows[keep], self.neighbor_ids[keep]])

    def check_invariants(self) -> None:
        K = self.node_count
        if len(self.offsets) != K + 1 or self.offsets[0] != 0:
            raise AssertionError("bad offsets")
        rows = np.repeat(np.arange(K), self.degree)
        cols = self.neighbor_ids
        if np.any(rows == cols):
            raise AssertionError("self-loop present")
        for i in range(K):
            nb = self.neighbors(i)
            if np.any(np.diff(nb) <= 0):
                raise AssertionError(f"neighbour list of {i} not strictly ascending")
        fwd = set(zip(rows.tolist(), cols.tolist()))
        if any((j, i) not in fwd for i, j in fwd):
            raise AssertionError("adjacency not symmetric")
        if len(cols) % 2:
            raise AssertionError("odd neighbour-entry count")


def from_edges(K: int, edges: np.ndarray, p: float, seed: int) -> ErGraph:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    offsets = np.zeros(K + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    np.cumsum(offsets, out=offsets)
    return ErGraph(K, offsets, dst, float(p), int(seed))


def _pair_from_index(k: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    # row i owns the linear indices [S_i, S_i + K - 1 - i) of the upper triangle
    i_all = np.arange(K - 1, dtype=np.int64)
    starts = i_all * (2 * K - i_all - 1) // 2
    i = np.searchsorted(starts, k, side="right") - 1
    j = k - starts[i] + i + 1
    return i, j


def generate_er(K: int, p: float, seed: int) -> ErGraph:
    """G(K, p): every unordered pair is an edge independently with probability p.

    Edges are located by geometric skips over the linear upper-triangle index,
    which is exact Bernoulli sampling in O(edges) memory.
    """
    if K < 2:
        raise ParameterError(f"K must be at least 2, got {K}")
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    gen = as_generator(RngStream(seed).child(GRAPH))
    total = K * (K - 1) // 2
    chunk = int(total * p + 6.0 * np.sqrt(total * p) + 16)
    picked = []
    pos = -1
    while True:
        gaps = gen.geometric(p, size=chunk)
        cand = pos + np.cumsum(gaps)
        picked.append(cand[cand < total])
        if cand[-1] >= total:
            break
        pos = int(cand[-1])
    k = np.concatenate(picked)
    i, j = _pair_from_index(k, K)
    return from_edges(K, np.column_stack([i, j]), p, seed)


def dump_edgelist(graph: ErGraph, path) -> None:
    lines = [f"{graph.node_count} {graph.connect_prob!r} {graph.gen_seed}"]
    lines += [f"{i} {j}" for i, j in graph.edges().tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_edgelist(path) -> ErGraph:
    with open(path) as fh:
        K, p, seed = fh.readline().split()
        body = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    K = int(K)
    if body.size == 0:
        body = np.empty((0, 2), dtype=np.int64)
    if np.any(body[:, 0] >= body[:, 1]) or np.any(body < 0) or np.any(body >= K):
        raise ParameterError("edge list rows must be 0-based pairs 'i j' with i < j < K")
    return from_edges(K, body, float(p), int(seed))
