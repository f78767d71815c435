"""Independent brute-force references used by the test-suite."""

from itertools import combinations

import numpy as np


def components(vertices, edges) -> int:
    parent = {v: v for v in vertices}

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(v) for v in vertices})


def brute_rank(columns) -> int:
    """GF(2) rank as log2 of the span size, by enumerating every subset sum."""
    span = {0}
    for c in columns:
        span |= {s ^ c for s in span}
    return len(span).bit_length() - 1


def random_complex(rng, max_vertices=12):
    """Random closed complex: random graph, then a random subset of its 3-cliques."""
    n = int(rng.integers(1, max_vertices + 1))
    vertices = list(range(n))
    p = rng.uniform(0.1, 0.8)
    edges = [e for e in combinations(vertices, 2) if rng.random() < p]
    es = set(edges)
    triangles = [t for t in combinations(vertices, 3)
                 if all(f in es for f in combinations(t, 2)) and rng.random() < 0.5]
    return vertices, edges, triangles


def lattice_witness_value(a, b, x, landmarks, K):
    def d(u, v):
        return min(abs(u - v), K - abs(u - v))
    return max(d(a, x), d(b, x)) - min(d(x, l) for l in landmarks)


def brute_edge_weights(Z, L, K):
    """Exact pair births by the definition, in lattice steps."""
    P = sorted(L)
    n = len(P)
    W = np.zeros((n, n), dtype=np.int64)
    for i, j in combinations(range(n), 2):
        W[i, j] = W[j, i] = min(lattice_witness_value(P[i], P[j], x, P, K) for x in Z)
    return P, W
