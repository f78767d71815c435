"""Circle embedding, maxmin landmarks and the lazy-witness filtration.

Agents sit on a lattice of K equidistant sites around a circle.  Every distance
is computed exactly in integer lattice steps and only converted to a radius at
the end, so ties (which decide edge births on lattices) are never blurred by
rounding.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams, NetworkState, density, init_state, majority_step
from .errors import ContractError, NoLoopError, ParameterError
from .homology import SimplicialComplex, flag_complex
from .rng import DYNAMICS, INIT, LANDMARKS, as_generator

log = logging.getLogger(__name__)

DEFAULT_LANDMARKS = 50


@dataclass(frozen=True)
class FiltrationScale:
    """Converts lattice steps to filtration radii.

    ``circumference`` is the length of the circle (2*pi for the unit circle).
    A simplex is admitted at radius r when its witness value is at most
    ``threshold_factor * r``: 1 compares distances with r directly, 2 reads r
    as a ball radius (d <= 2r).
    """

    circumference: float = 2.0 * math.pi
    threshold_factor: float = 1.0

    def __post_init__(self):
        if self.circumference <= 0:
            raise ParameterError("circumference must be positive")
        if self.threshold_factor not in (1.0, 2.0):
            raise ParameterError("threshold_factor must be 1 or 2")

    def unit(self, K: int) -> float:
        return self.circumference / (K * self.threshold_factor)

    def to_radius(self, raw, K: int):
        return np.asarray(raw, dtype=float) * self.unit(K)

    def to_raw(self, r: float, K: int) -> float:
        return r / self.unit(K)


BALL_RADIUS = FiltrationScale(circumference=1.0, threshold_factor=2.0)


def circle_dist(a, b):
    """Geodesic distance between positions given as fractions of the circumference."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return np.minimum(d, 1.0 - d)


def lattice_dist(a, b, K: int):
    d = np.abs(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64))
    return np.minimum(d, K - d)


@dataclass(frozen=True)
class WitnessSet:
    """Active agents, identified by their 0-based lattice site on a K-circle."""

    ids: np.ndarray
    K: int

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.size and (np.any(np.diff(ids) <= 0) or ids[0] < 0 or ids[-1] >= self.K):
            raise ContractError("witness ids must be strictly increasing sites in [0, K)")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_state(cls, state: NetworkState) -> "WitnessSet":
        return cls(state.active_ids(), state.K)

    @property
    def positions(self) -> np.ndarray:
        return self.ids / self.K

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class LandmarkSet:
    ids: np.ndarray  # selection order
    cover_steps: tuple[int, ...] = ()  # distance-to-set of each pick after the first
    warning: str | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def sorted_ids(self) -> np.ndarray:
        return np.sort(self.ids)


def select_landmarks(Z: WitnessSet, n: int, rng) -> LandmarkSet:
    """Maxmin selection: random first pick, then repeatedly the farthest witness.

    Ties among maximizers are broken uniformly at random.  Asking for more
    landmarks than witnesses returns all of them and records a warning.
    """
    if n < 1:
        raise ParameterError("need at least one landmark")
    if len(Z) == 0:
        raise ContractError("empty witness set")
    warning = None
    if n > len(Z):
        warning = f"requested {n} landmarks but only {len(Z)} witnesses; clamped"
        log.debug(warning)
        n = len(Z)
    picks, covers = _maxmin_circle(Z.ids, Z.K, n, as_generator(rng))
    return LandmarkSet(Z.ids[np.array(picks)], tuple(covers), warning)


def _maxmin_circle(ids: np.ndarray, K: int, n: int, gen) -> tuple[list[int], list[int]]:
    # On a circle the distance-to-set of a witness is set by the two landmarks
    # bracketing it, so each gap between consecutive landmarks is scored by the
    # witnesses next to its midpoint.  Indices run over ids followed by ids + K.
    size = len(ids)
    ext = np.concatenate([ids, ids + K])

    def score(i, j):
        # best witnesses strictly between ext[i] and ext[j]
        if j - i < 2:
            return -1, ()
        xi, xj = int(ext[i]), int(ext[j])
        lo, hi = i + 1, j - 1
        k = lo + int(ext[lo:hi + 1].searchsorted((xi + xj) / 2, side="right"))
        best, cands = -1, []
        for c in (k - 1, k):
            if lo <= c <= hi:
                xc = int(ext[c])
                v = min(xc - xi, xj - xc)
                if v > best:
                    best, cands = v, [c]
                elif v == best:
                    cands.append(c)
        return best, tuple(cands)

    first = int(gen.integers(size))
    picks, covers = [first], []
    gaps = {first: (first + size, *score(first, first + size))}
    for _ in range(n - 1):
        top = max(v for _, v, _ in gaps.values())
        pool = [(i, c) for i, (_, v, cs) in gaps.items() if v == top for c in cs]
        i, c = pool[int(gen.integers(len(pool)))] if len(pool) > 1 else pool[0]
        j = gaps[i][0]
        gaps[i] = (c, *score(i, c))
        ci = c % size
        cj = j - (c - ci)
        gaps[ci] = (cj, *score(ci, cj))
        picks.append(ci)
        covers.append(int(top))
    return picks, covers


# --- witness values --------------------------------------------------------


def _check_subset(Z: WitnessSet, L: LandmarkSet) -> np.ndarray:
    P = L.sorted_ids
    if np.any(np.diff(P) == 0):
        raise ContractError("duplicate landmarks")
    idx = np.minimum(np.searchsorted(Z.ids, P), len(Z.ids) - 1)
    if len(Z.ids) == 0 or np.any(Z.ids[idx] != P):
        raise ContractError("landmarks must be a subset of the witnesses")
    return P


def edge_weights(Z: WitnessSet, L: LandmarkSet) -> tuple[np.ndarray, np.ndarray]:
    """Exact birth value (lattice steps) of every landmark pair.

    Returns ``(P, W)`` with ``P`` the sorted landmark sites and ``W[a, b]`` the
    smallest ``max(d(P[a], x), d(P[b], x)) - d(x, L)`` over all witnesses x.
    """
    P = _check_subset(Z, L)
    D = lattice_dist(P[:, None], Z.ids[None, :], Z.K)
    m = D.min(axis=0)
    n = len(P)
    W = np.zeros((n, n), dtype=np.int64)
    for a in range(n):
        W[a] = (np.maximum(D[a], D) - m).min(axis=1)
    np.fill_diagonal(W, 0)
    return P, W


def candidate_radii(Z: WitnessSet, L: LandmarkSet,
                    scale: FiltrationScale = FiltrationScale()) -> np.ndarray:
    """Every value at which some witness could admit some landmark pair."""
    P = _check_subset(Z, L)
    D = lattice_dist(P[:, None], Z.ids[None, :], Z.K)
    m = D.min(axis=0)
    values = [np.zeros(0, dtype=np.int64)]
    for a in range(len(P) - 1):
        values.append(np.unique(np.maximum(D[a], D[a + 1:]) - m))
    raw = np.unique(np.concatenate(values))
    return scale.to_radius(np.maximum(raw, 0), Z.K)


def lazy_witness_complex(Z: WitnessSet, L: LandmarkSet, r: float,
                         scale: FiltrationScale = FiltrationScale()) -> SimplicialComplex:
    """Lazy-witness complex: witnessed edges plus every triangle they bound."""
    if r < 0:
        raise ParameterError("r must be nonnegative")
    P, W = edge_weights(Z, L)
    R = scale.to_radius(W, Z.K)
    a, b = np.nonzero(np.triu(R <= r, k=1))
    return flag_complex(P.tolist(), zip(P[a].tolist(), P[b].tolist()))


# --- first loop -------------------------------------------------------------


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def _flag_betti1(edges: list[tuple[int, int]], components: int, n: int) -> int:
    # Betti_1 = E - rank d1 - rank d2, with rank d1 = V - components
    index = {e: k for k, e in enumerate(edges)}
    nbrs: dict[int, set[int]] = {}
    for a, b in edges:
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    pivots: dict[int, int] = {}
    for a, b in edges:
        for c in nbrs[a] & nbrs[b]:
            if c > b:
                col = (1 << index[(a, b)]) | (1 << index[(a, c)]) | (1 << index[(b, c)])
                while col:
                    top = col.bit_length() - 1
                    if top not in pivots:
                        pivots[top] = col
                        break
                    col ^= pivots[top]
    return len(edges) - (n - components) - len(pivots)


def first_loop_value(n: int, pairs: np.ndarray, weights: np.ndarray):
    """Smallest weight at which the flag complex on ``pairs`` has a 1-cycle.

    Scans the distinct weights in ascending order.  Betti_1 can only rise when
    an edge joins two vertices already connected, so the homology is computed
    only at those values.  Returns None when no loop ever forms.
    """
    order = np.argsort(weights, kind="stable")
    pairs = pairs[order].tolist()
    weights = weights[order].tolist()
    parent = list(range(n))
    components = n
    present: list[tuple[int, int]] = []
    i = 0
    while i < len(weights):
        w = weights[i]
        j = i
        closes = False
        while j < len(weights) and weights[j] == w:
            a, b = pairs[j]
            if a > b:
                a, b = b, a
            ra, rb = _find(parent, a), _find(parent, b)
            if ra == rb:
                closes = True
            else:
                parent[ra] = rb
                components -= 1
            present.append((a, b))
            j += 1
        if closes and _flag_betti1(present, components, n) >= 1:
            return w
        i = j
    return None


def _full_first_loop(Z: WitnessSet, L: LandmarkSet):
    P, W = edge_weights(Z, L)
    a, b = np.triu_indices(len(P), k=1)
    return first_loop_value(len(P), np.column_stack([a, b]), W[a, b])


_OFFSETS = 3


def _circle_first_loop(Z: WitnessSet, P: np.ndarray):
    """First-loop value using only landmark pairs at most ``_OFFSETS`` apart.

    The answer is accepted only when a lower bound on every omitted witness
    value proves the truncated filtration coincides with the full one up to
    that value; otherwise returns ``None`` and the caller falls back.
    """
    K, h, n = Z.K, _OFFSETS, len(P)
    if n < 2 * h + 2:
        return None
    # rotate the witnesses so their gap indices are non-decreasing
    x = np.roll(Z.ids, -int(np.searchsorted(Z.ids, P[0])))
    g = np.searchsorted(P, x, side="right") - 1
    g[g < 0] = n - 1
    # distances to the a-th landmark left of the gap and b-th right of it
    dl = [lattice_dist(x, P[(g - a) % n], K) for a in range(h)]
    dr = [lattice_dist(x, P[(g + 1 + b) % n], K) for b in range(h)]
    m = np.minimum(dl[0], dr[0])
    M = int(m.max())

    runs = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
    gap = g[runs]
    best = np.full(n * h, np.iinfo(np.int64).max, dtype=np.int64)
    for a in range(h):
        slot = ((gap - a) % n) * h
        for b in range(h - a):
            low = np.minimum.reduceat(np.maximum(dl[a], dr[b]) - m, runs)
            idx = slot + (a + b)
            best[idx] = np.minimum(best[idx], low)

    left = np.repeat(np.arange(n), h)
    right = (left + np.tile(np.arange(1, h + 1), n)) % n
    arc = (P[right] - P[left]) % K
    if arc.max() > K // 2:
        return None
    value = first_loop_value(n, np.column_stack([left, right]), best)
    if value is None:
        return None
    # witnesses outside a pair's arc contribute at least (K - arc)/2 - M
    if (K - arc.max()) / 2.0 - M <= value:
        return None
    # pairs more than h landmarks apart contribute at least d/2 - M
    if n > 2 * h + 1:
        near = (np.roll(P, -(h + 1)) - P) % K
        far = (np.roll(P, -(n - h - 1)) - P) % K
        closest = min(int(near.min()), int((K - far).min()))
        if closest / 2.0 - M <= value:
            return None
    return int(value)


def min_betti1_radius(Z: WitnessSet, L: LandmarkSet,
                      scale: FiltrationScale = FiltrationScale()) -> float:
    """Smallest filtration radius at which the lazy-witness complex has Betti_1 >= 1.

    First-birth semantics: Betti_1 is not monotone in r, so this is the first
    value of an ascending scan, not a bisection.
    """
    if len(L) < 3:
        raise NoLoopError(f"{len(L)} landmarks cannot carry a 1-cycle")
    P = _check_subset(Z, L)
    raw = _circle_first_loop(Z, P)
    if raw is None:
        raw = _full_first_loop(Z, L)
    if raw is None:
        raise NoLoopError("no radius produces a 1-dimensional hole")
    return float(scale.to_radius(raw, Z.K))


@dataclass
class FiltrationInstance:
    Z: WitnessSet
    L: LandmarkSet
    scale: FiltrationScale = field(default_factory=FiltrationScale)

    @property
    def candidate_radii(self) -> np.ndarray:
        return candidate_radii(self.Z, self.L, self.scale)

    @property
    def r_min(self) -> float | None:
        try:
            return min_betti1_radius(self.Z, self.L, self.scale)
        except NoLoopError:
            return None


def state_rmin(state: NetworkState, n_landmarks: int, rng,
               scale: FiltrationScale = FiltrationScale()) -> tuple[float | None, int]:
    """(r_min or None, landmark count) for one microscopic state."""
    Z = WitnessSet.from_state(state)
    if len(Z) < 3:
        return None, len(Z)
    L = select_landmarks(Z, n_landmarks, rng)
    try:
        return min_betti1_radius(Z, L, scale), len(L)
    except NoLoopError:
        return None, len(L)


# --- time series ------------------------------------------------------------


@dataclass(frozen=True)
class RminRecord:
    t: int
    density: float
    r_min: float | None
    landmark_count: int

    @property
    def defined(self) -> bool:
        return self.r_min is not None


def rmin_series(graph, params: ModelParams, n_steps: int, n_landmarks: int, rng,
                scale: FiltrationScale = FiltrationScale(),
                state: NetworkState | None = None) -> list[RminRecord]:
    """Evolve one majority step at a time and record (d_t, r_min;t).

    Landmarks are re-drawn at every step.  Steps with fewer than three active
    agents, or without any loop, record ``r_min=None``.
    """
    if n_steps < 0:
        raise ParameterError("n_steps must be nonnegative")
    if state is None:
        state = init_state(graph.node_count, params.d0, rng.child(INIT))
    dyn = rng.child(DYNAMICS)
    lm = rng.child(LANDMARKS)
    out = []
    for _ in range(n_steps):
        state = majority_step(graph, state, params.epsilon, dyn, params.ties)
        r, count = state_rmin(state, n_landmarks, lm, scale)
        out.append(RminRecord(state.time_index, density(state), r, count))
    return out


SERIES_HEADER = ("t", "d_t", "r_min_t", "landmark_count", "defined_flag")


def fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_series_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for rec in records:
            w.writerow([rec.t, fmt(rec.density), fmt(rec.r_min), rec.landmark_count,
                        int(rec.defined)])


def read_series_csv(path) -> list[RminRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [RminRecord(int(r["t"]), float(r["d_t"]),
                       float(r["r_min_t"]) if r["r_min_t"] else None,
                       int(r["landmark_count"])) for r in rows]
