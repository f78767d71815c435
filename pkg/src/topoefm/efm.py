"""Equation-free pieces: lifting, restriction and the coarse time-stepper.

The macroscopic variable is R, the minimal Betti_1 radius of the active agents.
``coarse_step`` composes lift -> T majority steps -> restrict over an ensemble
of independent realizations and averages the result.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .dynamics import ModelParams, NetworkState, density, evolve, init_state
from .errors import (CalibrationError, DegenerateEnsembleError, LiftRangeError, NoLoopError,
                     ParameterError)
from .graph import ErGraph, generate_er
from .rng import COARSE, LANDMARKS, LIFT, RngStream, as_generator, derive_seed
from .witness import (DEFAULT_LANDMARKS, FiltrationScale, WitnessSet, min_betti1_radius,
                      rmin_series, select_landmarks)

LIFT_MODES = ("geometric", "annealing")
GRAPH_POLICIES = ("regenerate", "pinned")


# --- restriction ------------------------------------------------------------


def restrict(state: NetworkState, n_landmarks: int, rng,
             scale: FiltrationScale = FiltrationScale()) -> float:
    """r_min of the active agents, with a fresh maxmin landmark draw."""
    Z = WitnessSet.from_state(state)
    if len(Z) < 3:
        raise NoLoopError(f"{len(Z)} active agents cannot carry a 1-cycle")
    return min_betti1_radius(Z, select_landmarks(Z, n_landmarks, rng), scale)


# --- geometric lift ---------------------------------------------------------


def lattice_state(K: int, spacing: float) -> NetworkState:
    """Agents nearest to 0, spacing, 2*spacing, ... around the circle (spacing as a fraction)."""
    if not 0.0 < spacing < 1.0:
        raise ParameterError("spacing must lie in (0, 1)")
    count = max(1, int(math.floor(1.0 / spacing + 0.5)))
    sites = np.unique(np.rint(np.arange(count) * spacing * K).astype(np.int64) % K)
    bits = np.zeros(K, dtype=np.uint8)
    bits[sites] = 1
    return NetworkState(bits)


@dataclass(frozen=True)
class LiftCalibration:
    """Monotone table spacing -> measured r_min for fixed (K, landmarks, scale).

    Lifting inverts the table by linear interpolation.
    """

    K: int
    n_landmarks: int
    spacing: np.ndarray
    r_min: np.ndarray
    scale: FiltrationScale = field(default_factory=FiltrationScale)

    def __post_init__(self):
        s = np.asarray(self.spacing, dtype=float)
        r = np.asarray(self.r_min, dtype=float)
        object.__setattr__(self, "spacing", s)
        object.__setattr__(self, "r_min", r)
        if s.shape != r.shape or s.ndim != 1:
            raise CalibrationError("spacing and r_min columns must be equal-length vectors")
        if len(s) < 4:
            raise CalibrationError(f"calibration needs at least 4 knots, got {len(s)}")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(r) <= 0):
            raise CalibrationError("calibration columns must be strictly increasing")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.r_min[0]), float(self.r_min[-1])

    def spacing_for(self, R: float) -> float:
        lo, hi = self.domain
        if not lo <= R <= hi:
            raise LiftRangeError(R, lo, hi)
        return float(np.interp(R, self.r_min, self.spacing))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("spacing", "r_min"))
            for s, r in zip(self.spacing, self.r_min):
                w.writerow((repr(float(s)), repr(float(r))))

    @classmethod
    def read_csv(cls, path, K: int, n_landmarks: int,
                 scale: FiltrationScale = FiltrationScale()) -> "LiftCalibration":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"spacing", "r_min"}:
            raise CalibrationError(f"{path}: expected header 'spacing,r_min'")
        return cls(K, n_landmarks, [float(r["spacing"]) for r in rows],
                   [float(r["r_min"]) for r in rows], scale)


def default_spacing_grid(K: int = 10_000, count: int = 16) -> np.ndarray:
    """Log-spaced lattice spacings from 2 to 80 sites, as circle fractions."""
    return np.unique(np.round(np.geomspace(2, 80, count))) / K


def build_lift_calibration(K: int, n_landmarks: int, spacing_grid, rng,
                           repeats: int = 5,
                           scale: FiltrationScale = FiltrationScale()) -> LiftCalibration:
    """Measure r_min of each lattice state, averaged over landmark re-draws.

    Spacings whose mean does not exceed every smaller spacing's mean are
    dropped (the monotone envelope).  Fewer than 4 surviving knots is an error.
    """
    grid = np.sort(np.asarray(spacing_grid, dtype=float))
    if grid.size == 0 or grid[0] <= 1.0 / K or grid[-1] >= 0.25:
        raise ParameterError("spacing grid must lie inside (1/K, 0.25)")
    if repeats < 5:
        raise ParameterError("average over at least 5 landmark draws")
    gen = as_generator(rng)
    means = []
    for s in grid:
        state = lattice_state(K, s)
        vals = []
        for _ in range(repeats):
            try:
                vals.append(restrict(state, n_landmarks, gen, scale))
            except NoLoopError:
                pass
        means.append(float(np.mean(vals)) if vals else math.nan)
    keep_s, keep_r = [], []
    for s, r in zip(grid, means):
        if np.isfinite(r) and r > 0 and (not keep_r or r > keep_r[-1]):
            keep_s.append(float(s))
            keep_r.append(r)
    if len(keep_s) < 4:
        raise CalibrationError(
            f"only {len(keep_s)} monotone knots; spacings {grid.tolist()} gave {means}")
    return LiftCalibration(K, n_landmarks, keep_s, keep_r, scale)


def lift_geometric(R_target: float, K: int, calibration: LiftCalibration) -> NetworkState:
    """Evenly spaced active set whose r_min matches R_target through the table."""
    if calibration.K != K:
        raise ParameterError(f"calibration built for K={calibration.K}, not {K}")
    return lattice_state(K, calibration.spacing_for(R_target))


# --- annealing lift ---------------------------------------------------------


@dataclass(frozen=True)
class AnnealingParams:
    theta0: float = 0.01
    cooling: float = 0.9
    plateau: int = 200
    inner_steps: int = 3
    threshold: float = 0.002
    max_iterations: int = 2000
    # fresh random start after this many proposals without a new best
    restart_after: int = 10

    def __post_init__(self):
        if self.theta0 <= 0 or self.threshold <= 0:
            raise ParameterError("theta0 and threshold must be positive")
        if not 0 < self.cooling <= 1 or self.plateau < 1 or self.max_iterations < 0:
            raise ParameterError("invalid annealing schedule")


def metropolis_accept(E0: float, E1: float, theta: float, u: float) -> bool:
    """Downhill always; uphill with probability exp(-(E1 - E0) / theta)."""
    if E1 < E0:
        return True
    return u < math.exp(-(E1 - E0) / theta)


@dataclass
class LiftResult:
    state: NetworkState
    energy: float
    converged: bool
    iterations: int
    restarts: int
    best_trace: list[float]


def lift_annealing(R_target: float, graph: ErGraph, model: ModelParams,
                   params: AnnealingParams = AnnealingParams(), rng=None,
                   n_landmarks: int = DEFAULT_LANDMARKS,
                   scale: FiltrationScale = FiltrationScale(),
                   start: NetworkState | None = None) -> LiftResult:
    """Search for a configuration with r_min near R_target by simulated annealing.

    Proposals evolve the current configuration ``inner_steps`` majority steps.
    States without a loop get infinite energy.  The best state seen is
    returned; ``converged`` says whether it met the threshold.
    """
    if R_target <= 0:
        raise ParameterError("R_target must be positive")
    gen = as_generator(rng)
    K = graph.node_count

    def energy(s):
        try:
            return abs(restrict(s, n_landmarks, gen, scale) - R_target)
        except NoLoopError:
            return math.inf

    def fresh():
        return init_state(K, float(gen.uniform(0.05, 0.95)), gen)

    state = start if start is not None else fresh()
    E0 = energy(state)
    best, best_E = state, E0
    trace = [best_E]
    theta = params.theta0
    stale = restarts = it = 0
    while best_E >= params.threshold and it < params.max_iterations:
        if stale >= params.restart_after:
            state, stale = fresh(), 0
            restarts += 1
            E0 = energy(state)
            if E0 < best_E:
                best, best_E = state, E0
        else:
            prop = evolve(graph, state, model.epsilon, params.inner_steps, gen, model.ties)
            E1 = energy(prop)
            if metropolis_accept(E0, E1, theta, float(gen.random())):
                state, E0 = prop, E1
            if E1 < best_E:
                best, best_E = prop, E1
                stale = 0
            else:
                stale += 1
        it += 1
        if it % params.plateau == 0:
            theta *= params.cooling
        trace.append(best_E)
    return LiftResult(best, best_E, best_E < params.threshold, it, restarts, trace)


# --- ensembles --------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    N: int = 20
    master_seed: int = 0
    graph_policy: str = "regenerate"
    n_landmarks: int = DEFAULT_LANDMARKS
    model: ModelParams = ModelParams(0.2)
    K: int = 10_000
    p: float = 0.001
    scale: FiltrationScale = field(default_factory=FiltrationScale)
    calibration: LiftCalibration | None = None
    annealing: AnnealingParams = field(default_factory=AnnealingParams)
    threads: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError("N must be at least 1")
        if self.graph_policy not in GRAPH_POLICIES:
            raise ParameterError(f"graph policy must be one of {GRAPH_POLICIES}")
        if self.n_landmarks < 3:
            raise ParameterError("need at least 3 landmarks")
        if self.threads < 1:
            raise ParameterError("threads must be at least 1")

    def with_epsilon(self, epsilon: float) -> "EnsembleSpec":
        return replace(self, model=replace(self.model, epsilon=epsilon))

    def graph_seed(self, j: int) -> int:
        if self.graph_policy == "pinned":
            return self.master_seed
        return derive_seed(self.master_seed, j)

    def graph(self, j: int) -> ErGraph:
        return _cached_graph(self.K, self.p, self.graph_seed(j))


@lru_cache(maxsize=64)
def _cached_graph(K: int, p: float, seed: int) -> ErGraph:
    return generate_er(K, p, seed)


def _ordered_map(fn, items, threads: int) -> list:
    # results come back in input order whatever the worker count
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class CoarseSeries:
    times: list[int]
    R_values: list[float]
    D_values: list[float]
    defined_counts: list[int]

    def __post_init__(self):
        n = len(self.times)
        if not len(self.R_values) == len(self.D_values) == len(self.defined_counts) == n:
            raise ParameterError("series columns must have equal length")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "R", "D", "defined_count"))
            for row in zip(self.times, self.R_values, self.D_values, self.defined_counts):
                t, R, D, c = row
                w.writerow((t, "" if R is None or math.isnan(R) else repr(float(R)),
                            repr(float(D)), c))

    @classmethod
    def read_csv(cls, path) -> "CoarseSeries":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([int(r["t"]) for r in rows],
                   [float(r["R"]) if r["R"] else math.nan for r in rows],
                   [float(r["D"]) for r in rows],
                   [int(r["defined_count"]) for r in rows])


def ensemble_series(spec: EnsembleSpec, n_steps: int) -> CoarseSeries:
    """Plain ensemble average of N microscopic trajectories, step by step."""

    def run(j):
        return rmin_series(spec.graph(j), spec.model, n_steps, spec.n_landmarks,
                           RngStream(spec.master_seed, j), spec.scale)

    runs = _ordered_map(run, range(spec.N), spec.threads)
    times, R, D, counts = [], [], [], []
    for t in range(n_steps):
        recs = [r[t] for r in runs]
        vals = [rec.r_min for rec in recs if rec.defined]
        times.append(recs[0].t)
        R.append(float(np.mean(vals)) if vals else math.nan)
        D.append(float(np.mean([rec.density for rec in recs])))
        counts.append(len(vals))
    return CoarseSeries(times, R, D, counts)


def point_key(R: float, epsilon: float) -> tuple[int, int]:
    """Seed key for an evaluation point: R to 1e-6, epsilon to 1e-6."""
    return int(round(R * 1e6)), int(round(epsilon * 1e6))


@dataclass(frozen=True)
class CoarseResult:
    R: float
    D: float
    defined: int
    total: int
    D_lifted: float = math.nan
    R_sem: float = math.nan


def lift(R: float, graph: ErGraph, spec: EnsembleSpec, lift_mode: str, rng) -> NetworkState:
    if lift_mode == "geometric":
        if spec.calibration is None:
            raise ParameterError("geometric lift needs a calibration table")
        return lift_geometric(R, graph.node_count, spec.calibration)
    if lift_mode == "annealing":
        res = lift_annealing(R, graph, spec.model, spec.annealing, rng, spec.n_landmarks,
                             spec.scale)
        return res.state
    raise ParameterError(f"lift mode must be one of {LIFT_MODES}")


def coarse_step_detail(R: float, epsilon: float, T: int, spec: EnsembleSpec,
                       lift_mode: str = "geometric", key=None) -> CoarseResult:
    """One coarse step with bookkeeping.  ``key`` overrides the seed key (common random numbers)."""
    if R <= 0:
        raise ParameterError("R must be positive")
    if lift_mode not in LIFT_MODES:
        raise ParameterError(f"lift mode must be one of {LIFT_MODES}")
    if lift_mode == "geometric" and spec.calibration is not None:
        spec.calibration.spacing_for(R)  # range check before any work
    spec = spec.with_epsilon(epsilon)
    key = point_key(R, epsilon) if key is None else tuple(key)

    def run(j):
        stream = RngStream(spec.master_seed, j, (COARSE, *key))
        graph = spec.graph(j)
        state = lift(R, graph, spec, lift_mode, stream.child(LIFT))
        d_lift = density(state)
        state = evolve(graph, state, epsilon, T, stream, spec.model.ties)
        try:
            r = restrict(state, spec.n_landmarks, stream.child(LANDMARKS), spec.scale)
        except NoLoopError:
            r = None
        return r, density(state), d_lift

    out = _ordered_map(run, range(spec.N), spec.threads)
    vals = [r for r, _, _ in out if r is not None]
    if 2 * len(vals) < spec.N:
        raise DegenerateEnsembleError(
            f"{spec.N - len(vals)} of {spec.N} realizations had no loop at R={R}")
    sem = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    return CoarseResult(float(np.mean(vals)), float(np.mean([o[1] for o in out])),
                        len(vals), spec.N, float(np.mean([o[2] for o in out])), sem)


def coarse_step(R: float, epsilon: float, T: int, spec: EnsembleSpec,
                lift_mode: str = "geometric", key=None) -> float:
    """F_T(R; epsilon): ensemble mean of restrict(evolve_T(lift(R)))."""
    return coarse_step_detail(R, epsilon, T, spec, lift_mode, key).R


def coarse_trajectory(R0: float, epsilon: float, T: int, n_macro_steps: int,
                      spec: EnsembleSpec, lift_mode: str = "geometric") -> CoarseSeries:
    """Iterate the coarse map; D is the mean density of the evolved ensembles."""
    times, R, D, counts = [0], [R0], [math.nan], [spec.N]
    for n in range(1, n_macro_steps + 1):
        res = coarse_step_detail(R[-1], epsilon, T, spec, lift_mode)
        if n == 1:
            D[0] = res.D_lifted
        times.append(n * T)
        R.append(res.R)
        D.append(res.D)
        counts.append(res.defined)
    return CoarseSeries(times, R, D, counts)
