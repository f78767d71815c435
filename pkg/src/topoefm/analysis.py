"""Fixed points of the coarse map, their stability, and the fold over epsilon."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import UnivariateSpline

from .efm import EnsembleSpec, coarse_step, coarse_step_detail, point_key
from .errors import BifurcationError, ConvergenceError, DomainExitError, ParameterError

# G(R, key) -> float, or (value, standard error) for Monte Carlo maps.
# ``key`` pins the ensemble seeds (common random numbers).
GMap = Callable[..., "float | tuple[float, float]"]

DEFAULT_EPS_GRID = (0.16, 0.19, 0.22, 0.25, 0.26)
ROOT_MERGE = 1e-3

log = logging.getLogger(__name__)


def default_R_grid(lo: float = 0.0012, hi: float = 0.024, count: int = 20) -> np.ndarray:
    return np.geomspace(lo, hi, count)


@dataclass(frozen=True)
class FixedPoint:
    R_star: float
    epsilon: float
    slope: float
    residual: float
    newton_iterations: int
    converged: bool = True

    @property
    def stability(self) -> str:
        return "stable" if self.slope < 0 else "unstable"


def g_function(R: float, epsilon: float, spec: EnsembleSpec, lift_mode: str = "annealing",
               key=None) -> float:
    """G_T(R; eps) = F_T(R; eps) - R, seeded by (spec, R, eps) unless ``key`` is given."""
    return coarse_step(R, epsilon, spec.model.T, spec, lift_mode, key) - R


def ensemble_g(epsilon: float, spec: EnsembleSpec, lift_mode: str = "annealing") -> GMap:
    """G with its ensemble standard error, as ``(value, sem)``."""
    def g(R, key=None):
        res = coarse_step_detail(R, epsilon, spec.model.T, spec, lift_mode, key)
        return res.R - R, res.R_sem
    return g


class _Memo:
    """Caches G by (R, key); the map is deterministic for a fixed key."""

    def __init__(self, g: GMap, epsilon: float):
        self.g = g
        self.epsilon = epsilon
        self.cache: dict = {}
        self.sem: dict = {}

    def __call__(self, R: float, key=None) -> float:
        k = (float(R), None if key is None else tuple(key))
        if k not in self.cache:
            out = self.g(R) if key is None else self.g(R, key=key)
            if isinstance(out, tuple):
                out, self.sem[k] = float(out[0]), float(out[1])
            self.cache[k] = out
        return self.cache[k]

    def error(self, R: float, key=None) -> float:
        return self.sem.get((float(R), None if key is None else tuple(key)), math.nan)


def _fd_slope(g: _Memo, R: float, lo: float) -> float:
    """Central difference sharing one seed key at R - h and R + h."""
    h = max(5e-4, 0.05 * R)
    h = min(h, (R - lo) * 0.999) if R - h <= lo else h
    key = point_key(R, g.epsilon)
    return (g(R + h, key) - g(R - h, key)) / (2 * h)


def newton_fixed_point(R0: float, epsilon: float, spec: EnsembleSpec | None = None,
                       tol: float = 1e-3, max_iter: int = 20, lift_mode: str = "annealing",
                       g: GMap | None = None, domain: tuple[float, float] = (0.0, math.inf),
                       ) -> FixedPoint:
    """Damped Newton on G with a common-random-number finite-difference slope.

    Each step is halved until |G| decreases; an iterate outside ``domain``
    raises DomainExitError naming the last accepted iterate.
    """
    if g is None:
        if spec is None:
            raise ParameterError("need a spec or a G map")
        g = ensemble_g(epsilon, spec, lift_mode)
    G = _Memo(g, epsilon)
    lo, hi = domain
    if not lo < R0 < hi:
        raise DomainExitError(f"start {R0} outside domain ({lo}, {hi})", R0)
    R, GR = R0, G(R0)
    trace = [(R, GR)]
    for it in range(max_iter + 1):
        slope = _fd_slope(G, R, lo)
        if abs(GR) <= tol:
            return FixedPoint(R, epsilon, slope, abs(GR), it)
        if it == max_iter:
            break
        if slope == 0 or not math.isfinite(slope):
            raise ConvergenceError(f"flat slope at R={R}", trace)
        step = -GR / slope
        for _ in range(8):
            trial = R + step
            if not lo < trial < hi:
                raise DomainExitError(f"Newton iterate {trial} left ({lo}, {hi})", R)
            Gt = G(trial)
            if abs(Gt) < abs(GR):
                break
            step /= 2
        else:
            raise ConvergenceError(f"line search stalled at R={R}", trace)
        R, GR = trial, Gt
        trace.append((R, GR))
    raise ConvergenceError(f"no convergence in {max_iter} iterations", trace)


def _polish(G: _Memo, a: float, b: float, Ga: float, Gb: float, tol: float,
            max_iter: int, xtol: float) -> FixedPoint:
    """Newton from the bracket midpoint, falling back to bisection inside [a, b].

    The reported slope is the secant across the final bracket, which resolves the
    sign change above the ensemble noise.
    """
    R = 0.5 * (a + b)
    GR = G(R)
    it = 0
    while abs(GR) > tol and b - a > xtol and it < max_iter:
        it += 1
        if (GR > 0) == (Ga > 0):
            a, Ga = R, GR
        else:
            b, Gb = R, GR
        h = max(5e-4, 0.05 * R)
        key = point_key(R, G.epsilon)
        slope = (G(R + h, key) - G(R - h, key)) / (2 * h) if R - h > 0 else 0.0
        trial = R - GR / slope if slope else math.nan
        if not (a < trial < b) or not abs(G(trial)) < abs(GR):
            trial = 0.5 * (a + b)
        R, GR = trial, G(trial)
    if (GR > 0) == (Ga > 0):
        a, Ga = R, GR
    elif GR != 0:
        b, Gb = R, GR
    slope = (Gb - Ga) / (b - a) if b > a else math.nan
    return FixedPoint(R, G.epsilon, slope, abs(GR), it, abs(GR) <= tol)


def _spline_roots(G: _Memo, grid: np.ndarray, vals: list[float]) -> list[tuple[float, float]]:
    """(root, dG/dR) of a smoothing spline through the scan, in log R.

    Points are weighted by their inverse standard error and the smoothing
    factor equals the point count, the expected chi-square of the residuals.
    """
    x = np.log(grid)
    w = 1.0 / np.array([G.error(R) for R in grid])
    sp = UnivariateSpline(x, np.asarray(vals), w=w, k=3, s=len(grid))
    dsp = sp.derivative()
    return [(float(math.exp(u)), float(dsp(u)) / math.exp(u)) for u in sp.roots()]


def find_all_roots(epsilon: float, spec: EnsembleSpec | None = None, R_grid=None,
                   lift_mode: str = "annealing", g: GMap | None = None, tol: float = 1e-3,
                   max_iter: int = 12, xtol: float = 5e-5, verify: bool = True,
                   ) -> list[FixedPoint]:
    """All roots of G on the grid's span.

    With an exact map, each sign-change bracket is polished.  When the map
    reports Monte Carlo standard errors, single scan points cannot resolve
    roots where |G| is near the noise, so roots and slopes come from a
    weighted smoothing spline instead; ``verify`` then re-evaluates G at each
    root to fill the residual.  Roots closer than 1e-3 with the same stability
    are merged; an empty list means no sign change.
    """
    if g is None:
        if spec is None:
            raise ParameterError("need a spec or a G map")
        g = ensemble_g(epsilon, spec, lift_mode)
    grid = np.asarray(default_R_grid() if R_grid is None else R_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ParameterError("R grid must be strictly increasing with at least 2 points")
    G = _Memo(g, epsilon)
    vals = [G(R) for R in grid]
    errs = np.array([G.error(R) for R in grid])
    roots: list[FixedPoint] = []
    if grid.size > 3 and np.all(np.isfinite(errs) & (errs > 0)):
        for R, slope in _spline_roots(G, grid, vals):
            res = abs(G(R)) if verify else math.nan
            ok = res <= max(tol, 3 * G.error(R)) if verify else True
            roots.append(FixedPoint(R, epsilon, slope, res, 0, ok))
    else:
        for i, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
            Ga, Gb = vals[i], vals[i + 1]
            if Ga == 0:
                roots.append(_polish(G, a, a, Ga, Ga, tol, 0, xtol) if i == 0 else
                             FixedPoint(a, epsilon, (Gb - vals[i - 1]) / (b - grid[i - 1]),
                                        0.0, 0))
            elif Ga * Gb < 0:
                roots.append(_polish(G, float(a), float(b), Ga, Gb, tol, max_iter, xtol))
        if vals[-1] == 0:
            roots.append(FixedPoint(float(grid[-1]), epsilon,
                                    (vals[-1] - vals[-2]) / (grid[-1] - grid[-2]), 0.0, 0))
    roots.sort(key=lambda fp: fp.R_star)
    merged: list[FixedPoint] = []
    for fp in roots:
        if merged and fp.R_star - merged[-1].R_star < ROOT_MERGE \
                and fp.stability == merged[-1].stability:
            continue
        merged.append(fp)
    return merged


# --- bifurcation diagram -----------------------------------------------------


@dataclass
class BifurcationDiagram:
    epsilons: list[float]
    roots: dict[float, list[FixedPoint]]
    fold_interval: tuple[float, float] | None = None
    notes: list[str] = field(default_factory=list)
    # roots at the epsilons visited while bisecting the fold
    refinement: dict[float, list[FixedPoint]] = field(default_factory=dict)

    def root_counts(self) -> dict[float, int]:
        return {e: len(self.roots[e]) for e in self.epsilons}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epsilon", "R_star", "slope", "stability", "residual"))
            for e in self.epsilons:
                for fp in self.roots[e]:
                    w.writerow((repr(float(e)), repr(float(fp.R_star)), repr(float(fp.slope)),
                                fp.stability, repr(float(fp.residual))))

    def fold_report(self) -> str:
        lines = ["fold_detected: " + ("yes" if self.fold_interval else "no")]
        if self.fold_interval:
            lo, hi = self.fold_interval
            lines += [f"epsilon_lo: {lo!r}", f"epsilon_hi: {hi!r}",
                      f"epsilon_mid: {(lo + hi) / 2!r}"]
        lines += [f"roots_at_{e!r}: {len(self.roots[e])}" for e in self.epsilons]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _pattern_ok(roots: list[FixedPoint]) -> bool:
    if len(roots) == 3:
        return [fp.stability for fp in roots] == ["stable", "unstable", "stable"]
    return len(roots) == 1 and roots[0].stability == "stable"


def bifurcation_sweep(eps_grid=DEFAULT_EPS_GRID, spec: EnsembleSpec | None = None,
                      R_grid=None, lift_mode: str = "annealing",
                      g_factory: Callable[[float], GMap] | None = None,
                      fold_width: float = 0.01, strict: bool = False) -> BifurcationDiagram:
    """Roots over an ascending epsilon grid and a bisected fold bracket.

    The fold bracket is the first grid gap where the root count drops from
    three to one; it is bisected on the root count until narrower than
    ``fold_width``.  With ``strict`` an inconsistent count raises
    BifurcationError.
    """
    eps = [float(e) for e in eps_grid]
    if any(b <= a for a, b in zip(eps, eps[1:])) or not all(0 < e < 0.5 for e in eps):
        raise ParameterError("epsilon grid must be ascending inside (0, 0.5)")
    grid = np.asarray(default_R_grid() if R_grid is None else R_grid, dtype=float)

    def solve(e, verify=True):
        if g_factory is not None:
            g = g_factory(e)
        elif spec is not None:
            g = ensemble_g(e, spec, lift_mode)
        else:
            raise ParameterError("need a spec or a G factory")
        t0 = time.perf_counter()
        roots = find_all_roots(e, R_grid=grid, g=g, verify=verify)
        log.info("epsilon=%s: roots %s (%.1f s)", e,
                 [(round(fp.R_star, 5), fp.stability) for fp in roots], time.perf_counter() - t0)
        return roots

    diagram = BifurcationDiagram(eps, {})
    for e in eps:
        roots = solve(e)
        diagram.roots[e] = roots
        if not _pattern_ok(roots):
            msg = (f"epsilon={e!r}: {len(roots)} roots "
                   f"({', '.join(fp.stability for fp in roots)}); try more realizations")
            if strict:
                raise BifurcationError(msg)
            diagram.notes.append(msg)
    counts = [len(diagram.roots[e]) for e in eps]
    for i in range(len(eps) - 1):
        if counts[i] == 3 and counts[i + 1] == 1:
            lo, hi = eps[i], eps[i + 1]
            while hi - lo > fold_width:
                mid = round((lo + hi) / 2, 6)
                roots = solve(mid, verify=False)
                diagram.refinement[mid] = roots
                if len(roots) >= 3:
                    lo = mid
                else:
                    hi = mid
            diagram.fold_interval = (lo, hi)
            break
    else:
        diagram.notes.append("no 3 -> 1 root-count change on the grid")
    return diagram
