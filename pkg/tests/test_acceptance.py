"""Acceptance criteria at full scale (K = 10^4, p = 0.001, 50 landmarks, N = 20).

Each test records a one-line PASS/FAIL verdict that pytest prints in its
terminal summary.  Reference magnitudes quoted below are the published values
the criteria are checked against.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from topoefm import analysis, efm
from topoefm.cli import ensemble_spec, main
from topoefm.config import RunConfig
from topoefm.dynamics import ModelParams
from topoefm.graph import generate_er
from topoefm.homology import SimplicialComplex, betti_numbers, boundary_matrix
from topoefm.rng import RngStream
from topoefm.witness import (BALL_RADIUS, LandmarkSet, WitnessSet, candidate_radii,
                             lattice_dist, lazy_witness_complex, min_betti1_radius, rmin_series)

from oracles import components, random_complex

pytestmark = pytest.mark.slow

STEPS = 400
PLATEAU = slice(STEPS // 2, None)
_ENSEMBLES: dict = {}


def ensemble(eps, d0):
    """Ensemble-mean series at the default configuration, cached with its runtime."""
    if (eps, d0) not in _ENSEMBLES:
        t0 = time.perf_counter()
        s = efm.ensemble_series(ensemble_spec(RunConfig(), eps, d0), STEPS)
        _ENSEMBLES[eps, d0] = (s, time.perf_counter() - t0)
    return _ENSEMBLES[eps, d0]


def plateau(s):
    R = np.array(s.R_values[PLATEAU])
    return float(np.mean(s.D_values[PLATEAU])), float(np.nanmean(R))


def test_1_bistability_below_threshold(verdict):
    (low, t_low), (high, t_high) = ensemble(0.2, 0.1), ensemble(0.2, 0.9)
    D_low, R_low = plateau(low)
    D_high, R_high = plateau(high)
    runtime = t_low + t_high
    ok = (0.14 <= D_low <= 0.22 and 0.72 <= D_high <= 0.84 and R_low / R_high >= 4
          and runtime <= 120)
    verdict(1, ok, f"D_low={D_low:.3f} D_high={D_high:.3f} R_low={R_low:.4f} "
                   f"R_high={R_high:.4f} ratio={R_low / R_high:.2f} time={runtime:.0f}s")
    assert ok


def test_2_monostability_above_threshold(verdict):
    (a, t_a), (b, t_b) = ensemble(0.25, 0.1), ensemble(0.25, 0.9)
    (D_a, R_a), (D_b, R_b) = plateau(a), plateau(b)
    runtime = t_a + t_b
    ok = (0.20 <= D_a <= 0.30 and 0.20 <= D_b <= 0.30 and abs(R_a - R_b) <= 0.003
          and runtime <= 120)
    verdict(2, ok, f"D={D_a:.3f},{D_b:.3f} R={R_a:.4f},{R_b:.4f} "
                   f"|dR|={abs(R_a - R_b):.4f} time={runtime:.0f}s")
    assert ok


def test_3_rmin_decreases_with_noise(verdict):
    R = {e: plateau(ensemble(e, 0.1)[0])[1] for e in (0.18, 0.2, 0.23)}
    ratio = R[0.18] / R[0.23]
    ok = R[0.18] > R[0.2] > R[0.23] and 1.2 <= ratio <= 2.2
    verdict(3, ok, "r_min " + " ".join(f"{e}:{v:.4f}" for e, v in R.items())
            + f" ratio={ratio:.2f} (published 0.02, 0.017, 0.013)")
    assert ok


def rolling_median(x, width=5):
    """Centered running median; single-draw r_min spikes do not count as band changes."""
    pad = width // 2
    padded = np.concatenate([np.full(pad, x[0]), x, np.full(pad, x[-1])])
    return np.nanmedian(np.lib.stride_tricks.sliding_window_view(padded, width), axis=1)


def test_4_transition_event(verdict):
    K, eps, d0, n = 10_000, 0.239, 0.8, 3000
    cfg = RunConfig()
    recs = rmin_series(generate_er(K, cfg.p, cfg.seed), ModelParams(eps, d0=d0), n,
                       cfg.n_landmarks, RngStream(cfg.seed, 0))
    d = np.array([r.density for r in recs])
    r = rolling_median(np.array([r.r_min if r.defined else np.nan for r in recs]))
    t_d = int(np.argmax(d < 0.5)) if np.any(d < 0.5) else None
    detail = "no high->low density passage"
    ok = False
    if t_d is not None:
        before = np.nanmedian(r[:t_d])
        after = np.nanmedian(r[t_d:])
        mid = 0.5 * (before + after)
        above = np.flatnonzero(r > mid)
        t_r = int(above[0]) if above.size else None
        ok = bool(after > before) and t_r is not None and abs(t_r - t_d) <= 20
        detail = (f"density crosses 0.5 at t={recs[t_d].t}, r_min bands "
                  f"{before:.4f} -> {after:.4f} crosses at "
                  f"t={'none' if t_r is None else recs[t_r].t}")
    verdict(4, ok, detail)
    assert ok


def test_5_lift_round_trip(verdict):
    cfg = RunConfig()
    gen = np.random.default_rng(5)
    cal = efm.build_lift_calibration(cfg.K, cfg.n_landmarks, efm.default_spacing_grid(cfg.K),
                                     gen)
    lo, hi = cal.domain
    geo_ok = 0
    for R in np.linspace(lo, hi, 25):
        got = efm.restrict(efm.lift_geometric(R, cfg.K, cal), cfg.n_landmarks, gen)
        geo_ok += abs(got - R) <= max(0.002, 0.1 * R)
    spec = ensemble_spec(cfg, 0.2)
    targets = np.linspace(0.005, 0.02, 25)
    ann_ok = 0
    for j, R in enumerate(targets):
        res = efm.lift_annealing(R, spec.graph(j % cfg.N), spec.model, efm.AnnealingParams(),
                                 RngStream(cfg.seed, j, (77,)), cfg.n_landmarks)
        ann_ok += res.energy < 0.002
    ok = geo_ok == 25 and ann_ok >= 0.8 * len(targets)
    verdict(5, ok, f"geometric {geo_ok}/25 within tolerance; annealing "
                   f"{ann_ok}/{len(targets)} reached E<0.002")
    assert ok


def test_6_fixed_points_and_fold(verdict):
    cfg = RunConfig()
    t0 = time.perf_counter()
    d = analysis.bifurcation_sweep(cfg.eps_grid, ensemble_spec(cfg, cfg.eps_grid[0]),
                                   analysis.default_R_grid(), cfg.lift, fold_width=cfg.fold_width)
    runtime = time.perf_counter() - t0
    roots = {**d.roots, **d.refinement}
    published = {0.16: 0.0234, 0.19: 0.017, 0.22: 0.0126}
    problems = []
    for e in (0.16, 0.19, 0.22):
        if [fp.stability for fp in roots[e]] != ["stable", "unstable", "stable"]:
            problems.append(f"eps={e}: {[fp.stability for fp in roots[e]]}")
    for e in (0.25, 0.26):
        if [fp.stability for fp in roots.get(e, [])] != ["stable"]:
            problems.append(f"eps={e}: {[fp.stability for fp in roots.get(e, [])]}")
    r3 = {e: roots[e][-1].R_star for e in published if roots[e]}
    if len(r3) == 3:
        if not r3[0.16] > r3[0.19] > r3[0.22]:
            problems.append("R3 not decreasing")
        for e, ref in published.items():
            if abs(r3[e] - ref) > 0.3 * ref:
                problems.append(f"R3({e})={r3[e]:.4f} vs {ref} beyond 30%")
    fold = d.fold_interval
    if fold is None or fold[1] - fold[0] > 0.01 or fold[1] < 0.23 or fold[0] > 0.25:
        problems.append(f"fold bracket {fold}")
    if runtime > 600:
        problems.append(f"runtime {runtime:.0f}s")
    counts = {e: len(v) for e, v in sorted(roots.items())}
    verdict(6, not problems,
            f"roots {counts} R3 {{{', '.join(f'{e}: {v:.4f}' for e, v in r3.items())}}} "
            f"fold {fold} time={runtime:.0f}s" + ("; " + "; ".join(problems) if problems else ""))
    assert not problems


def test_7_homology_oracle_suite(verdict):
    gen = np.random.default_rng(7)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        V, E, T = random_complex(gen, 12)
        cx = SimplicialComplex(V, E, T)
        c = components(V, E)
        bad += betti_numbers(cx).betti0 != c
        bad += betti_numbers(SimplicialComplex(V, E)).betti1 != len(E) - len(V) + c
        bad += not (boundary_matrix(cx, 1) @ boundary_matrix(cx, 2)).is_zero()
    runtime = time.perf_counter() - t0
    ok = bad == 0 and runtime <= 10
    verdict(7, ok, f"{bad} mismatches over 200 complexes, {runtime:.2f}s")
    assert ok


def test_8_witness_reductions(verdict):
    K = 12
    mismatch = None
    checked = 0
    for size in range(3, 11):
        for ids in itertools.combinations(range(K), size):
            Z = WitnessSet(np.array(ids), K)
            L = LandmarkSet(np.array(ids))
            for r in candidate_radii(Z, L, BALL_RADIUS):
                lazy = set(lazy_witness_complex(Z, L, r, BALL_RADIUS).edges)
                raw = BALL_RADIUS.to_raw(r, K)
                rips = {(a, b) for a, b in itertools.combinations(ids, 2)
                        if lattice_dist(a, b, K) <= raw + 1e-9}
                checked += 1
                if lazy != rips and mismatch is None:
                    mismatch = (ids, r, sorted(lazy ^ rips))
    ring = WitnessSet(np.arange(8), 8)
    r8 = min_betti1_radius(ring, LandmarkSet(np.arange(8)), BALL_RADIUS)
    part1, part2 = mismatch is None, r8 == 0.125 / 2
    detail = (f"L=Z skeleton equality over {checked} (set, radius) cases: "
              + ("holds" if part1 else f"fails, first at Z={mismatch[0]} r={mismatch[1]} "
                                       f"edges differing {mismatch[2]}")
              + f"; 8-point ring r_min={r8} (expected 0.0625)")
    verdict(8, part1 and part2, detail)
    assert part2
    assert part1


def test_9_determinism(verdict, tmp_path):
    def outputs(path):
        return {p.name: p.read_bytes() for p in sorted(path.iterdir())
                if not p.name.startswith("manifest_")}

    same = []
    for cmd, extra in (("ensemble", ["--steps", "60", "--d0", "0.1,0.9"]),
                       ("bifurcation", ["--realizations", "6", "--set", "eps_grid=0.19,0.26",
                                        "--set", "anneal_max_iterations=100"])):
        first = tmp_path / f"{cmd}_1"
        assert main([cmd, "--out", str(first)] + extra) == 0
        manifest = first / f"manifest_{cmd}.json"
        runs = [outputs(first)]
        for name, flags in (("again", []), ("threads8", ["--threads", "8"])):
            out = tmp_path / f"{cmd}_{name}"
            assert main([cmd, "--manifest", str(manifest), "--out", str(out)] + flags) == 0
            runs.append(outputs(out))
        same.append(runs[0] == runs[1] == runs[2] and bool(runs[0]))
    ok = all(same)
    verdict(9, ok, f"ensemble identical={same[0]}, bifurcation identical={same[1]} "
                   "(rerun from manifest and --threads 8)")
    assert ok


def test_10_anticorrelation(verdict):
    d, r = [], []
    for e in (0.18, 0.2, 0.23, 0.25):
        s = ensemble(e, 0.1)[0]
        for D, R in zip(s.D_values[PLATEAU], s.R_values[PLATEAU]):
            if not math.isnan(R):
                d.append(D)
                r.append(R)
    rho = spearmanr(d, r).statistic
    ok = rho < -0.9
    verdict(10, ok, f"Spearman rho={rho:.3f} over {len(d)} pooled stationary samples")
    assert ok
