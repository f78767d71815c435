import math

import numpy as np
import pytest

from topoefm.analysis import (BifurcationDiagram, FixedPoint, _pattern_ok, bifurcation_sweep,
                              default_R_grid, find_all_roots, newton_fixed_point)
from topoefm.errors import BifurcationError, ConvergenceError, DomainExitError, ParameterError

FINE = np.geomspace(0.001, 0.03, 80)


def cubic(a=0.002, b=0.005, c=0.015, k=1e4):
    return lambda R, key=None: -k * (R - a) * (R - b) * (R - c)


def fold_family(e, m=0.005, r3=0.015, k=1e7):
    # a lower stable / middle unstable pair that collides at e = 0.24
    c = (0.24 - e) * 1e-4
    return lambda R, key=None: -k * ((R - m) ** 2 - c) * (R - r3)


def test_linear_root_and_stability():
    # steep enough that |G| <= 1e-3 pins R to 1e-6
    roots = find_all_roots(0.2, g=lambda R, key=None: 1000 * (0.01 - R))
    assert len(roots) == 1
    assert roots[0].R_star == pytest.approx(0.01, abs=1e-6)
    assert roots[0].stability == "stable" and roots[0].slope == pytest.approx(-1000, rel=1e-6)


def test_cubic_roots_and_pattern():
    roots = find_all_roots(0.2, g=cubic(), tol=1e-12, max_iter=60, xtol=1e-9)
    assert [r.R_star for r in roots] == pytest.approx([0.002, 0.005, 0.015], abs=1e-6)
    assert [r.stability for r in roots] == ["stable", "unstable", "stable"]
    assert _pattern_ok(roots)


def test_no_sign_change_gives_empty_list():
    assert find_all_roots(0.2, g=lambda R, key=None: 1.0 + R) == []


def test_bad_grid_rejected():
    with pytest.raises(ParameterError):
        find_all_roots(0.2, g=cubic(), R_grid=[0.01, 0.005])
    with pytest.raises(ParameterError):
        find_all_roots(0.2)


def test_noisy_map_uses_smoothing():
    gen = np.random.default_rng(11)
    base = cubic(k=5e4)
    sem = 2e-4

    def noisy(R, key=None):
        return base(R) + sem * gen.standard_normal(), sem

    roots = find_all_roots(0.2, g=noisy, R_grid=default_R_grid())
    assert [r.stability for r in roots] == ["stable", "unstable", "stable"]
    assert [r.R_star for r in roots] == pytest.approx([0.002, 0.005, 0.015], rel=0.25)
    assert all(r.converged for r in roots)


def test_newton_converges_and_reports_slope():
    fp = newton_fixed_point(0.004, 0.2, g=lambda R, key=None: 0.5 * (0.01 - R), tol=1e-9)
    assert fp.R_star == pytest.approx(0.01, abs=1e-8)
    assert fp.stability == "stable" and fp.converged


def test_newton_domain_exit_names_last_iterate():
    with pytest.raises(DomainExitError) as info:
        newton_fixed_point(0.004, 0.2, g=lambda R, key=None: R + 0.01, domain=(0.001, 0.05))
    assert info.value.last_valid == 0.004
    with pytest.raises(DomainExitError):
        newton_fixed_point(0.1, 0.2, g=lambda R, key=None: R, domain=(0.001, 0.05))


def test_newton_flat_map_fails_with_trace():
    with pytest.raises(ConvergenceError) as info:
        newton_fixed_point(0.004, 0.2, g=lambda R, key=None: 1.0)
    assert info.value.trace == [(0.004, 1.0)]


def test_sweep_brackets_the_fold():
    d = bifurcation_sweep((0.16, 0.19, 0.22, 0.25, 0.26), R_grid=FINE, g_factory=fold_family)
    assert d.root_counts() == {0.16: 3, 0.19: 3, 0.22: 3, 0.25: 1, 0.26: 1}
    lo, hi = d.fold_interval
    assert hi - lo <= 0.01 and lo <= 0.24 <= hi
    assert d.refinement and all(0.22 < e < 0.25 for e in d.refinement)
    r3 = [d.roots[e][-1].R_star for e in d.epsilons]
    assert r3 == pytest.approx([0.015] * 5, abs=1e-6)
    assert d.notes == []


def test_sweep_without_fold_notes_it():
    d = bifurcation_sweep((0.16, 0.2), R_grid=FINE, g_factory=lambda e: cubic())
    assert d.fold_interval is None and "no 3 -> 1" in d.notes[-1]


def test_strict_sweep_raises_on_bad_pattern():
    with pytest.raises(BifurcationError):
        bifurcation_sweep((0.2,), R_grid=FINE, g_factory=lambda e: (lambda R, key=None: R - 0.01),
                          strict=True)
    with pytest.raises(ParameterError):
        bifurcation_sweep((0.2, 0.1), g_factory=fold_family)


def test_diagram_csv_and_report(tmp_path):
    fp = FixedPoint(0.01, 0.2, -0.5, 1e-5, 3)
    d = BifurcationDiagram([0.2], {0.2: [fp]}, (0.23, 0.24))
    d.write_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines == ["epsilon,R_star,slope,stability,residual", "0.2,0.01,-0.5,stable,1e-05"]
    report = d.fold_report()
    assert "fold_detected: yes" in report and "roots_at_0.2: 1" in report
    assert "epsilon_mid: 0.235" in report
