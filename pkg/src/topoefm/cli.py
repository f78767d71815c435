"""Command-line entry point: ``topoefm <command> [flags]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(non-convergence, degenerate ensemble, calibration), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import analysis, efm
from .config import RunConfig, format_value, load_config
from .dynamics import ModelParams
from .errors import (BifurcationError, CalibrationError, ContractError, ConvergenceError,
                     DegenerateEnsembleError, DomainExitError, LiftRangeError, NoLoopError,
                     ParameterError)
from .graph import generate_er
from .rng import RngStream, derive_seed
from .witness import FiltrationScale, rmin_series, write_series_csv

log = logging.getLogger("topoefm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("simulate", "ensemble", "calibrate", "coarse", "fixed-points", "bifurcation")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class RunManifest:
    """Everything needed to replay a run: resolved config, seeds, timings, warnings."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.started = time.time()
        self.timings: dict[str, float] = {}
        self.seeds: dict[str, int] = {"master": cfg.seed}
        self.warnings: list[str] = []
        self.outputs: list[str] = []

    def stage(self, name: str, seconds: float) -> None:
        self.timings[name] = round(seconds, 3)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": {k: list(v) if isinstance(v, tuple) else v
                       for k, v in self.cfg.as_dict().items()},
            "library_version": _version(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "wall_clock_seconds": round(time.time() - self.started, 3),
            "stage_seconds": self.timings,
            "seeds": self.seeds,
            "warnings": self.warnings,
            "outputs": self.outputs,
        }

    def write(self, out: Path) -> Path:
        path = out / f"manifest_{self.command}.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _tag(x: float) -> str:
    return format_value(float(x)).replace(".", "p")


def _scale(cfg: RunConfig) -> FiltrationScale:
    return FiltrationScale(cfg.circumference, cfg.threshold_factor)


def ensemble_spec(cfg: RunConfig, epsilon: float, d0: float | None = None,
          calibration=None) -> efm.EnsembleSpec:
    return efm.EnsembleSpec(
        N=cfg.N, master_seed=cfg.seed, graph_policy=cfg.graph_policy,
        n_landmarks=cfg.n_landmarks,
        model=ModelParams(epsilon, cfg.T, cfg.d0s[0] if d0 is None else d0, cfg.ties),
        K=cfg.K, p=cfg.p, scale=_scale(cfg), calibration=calibration,
        annealing=efm.AnnealingParams(theta0=cfg.anneal_theta0,
                                      threshold=cfg.anneal_threshold,
                                      max_iterations=cfg.anneal_max_iterations),
        threads=cfg.threads)


def _calibration(cfg: RunConfig, man: RunManifest, out: Path):
    scale = _scale(cfg)
    if cfg.calibration:
        return efm.LiftCalibration.read_csv(cfg.calibration, cfg.K, cfg.n_landmarks, scale)
    grid = cfg.spacing_grid or tuple(efm.default_spacing_grid(cfg.K))
    seed = derive_seed(cfg.seed, 0xCA1)
    man.seeds["calibration"] = seed
    t0 = time.perf_counter()
    cal = efm.build_lift_calibration(cfg.K, cfg.n_landmarks, grid, np.random.default_rng(seed),
                                     cfg.calibration_repeats, scale)
    man.stage("calibration", time.perf_counter() - t0)
    path = out / "calibration.csv"
    cal.write_csv(path)
    man.outputs.append(path.name)
    return cal


def _figure(cfg, man, fn, *args):
    if not cfg.figures:
        return
    try:
        man.outputs.append(fn(*args).name)
    except ImportError as exc:  # plotting is optional at runtime
        man.warnings.append(f"figure skipped: {exc}")


# --- commands ----------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, out: Path, man: RunManifest) -> None:
    """One microscopic run per (epsilon, d0) cell on a shared graph."""
    from .plotting import plot_series

    graph = generate_er(cfg.K, cfg.p, cfg.seed)
    man.seeds["graph"] = cfg.seed
    cell = 0
    for eps in cfg.epsilons:
        for d0 in cfg.d0s:
            t0 = time.perf_counter()
            stream = RngStream(cfg.seed, cell)
            man.seeds[f"cell_{cell}_stream_id"] = cell
            recs = rmin_series(graph, ModelParams(eps, cfg.T, d0, cfg.ties), cfg.n_steps,
                               cfg.n_landmarks, stream, _scale(cfg))
            name = f"simulate_eps{_tag(eps)}_d0{_tag(d0)}"
            write_series_csv(recs, out / f"{name}.csv")
            man.outputs.append(f"{name}.csv")
            undefined = sum(not r.defined for r in recs)
            if undefined:
                man.warnings.append(f"{name}: {undefined} steps without a loop")
            man.stage(name, time.perf_counter() - t0)
            _figure(cfg, man, plot_series, recs, out / f"{name}.png", name)
            cell += 1


def cmd_ensemble(cfg: RunConfig, out: Path, man: RunManifest) -> None:
    from .plotting import plot_coarse

    for eps in cfg.epsilons:
        series = {}
        for d0 in cfg.d0s:
            t0 = time.perf_counter()
            s = efm.ensemble_series(ensemble_spec(cfg, eps, d0), cfg.n_steps)
            name = f"ensemble_eps{_tag(eps)}_d0{_tag(d0)}"
            s.write_csv(out / f"{name}.csv")
            man.outputs.append(f"{name}.csv")
            man.stage(name, time.perf_counter() - t0)
            series[f"d0={d0}"] = s
        _figure(cfg, man, plot_coarse, series, out / f"ensemble_eps{_tag(eps)}.png",
                f"ensemble, epsilon={eps}")
    man.seeds["realization_streams"] = f"RngStream({cfg.seed}, j) for j < {cfg.N}"
    if cfg.graph_policy == "regenerate":
        man.seeds["graph_seeds"] = [derive_seed(cfg.seed, j) for j in range(cfg.N)]


def cmd_calibrate(cfg: RunConfig, out: Path, man: RunManifest) -> None:
    from .plotting import plot_calibration

    cfg.calibration = ""
    cal = _calibration(cfg, man, out)
    _figure(cfg, man, plot_calibration, cal, out / "calibration.png")


def cmd_coarse(cfg: RunConfig, out: Path, man: RunManifest) -> None:
    from .plotting import plot_coarse

    cal = _calibration(cfg, man, out) if cfg.lift == "geometric" else None
    for eps in cfg.epsilons:
        series = {}
        for R0 in cfg.R0s:
            t0 = time.perf_counter()
            s = efm.coarse_trajectory(R0, eps, cfg.T, cfg.n_macro_steps,
                                      ensemble_spec(cfg, eps, calibration=cal), cfg.lift)
            name = f"coarse_eps{_tag(eps)}_R0{_tag(R0)}"
            s.write_csv(out / f"{name}.csv")
            man.outputs.append(f"{name}.csv")
            man.stage(name, time.perf_counter() - t0)
            series[f"R0={R0}"] = s
        _figure(cfg, man, plot_coarse, series, out / f"coarse_eps{_tag(eps)}.png",
                f"coarse map, epsilon={eps}")


def _R_grid(cfg: RunConfig):
    return np.asarray(cfg.R_grid) if cfg.R_grid else analysis.default_R_grid()


def cmd_fixed_points(cfg: RunConfig, out: Path, man: RunManifest) -> None:
    cal = _calibration(cfg, man, out) if cfg.lift == "geometric" else None
    diagram = analysis.BifurcationDiagram(list(cfg.epsilons), {})
    for eps in cfg.epsilons:
        t0 = time.perf_counter()
        diagram.roots[eps] = analysis.find_all_roots(
            eps, ensemble_spec(cfg, eps, calibration=cal), _R_grid(cfg), cfg.lift)
        man.stage(f"roots_eps{_tag(eps)}", time.perf_counter() - t0)
        if not diagram.roots[eps]:
            man.warnings.append(f"epsilon={eps}: no sign change of G on the grid")
    diagram.write_csv(out / "fixed_points.csv")
    man.outputs.append("fixed_points.csv")


def cmd_bifurcation(cfg: RunConfig, out: Path, man: RunManifest) -> None:
    from .plotting import plot_diagram

    cal = _calibration(cfg, man, out) if cfg.lift == "geometric" else None
    t0 = time.perf_counter()
    base = ensemble_spec(cfg, cfg.eps_grid[0], calibration=cal)
    diagram = analysis.bifurcation_sweep(cfg.eps_grid, base, _R_grid(cfg), cfg.lift,
                                         fold_width=cfg.fold_width)
    man.stage("sweep", time.perf_counter() - t0)
    man.warnings.extend(diagram.notes)
    diagram.write_csv(out / "bifurcation.csv")
    (out / "fold_report.txt").write_text(diagram.fold_report())
    man.outputs += ["bifurcation.csv", "fold_report.txt"]
    _figure(cfg, man, plot_diagram, diagram, out / "bifurcation.png")


HANDLERS = {
    "simulate": cmd_simulate, "ensemble": cmd_ensemble, "calibrate": cmd_calibrate,
    "coarse": cmd_coarse, "fixed-points": cmd_fixed_points, "bifurcation": cmd_bifurcation,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topoefm", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat key = value file")
    ap.add_argument("--manifest", help="replay the configuration recorded in a manifest")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out")
    ap.add_argument("--landmarks", type=int, dest="n_landmarks")
    ap.add_argument("--realizations", type=int, dest="N")
    ap.add_argument("--lift", choices=("geometric", "annealing"))
    ap.add_argument("--ties", choices=("inactive", "keep"))
    ap.add_argument("--epsilon", dest="epsilons", help="comma-separated list")
    ap.add_argument("--d0", dest="d0s", help="comma-separated list")
    ap.add_argument("--steps", type=int, dest="n_steps")
    ap.add_argument("--macro-step", type=int, dest="T", help="T, steps per coarse step")
    ap.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any configuration key")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _resolve(args) -> RunConfig:
    overrides = {}
    if args.manifest:
        with open(args.manifest) as fh:
            overrides.update(json.load(fh)["config"])
    for item in args.set:
        if "=" not in item:
            raise ParameterError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    for key in ("seed", "threads", "out", "n_landmarks", "N", "lift", "ties", "epsilons",
                "d0s", "n_steps", "T", "figures"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
    except (ParameterError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG if not isinstance(exc, OSError) else EXIT_IO
    man = RunManifest(args.command, cfg)
    try:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, out, man)
        man.write(out)
    except (ParameterError, ContractError, LiftRangeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DegenerateEnsembleError, DomainExitError, CalibrationError,
            BifurcationError, NoLoopError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _try_manifest(man, cfg, str(exc))
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("wrote %s", ", ".join(man.outputs))
    return EXIT_OK


def _try_manifest(man: RunManifest, cfg: RunConfig, message: str) -> None:
    man.warnings.append(message)
    try:
        man.write(Path(cfg.out))
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
