"""Flat key-value run configuration.

One ``key = value`` per line; ``#`` starts a comment; lists are comma
separated.  Command-line flags override file values, which override the
defaults below.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .errors import ParameterError

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    K: int = 10_000
    p: float = 0.001
    epsilons: tuple[float, ...] = (0.2,)
    d0s: tuple[float, ...] = (0.1,)
    T: int = 10
    n_steps: int = 400
    N: int = 20
    n_landmarks: int = 50
    graph_policy: str = "regenerate"
    ties: str = "inactive"
    circumference: float = 2 * math.pi
    threshold_factor: float = 1.0
    lift: str = "annealing"
    R0s: tuple[float, ...] = (0.002, 0.017)
    n_macro_steps: int = 20
    eps_grid: tuple[float, ...] = (0.16, 0.19, 0.22, 0.25, 0.26)
    R_grid: tuple[float, ...] = ()
    fold_width: float = 0.01
    calibration: str = ""
    spacing_grid: tuple[float, ...] = ()
    calibration_repeats: int = 5
    anneal_theta0: float = 0.01
    anneal_threshold: float = 0.0005
    anneal_max_iterations: int = 500
    threads: int = 1
    out: str = "out"
    figures: bool = True

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ParameterError(msg)

        need(self.schema_version == SCHEMA_VERSION,
             f"schema_version must be {SCHEMA_VERSION}")
        need(0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer")
        need(self.K >= 10, "K must be at least 10")
        need(0 < self.p < 1, "p must lie in (0, 1)")
        need(self.epsilons and all(0 < e < 0.5 for e in self.epsilons),
             "every epsilon must lie in (0, 0.5)")
        need(self.d0s and all(0 <= d <= 1 for d in self.d0s), "every d0 must lie in [0, 1]")
        need(self.T >= 0 and self.n_steps >= 0 and self.n_macro_steps >= 0,
             "T, n_steps and n_macro_steps must be nonnegative")
        need(self.N >= 1, "N must be at least 1")
        need(self.n_landmarks >= 3, "n_landmarks must be at least 3")
        need(self.graph_policy in ("regenerate", "pinned"),
             "graph_policy must be regenerate or pinned")
        need(self.ties in ("inactive", "keep"), "ties must be inactive or keep")
        need(self.circumference > 0, "circumference must be positive")
        need(self.threshold_factor in (1.0, 2.0), "threshold_factor must be 1 or 2")
        need(self.lift in ("geometric", "annealing"), "lift must be geometric or annealing")
        need(all(r > 0 for r in self.R0s), "R0 values must be positive")
        need(all(0 < e < 0.5 for e in self.eps_grid)
             and all(b > a for a, b in zip(self.eps_grid, self.eps_grid[1:])),
             "eps_grid must be ascending inside (0, 0.5)")
        need(all(b > a for a, b in zip(self.R_grid, self.R_grid[1:]))
             and all(r > 0 for r in self.R_grid), "R_grid must be positive and ascending")
        need(self.fold_width > 0, "fold_width must be positive")
        need(self.calibration_repeats >= 5, "calibration_repeats must be at least 5")
        need(self.anneal_theta0 > 0 and self.anneal_threshold > 0,
             "annealing theta0 and threshold must be positive")
        need(self.anneal_max_iterations >= 0, "anneal_max_iterations must be nonnegative")
        need(self.threads >= 1, "threads must be at least 1")
        return self

    def to_text(self) -> str:
        lines = [f"# topoefm run configuration (schema {SCHEMA_VERSION})"]
        for f in fields(self):
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def coerce(key: str, raw) -> object:
    """Parse one value according to the field's declared type."""
    if key not in _TYPES:
        raise ParameterError(f"unknown configuration key {key!r}")
    kind = _TYPES[key]
    try:
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return text in ("true", "1", "yes")
        if kind == "int":
            return int(str(raw).strip())
        if kind == "float":
            return float(str(raw).strip())
        if kind == "str":
            return str(raw).strip()
        if kind == "tuple[float, ...]":
            if isinstance(raw, (list, tuple)):
                return tuple(float(x) for x in raw)
            text = str(raw).strip()
            return tuple(float(x) for x in text.split(",")) if text else ()
    except ValueError:
        raise ParameterError(f"bad value for {key}: {raw!r}") from None
    raise ParameterError(f"unsupported type for {key}")


def parse_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {n}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ParameterError(f"line {n}: duplicate key {key!r}")
        values[key] = coerce(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then non-None ``overrides``."""
    values = {}
    if path:
        with open(path) as fh:
            values.update(parse_text(fh.read()))
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = coerce(key, raw)
    return RunConfig(**values).validate()
