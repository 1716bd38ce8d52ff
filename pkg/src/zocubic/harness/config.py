"""Flat ``key = value`` run configuration with dotted sections.

Example::

    experiment = compare
    seeds = 0..9
    problem.name = iris
    cubic.T = 100
    zosgd.gamma = 1, 0.1, 0.001

Parsing is strict: unknown keys, duplicate keys and badly typed values raise
:class:`~zocubic.errors.ConfigError` naming the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError, InvalidInputError
from ..optimizer import CubicNewtonConfig, ZoSgdConfig
from ..recovery import SCHEMES

__all__ = ["ProblemSpec", "BenchGrid", "RunConfig", "parse_config", "parse_config_text", "parse_seeds"]

EXPERIMENTS = ("recover-bench", "optimize", "compare")
PROBLEMS = ("iris", "csv", "logistic", "quadratic")


@dataclass(frozen=True)
class ProblemSpec:
    """Builtin problem name plus parameters, or a CSV dataset and its schema."""

    name: str = "iris"
    path: Path | None = None
    label: str = "species"
    features: tuple | None = None
    classes: dict | None = None
    standardize: bool = True
    n: int = 5
    N: int = 200
    data_seed: int = 0
    x0: str = "zeros"


@dataclass(frozen=True)
class BenchGrid:
    n: tuple = (30,)
    r: tuple = (1,)
    M: tuple = (30, 60, 120, 180)
    schemes: tuple = ("gaussian",)
    threshold: float = 1e-4
    timing: bool = True


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seeds: tuple = tuple(range(10))
    out: Path = Path("results")
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    cubic: CubicNewtonConfig = field(default_factory=CubicNewtonConfig)
    # 500 ZO-SGD iterations on iris cost the same 20000 evaluations as 100 cubic iterations
    zosgd: ZoSgdConfig = field(default_factory=lambda: ZoSgdConfig(T=500))
    gammas: tuple = (1.0, 0.1, 0.001)
    bench: BenchGrid = field(default_factory=BenchGrid)
    checkpoint_every: int = 1000
    eta_grid: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    workers: int = 1


def parse_seeds(text: str) -> tuple:
    """``"a..b"`` (inclusive) or a comma list of integers."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            seeds = tuple(range(int(a), int(b) + 1))
        else:
            seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"cannot parse seed list {text!r}") from None
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def _bool(v):
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v):
    return None if v.lower() in ("none", "") else int(v)


def _list(conv):
    def parse(v):
        items = tuple(conv(s.strip()) for s in v.split(",") if s.strip())
        if not items:
            raise ValueError("empty list")
        return items
    return parse


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v
    return parse


def _classes(v):
    table = {}
    for item in v.split(","):
        name, sep, val = item.rpartition(":")
        if not sep or not name.strip():
            raise ValueError(f"class entry {item!r} is not name:value")
        table[name.strip()] = float(val)
    return table


# key -> (section, field, converter)
_KEYS = {
    "experiment": (None, "experiment", _choice(EXPERIMENTS)),
    "seeds": (None, "seeds", parse_seeds),
    "out": (None, "out", Path),
    "workers": (None, "workers", int),
    "problem.name": ("problem", "name", _choice(PROBLEMS)),
    "problem.path": ("problem", "path", Path),
    "problem.label": ("problem", "label", str),
    "problem.features": ("problem", "features", _list(str)),
    "problem.classes": ("problem", "classes", _classes),
    "problem.standardize": ("problem", "standardize", _bool),
    "problem.n": ("problem", "n", int),
    "problem.N": ("problem", "N", int),
    "problem.data_seed": ("problem", "data_seed", int),
    "problem.x0": ("problem", "x0", _choice(("zeros", "random"))),
    "cubic.m1": ("cubic", "m1", int),
    "cubic.m2": ("cubic", "m2", int),
    "cubic.M": ("cubic", "M", int),
    "cubic.delta": ("cubic", "delta", float),
    "cubic.alpha": ("cubic", "alpha", float),
    "cubic.T": ("cubic", "T", int),
    "cubic.scheme": ("cubic", "scheme", _choice(SCHEMES)),
    "cubic.budget": ("cubic", "budget", _opt_int),
    "zosgd.batch": ("zosgd", "batch", int),
    "zosgd.delta": ("zosgd", "delta", float),
    "zosgd.gamma": (None, "gammas", _list(float)),
    "zosgd.T": ("zosgd", "T", int),
    "zosgd.budget": ("zosgd", "budget", _opt_int),
    "bench.n": ("bench", "n", _list(int)),
    "bench.r": ("bench", "r", _list(int)),
    "bench.M": ("bench", "M", _list(int)),
    "bench.scheme": ("bench", "schemes", _list(_choice(SCHEMES))),
    "bench.threshold": ("bench", "threshold", float),
    "bench.timing": ("bench", "timing", _bool),
    "compare.checkpoint_every": (None, "checkpoint_every", int),
    "optimize.eta_grid": (None, "eta_grid", _list(float)),
}


def _read_pairs(text: str, source: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def parse_config_text(text: str, overrides: dict | None = None, source: str = "<config>") -> RunConfig:
    """Validate configuration text; `overrides` (key -> string) win over the file."""
    pairs = _read_pairs(text, source)
    pairs.update(overrides or {})
    if "experiment" not in pairs:
        raise ConfigError("experiment: required key is missing")

    top, sections = {}, {"problem": {}, "cubic": {}, "zosgd": {}, "bench": {}}
    for key, value in pairs.items():
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown key")
        section, name, conv = _KEYS[key]
        try:
            parsed = conv(value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
        (sections[section] if section else top)[name] = parsed

    try:
        problem = ProblemSpec(**sections["problem"])
        cubic = CubicNewtonConfig(**sections["cubic"])
        zosgd = ZoSgdConfig(**{"T": 500, **sections["zosgd"]})
        bench = BenchGrid(**sections["bench"])
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None

    if problem.name == "csv" and problem.path is None:
        raise ConfigError("problem.path: required when problem.name = csv")
    if problem.path is not None and not problem.path.is_file():
        raise ConfigError(f"problem.path: file not found: {problem.path}")
    if top.get("workers", 1) < 1:
        raise ConfigError("workers: must be at least 1")
    if top.get("checkpoint_every", 1) < 1:
        raise ConfigError("compare.checkpoint_every: must be at least 1")
    if any(g < 0 for g in top.get("gammas", ())):
        raise ConfigError("zosgd.gamma: step sizes must be nonnegative")
    if any(e <= 0 for e in top.get("eta_grid", (1.0,))):
        raise ConfigError("optimize.eta_grid: values must be positive")
    return RunConfig(problem=problem, cubic=cubic, zosgd=zosgd, bench=bench, **top)


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config_text(text, overrides, source=str(path))

