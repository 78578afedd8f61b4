"""Experiment specifications and the flat ``key = value`` config format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..oracle import ALIASES, FAMILIES

EXPERIMENTS = ("dimension_scaling", "convergence", "success_rate", "noise_robustness",
               "lemma_checks")
METHODS = ("gd", "psd", "psd_probe", "pgd")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentSpec:
    name: str
    dims: list = field(default_factory=lambda: [10, 50, 100, 500, 1000])
    epsilon: float = 1e-3
    delta: float = 1.0
    seeds: list = field(default_factory=lambda: list(range(50)))
    family: str = "separable_quartic"
    family_params: dict = field(default_factory=dict)
    output_dir: str | None = None
    # episode count entering T; the theoretical M makes T exceed any desk-scale cap
    max_episodes: int | None = 1
    episode_cap: int = 20
    iter_cap: int | None = None
    methods: list = field(default_factory=lambda: list(METHODS))
    problems: list = field(default_factory=list)
    noise_ratios: list = field(default_factory=lambda: [0.0, 1.0, 10.0, 100.0])
    delta_fp: float | None = None
    exact_episodes: bool = False
    probe_strict: bool = False
    init_mode: str = "saddle"
    resamples: int = 10_000
    stats_seed: int = 0
    stride: int = 100
    write_traces: bool = True
    jobs: int = 1
    quick: bool = False

    def __post_init__(self):
        validate(self)


DEFAULTS = {
    "dimension_scaling": {"seeds": list(range(10))},
    "convergence": {"iter_cap": 50_000,
                    "problems": ["separable_quartic:10", "separable_quartic:100", "rosenbrock:10"]},
    "success_rate": {"dims": [100], "seeds": list(range(100))},
    "noise_robustness": {"dims": [100], "iter_cap": 50_000},
    "lemma_checks": {"seeds": list(range(5))},
}

_INT_LISTS = {"dims", "seeds"}
_FLOAT_LISTS = {"noise_ratios"}
_STR_LISTS = {"methods", "problems"}


def validate(spec: ExperimentSpec) -> None:
    if spec.name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {spec.name!r}; expected one of {EXPERIMENTS}")
    if not spec.seeds:
        raise ConfigError("seeds must be non-empty")
    if len(set(spec.seeds)) != len(spec.seeds):
        raise ConfigError("seeds must be distinct")
    if not spec.dims or any(int(d) < 1 for d in spec.dims):
        raise ConfigError("dims must be a non-empty list of positive integers")
    if spec.epsilon <= 0 or not 0 < spec.delta <= 1:
        raise ConfigError("need epsilon > 0 and delta in (0, 1]")
    if ALIASES.get(spec.family, spec.family) not in FAMILIES:
        raise ConfigError(f"unknown family {spec.family!r}")
    bad = [m for m in spec.methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}")
    for item in spec.problems:
        fam, _, d = item.partition(":")
        if ALIASES.get(fam, fam) not in FAMILIES or not d.isdigit():
            raise ConfigError(f"bad problem entry {item!r}; use family:dim")
    if any(r < 0 for r in spec.noise_ratios):
        raise ConfigError("noise ratios must be non-negative")
    if spec.resamples < 1 or spec.stride < 1 or spec.jobs < 1:
        raise ConfigError("resamples, stride and jobs must be >= 1")
    if spec.iter_cap is not None and spec.iter_cap < 1:
        raise ConfigError("iter_cap must be positive")


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_seeds(text: str, seed_base: int) -> list:
    parts = [t for t in text.replace(",", " ").split() if t]
    if len(parts) == 1:
        # a single integer is a seed count
        return [seed_base + i for i in range(int(parts[0]))]
    return [int(t) for t in parts]


def parse_config(text: str, *, name: str | None = None, seed_base: int = 0) -> dict:
    """Parse flat ``key = value`` lines (``#`` comments) into spec keyword arguments.

    Keys are ExperimentSpec field names; ``family.<param>`` sets a family
    parameter. ``seeds = 50`` means 50 seeds starting at ``seed_base``.
    """
    fields = {f.name: f for f in dataclasses.fields(ExperimentSpec)}
    out: dict = {"family_params": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("family."):
                out["family_params"][key[7:]] = float(val)
            elif key not in fields:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            elif key == "seeds":
                out[key] = _parse_seeds(val, seed_base)
            elif key in _INT_LISTS:
                out[key] = [int(t) for t in val.replace(",", " ").split()]
            elif key in _FLOAT_LISTS:
                out[key] = [float(t) for t in val.replace(",", " ").split()]
            elif key in _STR_LISTS:
                out[key] = [t for t in val.replace(",", " ").split()]
            elif key in ("write_traces", "exact_episodes", "probe_strict", "quick"):
                out[key] = _parse_bool(val)
            elif key in ("epsilon", "delta", "delta_fp"):
                out[key] = float(val)
            elif key in ("max_episodes", "iter_cap"):
                out[key] = None if val.lower() == "none" else int(val)
            elif key in ("episode_cap", "resamples", "stats_seed", "stride", "jobs"):
                out[key] = int(val)
            else:
                out[key] = val
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from e
    if name is not None:
        if out.get("name", name) != name:
            raise ConfigError(f"config is for {out['name']!r}, not {name!r}")
        out["name"] = name
    return out


def make_spec(name: str, overrides: dict | None = None, *, seed_base: int = 0) -> ExperimentSpec:
    """Experiment defaults, then ``overrides``. Default seeds are shifted by ``seed_base``."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    kw = dict(DEFAULTS.get(name, {}))
    if "seeds" not in kw:
        kw["seeds"] = list(range(50))
    kw["seeds"] = [seed_base + s for s in kw["seeds"]]
    kw.update(overrides or {})
    kw["name"] = name
    try:
        return ExperimentSpec(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_spec(name: str, path: str | Path | None = None, *, seed_base: int = 0) -> ExperimentSpec:
    overrides = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        overrides = parse_config(text, name=name, seed_base=seed_base)
        if not overrides["family_params"]:
            del overrides["family_params"]
    return make_spec(name, overrides, seed_base=seed_base)
