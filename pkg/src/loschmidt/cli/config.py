"""Experiment configuration: presets, flat ``key = value`` files, validation."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from loschmidt.params import PATH_LABELS, MapParams, StateSpec

OUT_ENV = "LOSCHMIDT_OUT"


class ConfigError(ValueError):
    """Invalid or incomplete configuration; ``field`` names the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    preset: str = "custom"
    k: Optional[float] = None
    epsilon: Optional[float] = None
    n: Optional[int] = None
    q0: float = 0.5
    state: str = "position"
    p0: float = 0.0
    sigma: Optional[float] = None
    t_max: Optional[int] = None
    sampling: str = "full-grid"
    samples: Optional[int] = None
    seed: Optional[int] = None
    paths: tuple[str, ...] = ("exact", "ivr")
    out_dir: Optional[str] = None
    workers: int = 1
    lambda_ref: Optional[float] = None
    # diagnostics
    hist_t: int = 20
    bins: int = 60
    pair_sep_t: int = 7
    separation: float = 1e-11
    pair_t_max: int = 120
    ensemble_size: int = 20000
    branch_t: int = 120
    probes: int = 10000
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def map_params(self) -> MapParams:
        return MapParams(self.k, self.epsilon, self.n)

    @property
    def state_spec(self) -> StateSpec:
        if self.state == "position":
            return StateSpec.position(self.q0)
        return StateSpec.gaussian(self.q0, self.p0, self.sigma)

    @property
    def classical_seed(self) -> int:
        return 0 if self.seed is None else self.seed

    def resolved_out_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV) or "runs")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("extras")
        d["paths"] = list(self.paths)
        return d


PRESETS: dict[str, dict] = {
    # reference parameter sets; lambda_ref is the expected Lyapunov exponent
    "fig1": dict(k=18.0, epsilon=1e-4, n=350, t_max=5000, paths=("exact", "ivr", "pt"), lambda_ref=2.21),
    "fig2": dict(
        k=18.0, epsilon=5e-4, n=3500, t_max=300, paths=("exact", "ivr", "pt", "fgr"), lambda_ref=2.21, hist_t=20
    ),
    "fig3": dict(
        k=7.0, epsilon=5e-4, n=100_000, t_max=30, paths=("exact", "ivr", "pt", "fgr", "lyap"), lambda_ref=1.28,
        pair_sep_t=7,
    ),
    "fig4": dict(
        k=7.0, epsilon=5e-4, n=100_000, t_max=30, paths=("exact", "ivr", "lyap"), lambda_ref=1.28,
        separation=1e-11, pair_t_max=120,
    ),
}

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.name != "extras"}
_INT = {"n", "t_max", "samples", "seed", "workers", "hist_t", "bins", "pair_sep_t", "pair_t_max",
        "ensemble_size", "branch_t", "probes"}
_FLOAT = {"k", "epsilon", "q0", "p0", "sigma", "lambda_ref", "separation"}


def _coerce(key: str, raw):
    if raw is None:
        return None
    if key == "paths":
        items = raw if isinstance(raw, (list, tuple)) else [s.strip() for s in str(raw).split(",")]
        return tuple(s for s in items if s)
    try:
        if key in _INT:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if key in _FLOAT:
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {raw!r} as a number") from None
    return str(raw)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        out[key] = value
    return out


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def build_config(preset: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Preset values, then overrides, then validation."""
    overrides = dict(overrides or {})
    preset = overrides.pop("preset", None) or preset or "custom"
    if preset != "custom" and preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r} (choose from {', '.join(PRESETS)} or custom)")
    values = dict(PRESETS.get(preset, {}))
    for key, raw in overrides.items():
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, raw)
    cfg = ExperimentConfig(preset=preset, **values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    for name in ("k", "epsilon", "n", "t_max"):
        if getattr(cfg, name) is None:
            raise ConfigError(name, f"required for preset {cfg.preset!r}")
    if cfg.k < 0:
        raise ConfigError("k", "must be >= 0")
    if cfg.epsilon < 0:
        raise ConfigError("epsilon", "must be >= 0")
    if cfg.n < 2:
        raise ConfigError("n", "must be >= 2")
    if cfg.t_max < 1:
        raise ConfigError("t_max", "must be >= 1")
    if cfg.state not in ("position", "gaussian"):
        raise ConfigError("state", "must be 'position' or 'gaussian'")
    if cfg.state == "gaussian" and (cfg.sigma is None or cfg.sigma <= 0):
        raise ConfigError("sigma", "gaussian state needs sigma > 0")
    if cfg.state == "gaussian" and not 3.0 / cfg.n <= cfg.sigma <= 0.2:
        raise ConfigError("sigma", f"need 3/n <= sigma <= 0.2 (3/n = {3.0 / cfg.n:.3g}), got {cfg.sigma}")
    if cfg.sampling not in ("full-grid", "monte-carlo"):
        raise ConfigError("sampling", "must be 'full-grid' or 'monte-carlo'")
    if cfg.sampling == "monte-carlo":
        if cfg.samples is None:
            raise ConfigError("samples", "required for monte-carlo sampling")
        if cfg.samples < 100:
            raise ConfigError("samples", "must be >= 100")
        if cfg.seed is None:
            raise ConfigError("seed", "mandatory when monte-carlo sampling is used")
    bad = [p for p in cfg.paths if p not in PATH_LABELS]
    if bad:
        raise ConfigError("paths", f"unknown path(s) {bad}; choose from {', '.join(PATH_LABELS)}")
    if not cfg.paths:
        raise ConfigError("paths", "at least one path required")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    from loschmidt.semiclassical import MAX_FULL_GRID

    if "ivr" in cfg.paths and cfg.sampling == "full-grid" and cfg.n > MAX_FULL_GRID:
        raise ConfigError(
            "sampling", f"full-grid IVR with n={cfg.n} > {MAX_FULL_GRID}; set sampling = monte-carlo with samples"
        )
