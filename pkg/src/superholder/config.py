"""Experiment configuration: ``key=value`` files layered under command-line flags."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ConfigParseError, InputError
from .params import CONTINUITY, DENSITY, OPTIMALITY, ModelParams

EXPERIMENTS = ("kernel-table", "stable-check", "laplace-duality", "compensator",
               "jump-tail", "dichotomy", "exponents")

REGIMES = {
    "kernel-table": (),
    "stable-check": (),
    "laplace-duality": (DENSITY,),
    "compensator": (DENSITY,),
    "jump-tail": (CONTINUITY,),
    "dichotomy": (DENSITY,),
    "exponents": (CONTINUITY, OPTIMALITY),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    alpha: float = 1.8
    beta: float = 0.5
    a: float = 0.0
    b: float = 1.0
    t: float = 1.0
    n_particles: int = 10_000
    replicates: int = 200
    out: str = "results"
    workers: int = 1
    kappa: float = 1.5
    z: float = 0.0

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.alpha, self.beta, self.a, self.b)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        """Raise :class:`ConfigurationError` if the experiment's regime is violated."""
        self.params.require(*REGIMES[self.experiment])


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_REQUIRED = [n for n, f in _FIELDS.items() if f.default is dataclasses.MISSING]


def _coerce(key: str, raw, where: str):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            if isinstance(raw, str):
                raw = raw.strip()
                value = int(float(raw)) if "e" in raw.lower() else int(raw)
                if "e" in raw.lower() and float(raw) != value:
                    raise ValueError
                return value
            return int(raw)
        if kind == "float":
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigParseError(f"{where}: key '{key}' expects {kind}, got {raw!r}") from None
    return str(raw).strip()


def read_config_file(path: str | Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; blank lines are ignored."""
    path = Path(path)
    if not path.is_file():
        raise ConfigParseError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigParseError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = _coerce(key, raw, f"{path}:{lineno}")
    return values


def build_config(file_values: Mapping | None = None, flag_values: Mapping | None = None) -> ExperimentConfig:
    """Merge with precedence flags > file > defaults and validate field invariants."""
    merged: dict = {}
    for source, layer in (("config file", file_values or {}), ("flags", flag_values or {})):
        for key, raw in layer.items():
            if raw is None:
                continue
            if key not in _FIELDS:
                raise ConfigParseError(f"{source}: unknown key '{key}'")
            merged[key] = _coerce(key, raw, source)
    missing = [k for k in _REQUIRED if k not in merged]
    if missing:
        raise ConfigParseError(f"missing required field(s): {', '.join(missing)}")
    if merged["experiment"] not in EXPERIMENTS:
        raise ConfigParseError(f"key 'experiment': unknown experiment {merged['experiment']!r}")
    cfg = ExperimentConfig(**merged)
    try:
        cfg.params
    except InputError as exc:
        raise ConfigParseError(str(exc)) from None
    if cfg.t <= 0:
        raise ConfigParseError("key 't': must be > 0")
    if cfg.replicates < 1 or cfg.workers < 1:
        raise ConfigParseError("replicates and workers must be >= 1")
    if cfg.n_particles < 1000:
        raise ConfigParseError("key 'n_particles': must be >= 1000")
    return cfg
