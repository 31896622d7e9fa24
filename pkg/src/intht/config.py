"""Run configuration: defaults, key=value config files, validation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .codes import parse_scheme
from .errors import ConfigError

MODES = ("atee", "exact", "vr")


@dataclass
class RunConfig:
    p: int = 200
    n: int | None = None  # None: 20 * m
    m: int = 4000
    K: int = 20
    k: int | None = None  # None: 3 * K
    T: int = 150
    eta: float = 0.2
    b: int = 360
    d: int = 3
    delta: float | None = None
    order: int = 2
    mode: str = "atee"
    t_inner: int = 20
    regime: str = "uniform"
    seed: int = 0
    scheme: str = "plain-binary"
    hash_reuse: bool = False
    include_diagonal: bool = False
    theory_schedule: bool = False
    alpha: float | None = None
    L: float | None = None
    success_tol: float = 1e-2
    out: str | None = None

    @property
    def n_eff(self) -> int:
        return self.n if self.n is not None else 20 * self.m

    @property
    def k_eff(self) -> int:
        if self.theory_schedule:
            return max(self.K, math.ceil(self.K * self.L ** 2 / self.alpha ** 2))
        return self.k if self.k is not None else 3 * self.K

    @property
    def eta_eff(self) -> float:
        if self.theory_schedule:
            return self.alpha / (2.0 * self.L ** 2)
        return self.eta

    def validate(self) -> "RunConfig":
        for name in ("p", "m", "b", "d"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.p < 2:
            raise ConfigError("p must be >= 2")
        if self.K < 0 or self.T < 0:
            raise ConfigError("K and T must be nonnegative")
        if self.order not in (2, 3):
            raise ConfigError(f"order must be 2 or 3, got {self.order}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.regime not in ("uniform", "bernoulli"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.theory_schedule and not (self.alpha and self.L and self.alpha > 0 and self.L > 0):
            raise ConfigError("--theory-schedule needs positive alpha and L")
        if self.k_eff < self.K:
            raise ConfigError(f"k={self.k_eff} must be >= K={self.K}")
        if self.m > self.n_eff:
            raise ConfigError(f"m={self.m} exceeds n={self.n_eff}")
        if not self.eta_eff > 0:
            raise ConfigError("eta must be positive")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.t_inner < 1:
            raise ConfigError("t_inner must be >= 1")
        parse_scheme(self.scheme)
        return self

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = types[name]
    raw = raw.strip()
    if raw.lower() in ("none", "") and "None" in t:
        return None
    try:
        if t.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        out[key] = _coerce(key, value)
    return out


def build_config(defaults: dict | None = None, file_values: dict | None = None, flags: dict | None = None) -> RunConfig:
    """Merge defaults < config file < command-line flags, then validate."""
    merged = {}
    for layer in (defaults or {}, file_values or {}, flags or {}):
        merged.update({k: v for k, v in layer.items() if v is not None})
    return RunConfig(**merged).validate()
