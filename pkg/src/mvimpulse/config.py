"""Key-value configuration files and simulation settings."""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError
from .model import ModelParams, parse_gamma0, validate_params

MODEL_KEYS = ("alpha0", "sigma1", "sigma2", "rho", "lambda", "c", "jump_rate", "jump_gamma0")
SIM_DEFAULTS = {
    "n_particles": 1,
    "n_paths": 1000,
    "dt": 1e-3,
    "horizon": 150.0,
    "x0": 1.0,
    "seed": 0,
}


@dataclass(frozen=True)
class SimConfig:
    n_particles: int = 1
    n_paths: int = 1000
    dt: float = 1e-3
    horizon: float = 150.0
    x0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        bad = []
        if self.n_particles < 1:
            bad.append("n_particles >= 1")
        if self.n_paths < 1:
            bad.append("n_paths >= 1")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            bad.append("dt > 0")
        if not self.horizon > 0:
            bad.append("horizon > 0")
        if not (self.x0 > 0 and math.isfinite(self.x0)):
            bad.append("x0 > 0")
        if bad:
            raise ConfigError("invalid simulation settings: " + ", ".join(bad))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def as_dict(self) -> dict:
        return asdict(self)


def read_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines (``#`` comments allowed, no sections)."""
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return dict(parser["config"])


def model_from_mapping(kv: dict[str, str]) -> ModelParams:
    missing = [k for k in MODEL_KEYS if k not in kv]
    if missing:
        raise ConfigError("missing config key: " + ", ".join(missing))
    try:
        num = {k: float(kv[k]) for k in MODEL_KEYS if k != "jump_gamma0"}
    except ValueError as exc:
        raise ConfigError(f"non-numeric config value: {exc}") from None
    p = ModelParams(
        alpha0=num["alpha0"],
        sigma1=num["sigma1"],
        sigma2=num["sigma2"],
        rho=num["rho"],
        lambda_prop=num["lambda"],
        c_fixed=num["c"],
        levy=parse_gamma0(num["jump_rate"], kv["jump_gamma0"]),
    )
    return validate_params(p).params


def sim_from_mapping(kv: dict[str, str]) -> SimConfig:
    vals = {}
    for key, default in SIM_DEFAULTS.items():
        raw = kv.get(key)
        if raw is None:
            vals[key] = default
            continue
        try:
            vals[key] = int(float(raw)) if isinstance(default, int) else float(raw)
        except ValueError:
            raise ConfigError(f"non-numeric value for {key}: {raw!r}") from None
    return SimConfig(**vals)


def load_config(path) -> tuple[ModelParams, SimConfig, dict[str, str]]:
    """Read a config file; returns model, simulation settings and the raw mapping."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    kv = read_key_values(text)
    unknown = sorted(set(kv) - set(MODEL_KEYS) - set(SIM_DEFAULTS))
    if unknown:
        raise ConfigError("unknown config key: " + ", ".join(unknown))
    return model_from_mapping(kv), sim_from_mapping(kv), kv
