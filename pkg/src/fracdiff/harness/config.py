"""Flat ``key = value`` experiment configuration.

One file describes one run. Physics parameters have no defaults; numerical
tolerances do. Lines starting with ``#`` or ``;`` are comments.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..stationary import critical_exponent

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]

_SECTION = "experiment-config"


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.replace(",", " ").split())


def _str_list(s: str) -> tuple[str, ...]:
    return tuple(x for x in s.replace(",", " ").split())


_TYPES = {
    "experiment": str,
    "q": float,
    "theta": float,
    "L": float,
    "h": float,
    "dt": float,
    "ds": float,
    "n_steps": int,
    "T": float,
    "initial": str,
    "refinement": _float_list,
    "dt_ref": float,
    "h_ref": float,
    "kind": str,
    "epsilon": float,
    "C": float,
    "s_max": float,
    "output_dir": str,
    "seed": int,
    "q_list": _float_list,
    "theta_list": _float_list,
    "cfl_factor": float,
    "max_probes": int,
    "samples": int,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    q: float | None = None
    theta: float | None = None
    L: float | None = None
    h: float | None = None
    dt: float | None = None
    ds: float | None = None
    n_steps: int | None = None
    T: float | None = None
    initial: str | None = None
    refinement: tuple = ()
    dt_ref: float | None = None
    h_ref: float | None = None
    kind: str | None = None
    epsilon: float = 1e-7
    C: float | None = None
    s_max: float | None = None
    output_dir: str = "out"
    seed: int = 0
    q_list: tuple = ()
    theta_list: tuple = ()
    cfl_factor: float = 1.0
    max_probes: int = 200
    samples: int = 1000
    extra: dict = field(default_factory=dict, compare=False)

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"config.{name}", f"required for experiment {self.experiment!r}")

    def steps_for(self, step: float) -> int:
        """``n_steps`` if given, else ``T/step`` (which must be an integer)."""
        if self.n_steps is not None:
            return self.n_steps
        if self.T is None:
            raise ConfigError("config.T", "either n_steps or T is required")
        return _exact_ratio(self.T, step, "config.T")

    def validate(self) -> "ExperimentConfig":
        if self.theta is not None and not 0 < self.theta < 1:
            raise ConfigError("config.theta", f"must lie in (0, 1), got {self.theta}")
        if self.q is not None:
            if not self.q > 1:
                raise ConfigError("config.q", f"must exceed 1, got {self.q}")
            if self.theta is not None and self.q > critical_exponent(self.theta):
                raise ConfigError(
                    "config.q", f"{self.q} exceeds the critical exponent {critical_exponent(self.theta)}"
                )
        if self.L is not None and not self.L > 0:
            raise ConfigError("config.L", f"must be positive, got {self.L}")
        if self.h is not None:
            if not self.h > 0:
                raise ConfigError("config.h", f"must be positive, got {self.h}")
            if self.L is not None:
                m = _exact_ratio(self.L, self.h, "config.h") - 1
                if m < 1:
                    raise ConfigError("config.h", "L/h - 1 must be a positive integer")
        for name in ("dt", "ds", "dt_ref", "h_ref", "T", "epsilon", "s_max"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"config.{name}", f"must be positive, got {v}")
        if self.n_steps is not None and self.n_steps < 0:
            raise ConfigError("config.n_steps", "must be nonnegative")
        for i, v in enumerate(self.refinement):
            if not v > 0:
                raise ConfigError(f"config.refinement[{i}]", f"must be positive, got {v}")
        return self


def _exact_ratio(a: float, b: float, path: str) -> int:
    r = a / b
    n = round(r)
    if n < 1 or abs(r - n) > 1e-9 * max(1.0, r):
        raise ConfigError(path, f"{a} is not an integer multiple of {b}")
    return int(n)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case sensitive (L, T, C)
    try:
        cp.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(source, f"parse error: {exc}") from exc
    raw = dict(cp[_SECTION])
    if "experiment" not in raw:
        raise ConfigError("config.experiment", "missing experiment name")
    kwargs, extra = {}, {}
    for key, value in raw.items():
        conv = _TYPES.get(key)
        if conv is None:
            extra[key] = value
            continue
        try:
            kwargs[key] = conv(value.strip())
        except ValueError as exc:
            raise ConfigError(f"config.{key}", f"cannot parse {value!r}: {exc}") from exc
    if extra:
        raise ConfigError(f"config.{sorted(extra)[0]}", f"unknown key; known keys: {', '.join(sorted(_TYPES))}")
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), f"cannot read: {exc}") from exc
    return parse_config(text, str(p))


def config_record(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        if f.name == "extra":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = list(v)
        if isinstance(v, float) and not math.isfinite(v):
            v = str(v)
        out[f.name] = v
    return out
