"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, keys use dotted namespaces::

    grid.n = 32
    time.t_end = 10
    time.dt = auto
    physics.w = 2 2.8284271247461903 3.4641016151377544
    init.kind = random

Unknown keys and ill-typed values raise :class:`ConfigError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .diagnostics import OrderParams
from .diophantine import DEFAULT_DIRECTION
from .pressure import power_law
from .solver import SolverConfig

INIT_KINDS = ("random", "zero", "h_mode")


class ConfigError(ValueError):
    """Invalid configuration text, key or value."""


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _dt(text: str):
    return "auto" if text.strip().lower() == "auto" else _float(text)


def _vec3(text: str) -> tuple[float, float, float]:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise ValueError("expected three numbers")
    return tuple(_float(p) for p in parts)


def _kind(text: str) -> str:
    t = text.strip()
    if t not in INIT_KINDS:
        raise ValueError(f"expected one of {INIT_KINDS}")
    return t


def _str(text: str) -> str:
    return text.strip()


_DEFAULT_W = tuple(float(x) for x in 2.0 * DEFAULT_DIRECTION)

# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "grid.n": (_int, 32),
    "time.dt": (_dt, "auto"),
    "time.t_end": (_float, 10.0),
    "time.cfl": (_float, 0.4),
    "physics.nu": (_float, 1.0),
    "physics.gamma": (_float, 1.4),
    "physics.w": (_vec3, _DEFAULT_W),
    "physics.r": (_float, 3.0),
    "physics.rho_min": (_float, 0.5),
    "physics.rho_max": (_float, 1.5),
    "init.kind": (_kind, "random"),
    "init.amplitude": (_float, 1e-2),
    "init.seed": (_int, 0),
    "init.k_max": (_float, 2.0),
    "output.cadence": (_int, 10),
    "output.dir": (_str, "out"),
    "output.checkpoint": (_bool, False),
    "orders.L": (_int, 1),
    "orders.M": (_int, 2),
    "orders.N": (_int, 3),
    "orders.d": (_int, 7),
    "orders.r": (_float, 1.0),
    "orders.relaxed": (_bool, True),
    "diag.delta_start": (_float, 1.0),
    "diag.weights": (_vec3, (1.0, 1.0, 1.0)),
    "diag.identity_order": (_int, 6),
    "dio.K": (_int, 20),
    "dio.s": (_float, 3.0),
    "dio.samples": (_int, 100),
    "linear.K": (_int, 8),
    "linear.beta": (_float, 1.0),
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_format(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Config:
    """Parsed configuration; every schema key is present."""

    values: Mapping[str, Any]

    def __getitem__(self, key: str):
        return self.values[key]

    @classmethod
    def defaults(cls) -> Config:
        return cls({k: d for k, (_, d) in SCHEMA.items()})

    def with_overrides(self, items: Iterable[str | tuple[str, str]]) -> Config:
        """Apply ``KEY=VALUE`` strings (or pairs) on top of this config."""
        vals = dict(self.values)
        for item in items:
            if isinstance(item, str):
                if "=" not in item:
                    raise ConfigError(f"override {item!r} is not KEY=VALUE")
                key, text = item.split("=", 1)
            else:
                key, text = item
            key = key.strip()
            vals[key] = parse_value(key, str(text))
        return Config(vals)

    def lines(self) -> list[str]:
        return [f"{k} = {_format(self.values[k])}" for k in sorted(self.values)]

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig(
                n=self["grid.n"], t_end=self["time.t_end"], dt=self["time.dt"], nu=self["physics.nu"],
                pressure=power_law(self["physics.gamma"]), w=self["physics.w"], cfl_number=self["time.cfl"],
                positivity_window=(self["physics.rho_min"], self["physics.rho_max"]), seed=self["init.seed"],
                cadence=self["output.cadence"],
            )
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err)) from err

    def orders(self) -> OrderParams:
        try:
            return OrderParams(self["orders.L"], self["orders.M"], self["orders.N"], self["orders.d"],
                               self["orders.r"], relaxed=self["orders.relaxed"])
        except ValueError as err:
            raise ConfigError(str(err)) from err


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser, _ = SCHEMA[key]
    try:
        return parser(text)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad value for {key}: {text.strip()!r} ({err})") from err


def parse_config(text: str, base: Config | None = None) -> Config:
    """Parse configuration text on top of ``base`` (the defaults if omitted)."""
    vals = dict((base or Config.defaults()).values)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        vals[key] = parse_value(key, value)
    return Config(vals)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


def w_vector(cfg: Config) -> np.ndarray:
    return np.array(cfg["physics.w"], dtype=float)
