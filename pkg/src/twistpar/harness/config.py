"""Experiment configuration, the exponent gate and symbol construction."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..grid import GridGeometry
from ..operators import (
    SpatialSymbol,
    TwistedSymbol,
    cone_symbol,
    constant_symbol,
    hard_cone_symbol,
    modulated_spatial_symbol,
)
from .parser import (
    ParseError,
    compile_expression,
    parse_expression,
    parse_spatial_expression,
    parse_symbol_expression,
)

__all__ = [
    "ConfigError",
    "ExponentTuple",
    "GateResult",
    "exponent_gate",
    "ExperimentConfig",
    "COMMAND_DEFAULTS",
    "resolve_config",
    "build_symbol",
]

HOLDER_TOL = 1e-12


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class ExponentTuple:
    """Exponents ``(p, q, r)`` of the Lebesgue norms and the smoothness ``s``."""

    p: float
    q: float
    r: float
    s: float = 0.0

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any]) -> "ExponentTuple":
        try:
            return cls(float(d["p"]), float(d["q"]), float(d["r"]), float(d.get("s", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid exponents {d!r}: {exc}") from exc


@dataclass(frozen=True)
class GateResult:
    valid: bool
    reason: str

    def __bool__(self) -> bool:
        return self.valid


def exponent_gate(t: ExponentTuple) -> GateResult:
    """Check ``1/p + 1/q = 1/r > 1/2`` with ``p, q, r`` in ``(1, inf)`` and ``s >= 0``."""
    for name in ("p", "q", "r"):
        v = getattr(t, name)
        if not (math.isfinite(v) and v > 1):
            return GateResult(False, f"{name}={v:g} is not in (1, inf)")
    if not (math.isfinite(t.s) and t.s >= 0):
        return GateResult(False, f"s={t.s:g} is negative")
    gap = 1.0 / t.p + 1.0 / t.q - 1.0 / t.r
    if abs(gap) > HOLDER_TOL:
        return GateResult(False, f"1/p + 1/q - 1/r = {gap:.3g} (Hölder identity fails)")
    if not 1.0 / t.r > 0.5:
        return GateResult(False, f"1/r = {1.0 / t.r:g} is not > 1/2")
    return GateResult(True, "ok")


_BASE: dict[str, Any] = {
    "grid": {"n": 128, "l": 16.0},
    "symbol": {"name": "cone", "c": 1.0},
    "exponents": {"p": 3.0, "q": 3.0, "r": 1.5, "s": 1.0},
    "ensemble": {"kind": "band_limited_random", "count": 20, "seed": 0, "annulus": [0.25, 0.5], "x_step": None},
    "sweep": {"dilations": [-2, -1, 0, 1, 2]},
    "probe": False,
    "workers": 1,
}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "partition-check": {"partition": {"k_min": -4, "k_max": 4, "samples": 10000}},
    "decompose": {"grid": {"n": 64, "l": 16.0}, "decomposition": {"n_max": 8, "k_range": None}},
    "reconstruct-error": {"decomposition": {"n_max_list": [2, 4, 8, 16], "k_range": [-1, 1]}},
    "apply": {"inputs": {"f": None, "g": None, "decomposition": None}},
    "ratio-sweep": {},
    "recover-symbol": {
        "grid": {"n": 64, "l": 32.0},
        "recovery": {"xi0": [0.0, -0.4375], "eta0": [0.0, 0.4375], "eps": [0.5, 0.25, 0.125], "center": None},
    },
    "prop1-probe": {
        "grid": {"n": 256, "l": 4.0},
        "symbol": {"name": "constant", "value": 1.0},
        "probe": True,
        "sweep": {"lambdas": [4.0, 8.0, 16.0], "eta2": 1.0, "width": 0.3},
    },
    "leibniz-check": {
        "ensemble": {"count": 3, "annulus": [0.25, 1.0]},
        "leibniz": {"orders": [1, 2], "k_range": None},
    },
}


def _merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), dict):
            # a symbol spec replaces the default wholesale
            out[key] = dict(val) if key == "symbol" else _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration of one harness run.

    Attributes
    ----------
    command : str
    data : dict
        The resolved JSON document; embedded verbatim in reports.
    """

    command: str
    data: dict

    @property
    def grid(self) -> GridGeometry:
        g = self.data["grid"]
        try:
            return GridGeometry(int(g["n"]), float(g["l"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid grid {g!r}: {exc}") from exc

    @property
    def exponents(self) -> ExponentTuple:
        return ExponentTuple.from_mapping(self.data["exponents"])

    @property
    def probe(self) -> bool:
        return bool(self.data.get("probe", False))

    @property
    def seed(self) -> int:
        return int(self.data["ensemble"]["seed"])

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True)


def resolve_config(
    command: str,
    user: Mapping[str, Any] | None = None,
    seed: int | None = None,
    grid: tuple[int, float] | None = None,
) -> ExperimentConfig:
    """Merge base defaults, command defaults, the user document and CLI overrides."""
    if command not in COMMAND_DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    data = _merge(_BASE, COMMAND_DEFAULTS[command])
    if user:
        if not isinstance(user, Mapping):
            raise ConfigError("configuration must be a JSON object")
        data = _merge(data, user)
    if seed is not None:
        data["ensemble"]["seed"] = int(seed)
    if grid is not None:
        data["grid"] = {"n": int(grid[0]), "l": float(grid[1])}
    cfg = ExperimentConfig(command, data)
    cfg.grid  # validate eagerly
    cfg.exponents
    if int(data["ensemble"].get("count", 0)) < 0:
        raise ConfigError("ensemble count must be nonnegative")
    return cfg


def build_symbol(spec: Mapping[str, Any], geo: GridGeometry | None = None) -> TwistedSymbol | SpatialSymbol:
    """Symbol from a catalog name or an expression.

    Catalog names: ``cone`` (``c``), ``hard_cone`` (``c``), ``constant``
    (``value``), ``one`` and ``zero``. An ``expression`` entry is parsed in
    ``tau1, tau2``; adding ``amplitude`` (in ``x, y`` and the box length ``L``)
    makes a spatially modulated symbol ``amplitude * m``. A ``spatial``
    expression in ``x, y, tau1, tau2`` defines a general spatial symbol.
    """
    spec = dict(spec)
    support = spec.get("support_constant")
    try:
        if "spatial" in spec:
            consts = {"L": geo.l} if geo is not None else {}
            return parse_spatial_expression(str(spec["spatial"]), consts, support)
        if "expression" in spec:
            m = parse_symbol_expression(str(spec["expression"]), support)
        else:
            name = spec.get("name", "cone")
            if name == "cone":
                m = cone_symbol(float(spec.get("c", 1.0)))
            elif name == "hard_cone":
                m = hard_cone_symbol(float(spec.get("c", 1.0)))
            elif name == "constant":
                m = constant_symbol(complex(spec.get("value", 1.0)))
            elif name == "one":
                m = constant_symbol(1.0)
            elif name == "zero":
                m = constant_symbol(0.0)
            else:
                raise ConfigError(f"unknown catalog symbol {name!r}")
        if "amplitude" in spec:
            consts = {"L": geo.l} if geo is not None else {}
            ev = compile_expression(parse_expression(str(spec["amplitude"]), {"x", "y"}, consts))

            def amp(x, y):
                return np.broadcast_to(ev({"x": x, "y": y}), np.broadcast(x, y).shape)

            return modulated_spatial_symbol(amp, m, name=f"({spec['amplitude']})*{m.name}")
        return m
    except ParseError as exc:
        raise ConfigError(f"symbol expression: {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid symbol spec {spec!r}: {exc}") from exc
