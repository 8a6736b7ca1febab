"""Experiment configurations: versioned JSON documents, strictly validated.

Unknown fields are errors, not warnings, so a config file always reproduces
exactly what it says. Defaults equal the reference operating point
(N=200, K=1000, s=100, sigma_n=1e4, T=1000, c=50, sigma_dp=30, r=50).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

SCHEMA_VERSION = 1

KNOWN_SCHEMES = ("bss", "pbss", "bss_dp")
KNOWN_FUNCTIONS = ("relu", "sigmoid", "swish", "binary_step", "median", "identity")
KNOWN_MODES = ("direct", "blocked")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters for precision sweeps (the ``run`` and ``matmul`` commands)."""

    schema: int = SCHEMA_VERSION
    N: int = 200
    K: int = 1000
    L: int = 1
    s: float = 100.0
    sigma_n: float = 10000.0
    T: int = 1000
    c: int = 50
    sigma_dp: float = 30.0
    r: int = 50
    block_count: int = 2
    mask_shift: float = 10.0
    cols: int | None = None  # matmul operand columns; defaults to K
    straggler_levels: tuple = (0, 50, 100)
    functions: tuple = ("relu",)
    schemes: tuple = KNOWN_SCHEMES
    modes: tuple = KNOWN_MODES
    densities: tuple = (1.0,)
    seed: int = 12345
    repetitions: int = 5

    def validate(self, for_matmul: bool = False) -> None:
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {self.schema}")
        _positive_int(self, "N", "K", "L", "T", "r", "block_count", "repetitions")
        if self.T < 0:
            raise ConfigError(f"T: must be >= 0, got {self.T}")
        for name in ("s", "sigma_n", "sigma_dp"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if abs(self.mask_shift) <= 2.0 and self.T > 0:
            raise ConfigError("mask_shift: magnitude must exceed 2 when T > 0")
        if self.K % self.r:
            raise ConfigError(f"r: {self.r} does not divide K = {self.K}")
        if self.T % self.r:
            raise ConfigError(f"r: {self.r} does not divide T = {self.T}")
        for level in self.straggler_levels:
            if not 0 <= level < self.N:
                raise ConfigError(f"straggler_levels: {level} outside [0, N)")
        for scheme in self.schemes:
            if scheme not in KNOWN_SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {scheme!r}")
        for function in self.functions:
            if function not in KNOWN_FUNCTIONS:
                raise ConfigError(f"functions: unknown function {function!r}")
        if for_matmul:
            cols = self.K if self.cols is None else self.cols
            if cols < 1:
                raise ConfigError("cols: must be positive")
            for mode in self.modes:
                if mode not in KNOWN_MODES:
                    raise ConfigError(f"modes: unknown mode {mode!r}")
            for density in self.densities:
                if not 0.0 < density <= 1.0:
                    raise ConfigError(f"densities: {density} outside (0, 1]")
            if "blocked" in self.modes:
                if cols % self.block_count:
                    raise ConfigError(
                        f"block_count: {self.block_count} does not divide cols = {cols}"
                    )
                if (cols // self.block_count) % self.r:
                    raise ConfigError(
                        f"r: {self.r} does not divide block columns "
                        f"{cols // self.block_count}"
                    )
                if self.N < self.block_count**2:
                    raise ConfigError(
                        f"N: blocked mode needs at least block_count**2 = "
                        f"{self.block_count**2} nodes"
                    )


@dataclass(frozen=True)
class CalibrationSpec:
    """Pessimistic all-collude anchor used to tune the regularization floor."""

    T: int = 1
    sigma_n: float = 1e4
    c: int | None = None  # defaults to N (every node colludes)
    target_bits: float = math.log2(2e4)


@dataclass(frozen=True)
class LeakageConfig:
    schema: int = SCHEMA_VERSION
    N: int = 200
    K: int = 10
    T: int = 50
    s: float = 1e4
    mask_shift: float = 10.0
    sigma_n_values: tuple = (1e5, 2e5, 5e5)
    c_values: tuple = tuple(range(1, 201))
    floor: float | None = None
    calibration: CalibrationSpec | None = CalibrationSpec()
    scenario: str = "prefix"
    scenario_samples: int = 100
    scenario_seed: int = 0
    epsilon: float | None = None

    def validate(self) -> None:
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {self.schema}")
        _positive_int(self, "N", "K", "T")
        if not self.s > 0:
            raise ConfigError("s: must be positive")
        for sigma in self.sigma_n_values:
            if not sigma > 0:
                raise ConfigError(f"sigma_n_values: {sigma} must be positive")
        for c in self.c_values:
            if not 0 <= c <= self.N:
                raise ConfigError(f"c_values: {c} outside [0, N]")
        if self.floor is None and self.calibration is None:
            raise ConfigError("floor: give a floor or a calibration block")
        if self.floor is not None and not self.floor > 0:
            raise ConfigError("floor: must be positive")
        if self.scenario not in ("prefix", "sampled"):
            raise ConfigError(f"scenario: unknown policy {self.scenario!r}")


def _positive_int(cfg, *names):
    for name in names:
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigError(f"{name}: must be a positive integer, got {value!r}")


def _coerce(cls, doc, path):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown fields {unknown}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in doc:
            continue
        value = doc[f.name]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)


def _expand_c_values(value):
    if isinstance(value, dict):
        unknown = sorted(set(value) - {"start", "stop", "step"})
        if unknown:
            raise ConfigError(f"c_values: unknown range fields {unknown}")
        start = value.get("start", 1)
        stop = value["stop"]
        step = value.get("step", 1)
        return tuple(range(start, stop + 1, step))
    return tuple(value)


def parse_experiment_config(doc: dict, for_matmul: bool = False) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    cfg = _coerce(ExperimentConfig, doc, "config")
    cfg.validate(for_matmul=for_matmul)
    return cfg


def parse_leakage_config(doc: dict) -> LeakageConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    doc = dict(doc)
    if "c_values" in doc:
        doc["c_values"] = _expand_c_values(doc["c_values"])
    if doc.get("calibration") is not None:
        doc["calibration"] = _coerce(
            CalibrationSpec, doc["calibration"], "calibration"
        )
    cfg = _coerce(LeakageConfig, doc, "config")
    cfg.validate()
    return cfg


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def config_to_json(cfg) -> str:
    """Canonical serialization; parse -> serialize -> parse is the identity."""
    return json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n"
