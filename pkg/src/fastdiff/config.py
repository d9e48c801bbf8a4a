"""Flat key=value run configuration and the objects built from it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Field, build_grid, from_function, mass, parse_grading, read_field_csv, resample
from .params import DEFAULT_EPSILON, ModelParams
from .profiles import solve_theta
from .scheme import StepControl
from .trajectory import snapshot_grid

REQUIRED = ("n", "m", "p")

DEFAULTS = {
    "epsilon": str(DEFAULT_EPSILON),
    "absorption": "on",
    "solver": "rescaled",
    "R_max": "40",
    "cells": "2048",
    "grading": "geometric(1.002)",
    "snapshots": "81",
    "snapshot_spacing": "linear",
    "dt_init": "1e-3",
    "dt_min": "1e-10",
    "dt_max": "0.02",
    "newton_tol": "1e-13",
    "newton_max_iter": "30",
    "initial": "barenblatt:1",
    "perturbation": "0",
    "seed": "0",
    "outdir": "run",
    "suite": "convergence,odes",
    "workers": "1",
}

KNOWN = set(REQUIRED) | set(DEFAULTS) | {"t_end", "s_end", "M", "sweep", "fit_window"}


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    values: dict
    source: str = "<string>"
    lines: dict = field(default_factory=dict)

    def get(self, key: str) -> str:
        if key in self.values:
            return self.values[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        raise ConfigError(f"{self.source}: missing key {key!r}")

    def has(self, key: str) -> bool:
        return key in self.values

    def _convert(self, key, conv, what):
        raw = self.get(key)
        try:
            return conv(raw)
        except ValueError:
            where = f" (line {self.lines[key]})" if key in self.lines else ""
            raise ConfigError(f"{self.source}{where}: {key}={raw!r} is not {what}") from None

    def float(self, key: str) -> float:
        return self._convert(key, float, "a number")

    def int(self, key: str) -> int:
        return self._convert(key, int, "an integer")

    def flag(self, key: str) -> bool:
        def conv(raw):
            low = raw.strip().lower()
            if low in ("on", "true", "yes", "1"):
                return True
            if low in ("off", "false", "no", "0"):
                return False
            raise ValueError(raw)
        return self._convert(key, conv, "on/off")

    def with_(self, **changes) -> "Config":
        values = dict(self.values)
        values.update({k: str(v) for k, v in changes.items()})
        return Config(values, self.source, dict(self.lines))


def parse_config(text: str, source: str = "<string>") -> Config:
    """Parse key=value lines; '#' starts a comment; later keys override earlier ones."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key not in KNOWN:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        values[key] = value
        lines[key] = lineno
    cfg = Config(values, source, lines)
    for key in REQUIRED:
        cfg.get(key)
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def build_params(cfg: Config) -> ModelParams:
    try:
        return ModelParams(
            n=cfg.int("n"), m=cfg.float("m"), p=cfg.float("p"),
            epsilon=cfg.float("epsilon"), absorption_enabled=cfg.flag("absorption"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.source}: {exc}") from exc


def build_grid_from(cfg: Config):
    try:
        parse_grading(cfg.get("grading"))
        return build_grid(cfg.int("n"), cfg.float("R_max"), cfg.int("cells"), cfg.get("grading"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.source}: {exc}") from exc


def build_control(cfg: Config) -> StepControl:
    try:
        return StepControl(
            dt_init=cfg.float("dt_init"), dt_min=cfg.float("dt_min"), dt_max=cfg.float("dt_max"),
            newton_tol=cfg.float("newton_tol"), newton_max_iter=cfg.int("newton_max_iter"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.source}: {exc}") from exc


def solver_kind(cfg: Config) -> str:
    kind = cfg.get("solver")
    if kind not in ("physical", "rescaled"):
        raise ConfigError(f"{cfg.source}: solver must be physical or rescaled, got {kind!r}")
    return kind


def end_time(cfg: Config) -> float:
    key = "t_end" if solver_kind(cfg) == "physical" else "s_end"
    if not cfg.has(key):
        raise ConfigError(f"{cfg.source}: missing key {key!r} for solver={cfg.get('solver')}")
    value = cfg.float(key)
    if not value > 0.0:
        raise ConfigError(f"{cfg.source}: {key} must be positive")
    return value


def snapshot_times(cfg: Config) -> np.ndarray:
    try:
        return snapshot_grid(end_time(cfg), cfg.int("snapshots"), cfg.get("snapshot_spacing"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.source}: {exc}") from exc


def fit_window(cfg: Config):
    if not cfg.has("fit_window"):
        return None
    try:
        lo, hi = (float(x) for x in cfg.get("fit_window").split(","))
    except ValueError:
        raise ConfigError(f"{cfg.source}: fit_window must be 'start,end'") from None
    return (lo, hi)


def rng(cfg: Config) -> np.random.Generator:
    """The single source of randomness for a run."""
    return np.random.default_rng(cfg.int("seed"))


def initial_field(cfg: Config, params: ModelParams, grid) -> Field:
    """Initial density from ``initial=barenblatt:M | gaussian:M,width | file:path``.

    barenblatt:M is the profile rho_M, which equals U_M(., 1/lam) in physical
    variables, so both solvers start from the same field.
    """
    spec = cfg.get("initial")
    kind, _, arg = spec.partition(":")
    try:
        if kind == "barenblatt":
            M = float(arg)
            field0 = solve_theta(M, params, grid=grid).rho(grid)
        elif kind == "gaussian":
            M, width = (float(x) for x in arg.split(","))
            if not (M > 0.0 and width > 0.0):
                raise ValueError("gaussian mass and width must be positive")
            field0 = from_function(grid, lambda r: np.exp(-(r / width) ** 2))
            field0 = field0 * (M / mass(field0))
        elif kind == "file":
            loaded, _ = read_field_csv(arg)
            field0 = loaded if loaded.grid.n == grid.n and np.array_equal(loaded.grid.faces, grid.faces) \
                else resample(loaded, grid)
        else:
            raise ValueError(f"unknown initial data kind {kind!r}")
    except (ValueError, OSError) as exc:
        raise ConfigError(f"{cfg.source}: initial={spec!r}: {exc}") from exc
    amp = cfg.float("perturbation")
    if amp:
        if not 0.0 < amp < 1.0:
            raise ConfigError(f"{cfg.source}: perturbation must be in [0, 1)")
        noise = rng(cfg).uniform(-amp, amp, grid.cells)
        M0 = mass(field0)
        field0 = field0.with_values(field0.values * (1.0 + noise))
        field0 = field0 * (M0 / mass(field0))
    return field0


def profile_mass(cfg: Config) -> float:
    if cfg.has("M"):
        M = cfg.float("M")
    else:
        kind, _, arg = cfg.get("initial").partition(":")
        if kind != "barenblatt":
            raise ConfigError(f"{cfg.source}: profile needs key 'M' or initial=barenblatt:M")
        try:
            M = float(arg)
        except ValueError:
            raise ConfigError(f"{cfg.source}: bad barenblatt mass {arg!r}") from None
    if not (M > 0.0 and math.isfinite(M)):
        raise ConfigError(f"{cfg.source}: M must be positive")
    return M


def sweep_points(cfg: Config) -> list[dict]:
    """``sweep=key:v1,v2,...`` (several keys separated by ';' form a product)."""
    if not cfg.has("sweep"):
        return []
    axes = []
    for part in cfg.get("sweep").split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, vals = part.partition(":")
        key = key.strip()
        if key not in KNOWN or key in ("sweep", "outdir"):
            raise ConfigError(f"{cfg.source}: cannot sweep over {key!r}")
        items = [v.strip() for v in vals.split(",") if v.strip()]
        axes.append((key, items))
    points = [{}]
    for key, items in axes:
        points = [dict(pt, **{key: v}) for pt in points for v in items]
    return [pt for pt in points if pt]
