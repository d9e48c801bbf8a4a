"""Radial finite-volume mesh of R^n and quadrature for radial densities."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FIELD_SCHEMA = "fastdiff-field v1"


class GridError(ValueError):
    pass


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int, radius: float) -> float:
    return sphere_area(n) * radius**n / n


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n: int
    faces: np.ndarray
    grading: str = "uniform"

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=float).copy()
        if faces.ndim != 1 or faces.size < 2:
            raise GridError("need at least one cell")
        if faces[0] != 0.0:
            raise GridError("first face must sit at the origin")
        if np.any(np.diff(faces) <= 0.0):
            raise GridError("faces must be strictly increasing")
        faces.flags.writeable = False
        object.__setattr__(self, "faces", faces)
        omega = sphere_area(self.n)
        centers = 0.5 * (faces[1:] + faces[:-1])
        volumes = omega * np.diff(faces**self.n) / self.n
        areas = omega * faces ** (self.n - 1)
        for arr in (centers, volumes, areas):
            arr.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "volumes", volumes)
        # areas[j] is the area of the sphere through faces[j]; areas[0] == 0
        object.__setattr__(self, "areas", areas)

    @property
    def cells(self) -> int:
        return self.faces.size - 1

    @property
    def R_max(self) -> float:
        return float(self.faces[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.faces)

    @property
    def center_gaps(self) -> np.ndarray:
        """Distances between neighbouring centers, one per interior face."""
        return np.diff(self.centers)

    def scaled(self, factor: float) -> "RadialGrid":
        """Grid with every radius multiplied by ``factor``."""
        if factor <= 0.0:
            raise GridError("scale factor must be positive")
        return RadialGrid(self.n, self.faces * factor, grading=self.grading)

    def refined(self) -> "RadialGrid":
        """Every cell split at its midpoint (all widths exactly halved)."""
        faces = np.empty(2 * self.cells + 1)
        faces[::2] = self.faces
        faces[1::2] = self.centers
        return RadialGrid(self.n, faces, grading=f"{self.grading}/2")

    def header(self) -> dict:
        return {"n": self.n, "R_max": self.R_max, "cells": self.cells, "grading": self.grading}


def build_grid(n: int, R_max: float, cells: int, grading: str | tuple = "uniform") -> RadialGrid:
    """Mesh of the ball of radius ``R_max``.

    ``grading`` is ``"uniform"`` or ``"geometric(q)"`` (also ``("geometric", q)``);
    with ``q > 1`` consecutive widths grow by ``q`` away from the origin.
    """
    if n < 2:
        raise GridError(f"dimension must be >= 2, got {n}")
    if not R_max > 0.0:
        raise GridError(f"R_max must be positive, got {R_max}")
    if int(cells) != cells or cells < 1:
        raise GridError(f"cell count must be a positive integer, got {cells}")
    cells = int(cells)
    kind, ratio = parse_grading(grading)
    if kind == "uniform" or ratio == 1.0:
        faces = np.linspace(0.0, R_max, cells + 1)
        label = "uniform" if kind == "uniform" else f"geometric({ratio!r})"
    else:
        widths = ratio ** np.arange(cells, dtype=float)
        faces = np.concatenate(([0.0], np.cumsum(widths)))
        faces *= R_max / faces[-1]
        faces[-1] = R_max
        label = f"geometric({ratio!r})"
    return RadialGrid(int(n), faces, grading=label)


def parse_grading(grading) -> tuple[str, float]:
    if isinstance(grading, tuple):
        kind, ratio = grading
        ratio = float(ratio)
    else:
        text = str(grading).strip().lower()
        if text == "uniform":
            return "uniform", 1.0
        match = re.fullmatch(r"geometric\(\s*([0-9.eE+-]+)\s*\)", text)
        if not match:
            raise GridError(f"unknown grading {grading!r}")
        kind, ratio = "geometric", float(match.group(1))
    if kind != "geometric" or not ratio > 0.0:
        raise GridError(f"bad grading {grading!r}")
    return kind, ratio


@dataclass(frozen=True, eq=False)
class Field:
    """Nonnegative cell averages of a radial density on ``grid``."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.cells,):
            raise GridError(f"expected {self.grid.cells} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        if np.any(values < 0.0):
            raise GridError(f"field has negative values (min {values.min():.3e})")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)


def zeros(grid: RadialGrid) -> Field:
    return Field(grid, np.zeros(grid.cells))


def from_function(grid: RadialGrid, fn) -> Field:
    """Sample a radial function at the cell centers."""
    return Field(grid, np.asarray(fn(grid.centers), dtype=float))


def integrate(grid: RadialGrid, values: np.ndarray) -> float:
    return float(np.dot(values, grid.volumes))


def mass(field: Field) -> float:
    return integrate(field.grid, field.values)


def lr_norm(field: Field, r: float) -> float:
    if r == math.inf:
        return float(field.values.max()) if field.values.size else 0.0
    if not r >= 1.0:
        raise ValueError(f"L^r norm needs r >= 1, got {r}")
    if r == 1.0:
        return mass(field)
    return integrate(field.grid, field.values**r) ** (1.0 / r)


def second_moment(field: Field) -> float:
    return integrate(field.grid, field.values * field.grid.centers**2)


def l1_distance(a: Field, b: Field) -> float:
    if a.grid is not b.grid and not np.array_equal(a.grid.faces, b.grid.faces):
        raise GridError("fields live on different grids")
    return integrate(a.grid, np.abs(a.values - b.values))


def resample(field: Field, grid: RadialGrid) -> Field:
    """Piecewise-linear transfer of center values onto another grid (zero outside)."""
    src = field.grid
    xp = np.concatenate((src.centers, [src.R_max]))
    fp = np.concatenate((field.values, [field.values[-1]]))
    return Field(grid, np.interp(grid.centers, xp, fp, left=fp[0], right=0.0))


def write_field_csv(field: Field, path, **meta) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dict(field.grid.header(), **meta)
    lines = [f"# {FIELD_SCHEMA}", "# " + json.dumps(header, sort_keys=True), "r_center,value"]
    lines += [f"{float(r)!r},{float(v)!r}" for r, v in zip(field.grid.centers, field.values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field_csv(path) -> tuple[Field, dict]:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# fastdiff-field"):
        raise GridError(f"{path}: not a field file")
    header = json.loads(text[1][1:].strip())
    grid = build_grid(header["n"], header["R_max"], header["cells"], header["grading"])
    rows = [line.split(",") for line in text[3:] if line.strip()]
    values = np.array([float(v) for _, v in rows])
    return Field(grid, values), header
