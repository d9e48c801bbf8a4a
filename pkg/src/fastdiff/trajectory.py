"""Snapshot container and the adaptive time-marching loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Field, RadialGrid, write_field_csv
from .params import ModelParams
from .scheme import NewtonFailure, SolverFailure, StepControl

log = logging.getLogger(__name__)

DIAG_SCHEMA = "fastdiff-diagnostics v1"


@dataclass
class Trajectory:
    """Fields at the requested snapshot times plus per-snapshot and per-step diagnostics.

    ``kind`` is "physical" (times are t) or "rescaled" (times are s).
    """

    kind: str
    params: ModelParams
    grid: RadialGrid
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)

    def field_at(self, i: int) -> Field:
        return Field(self.grid, self.fields[i])

    def diag(self, key: str) -> np.ndarray:
        return np.asarray(self.diagnostics[key], dtype=float)

    def step_series(self, key: str) -> np.ndarray:
        return np.asarray(self.steps[key], dtype=float)

    def append_diag(self, row: dict):
        for key, value in row.items():
            self.diagnostics.setdefault(key, []).append(value)

    def append_step(self, row: dict):
        for key, value in row.items():
            self.steps.setdefault(key, []).append(value)

    @property
    def time_key(self) -> str:
        return "t" if self.kind == "physical" else "s"

    def write(self, outdir, columns=None, fields=True) -> Path:
        """Diagnostics CSV plus one field CSV per snapshot."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        cols = list(columns or self.diagnostics.keys())
        path = outdir / "diagnostics.csv"
        with path.open("w", newline="") as fh:
            fh.write(f"# {DIAG_SCHEMA} kind={self.kind}\n")
            writer = csv.writer(fh)
            writer.writerow(cols)
            for i in range(len(self.times)):
                writer.writerow([_fmt(self.diagnostics[c][i]) for c in cols])
        steps_path = outdir / "steps.csv"
        keys = list(self.steps.keys())
        with steps_path.open("w", newline="") as fh:
            fh.write(f"# fastdiff-steps v1 kind={self.kind}\n")
            writer = csv.writer(fh)
            writer.writerow(keys)
            for row in zip(*(self.steps[k] for k in keys)):
                writer.writerow([_fmt(v) for v in row])
        if fields:
            for i, t in enumerate(self.times):
                write_field_csv(
                    self.field_at(i), outdir / "fields" / f"snap_{i:04d}.csv",
                    **{self.time_key: float(t)},
                )
        return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_diagnostics(path) -> tuple[str, dict]:
    """Read a diagnostics CSV back into (kind, {column: array})."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("# fastdiff-diagnostics"):
            raise ValueError(f"{path}: not a diagnostics file")
        kind = first.split("kind=")[-1].strip()
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}
    return kind, data


def snapshot_grid(t_end: float, count: int, spacing: str = "linear", t0: float = 0.0) -> np.ndarray:
    """``count`` snapshot times on [t0, t_end] including both ends."""
    if count < 2:
        return np.array([t0, t_end]) if t_end > t0 else np.array([t0])
    if spacing == "linear":
        return np.linspace(t0, t_end, count)
    if spacing == "log":
        # geometric in (1 + t): dense early, sparse late
        return t0 - 1.0 + np.geomspace(1.0, 1.0 + t_end - t0, count)
    raise ValueError(f"unknown snapshot spacing {spacing!r}")


def march(values, t0, t_end, snapshot_times, ctrl: StepControl, step_fn, on_step, on_snapshot):
    """Adaptive backward-Euler march hitting every snapshot time exactly.

    step_fn(values, t, dt) -> (new_values, newton_iterations); raises NewtonFailure.
    on_step(old, new, t_old, t_new, iters) and on_snapshot(values, t) record diagnostics.
    """
    targets = sorted(float(t) for t in snapshot_times if t0 <= t <= t_end)
    if not targets or not math.isclose(targets[-1], t_end):
        targets.append(float(t_end))
    t = float(t0)
    dt = ctrl.dt_init
    easy = 0
    values = np.asarray(values, dtype=float)
    k = 0
    while k < len(targets) and targets[k] <= t + 1e-14 * max(1.0, abs(t)):
        on_snapshot(values, targets[k] if k else t)
        k += 1
    while k < len(targets):
        target = targets[k]
        h = min(dt, target - t)
        hits = h >= target - t - 1e-14 * max(1.0, abs(target))
        try:
            new, iters = step_fn(values, t, h)
        except NewtonFailure as exc:
            dt = h * ctrl.shrink
            easy = 0
            log.debug("step rejected at t=%g dt=%g: %s", t, h, exc)
            if dt < ctrl.dt_min:
                raise SolverFailure(
                    f"time step {dt:.3e} below dt_min {ctrl.dt_min:.3e} at t={t:.6g}: {exc}", t
                ) from exc
            continue
        t_new = target if hits else t + h
        on_step(values, new, t, t_new, iters)
        values, t = new, t_new
        if iters <= ctrl.easy_iters:
            easy += 1
            if easy >= ctrl.easy_steps:
                dt = min(dt * ctrl.grow, ctrl.dt_max)
                easy = 0
        else:
            easy = 0
        while k < len(targets) and targets[k] <= t + 1e-14 * max(1.0, abs(t)):
            on_snapshot(values, targets[k])
            k += 1
    return values


def read_steps(path) -> tuple[str, dict]:
    """Read a steps CSV back into (kind, {column: array})."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("# fastdiff-steps"):
            raise ValueError(f"{path}: not a steps file")
        kind = first.split("kind=")[-1].strip()
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}
    return kind, data
