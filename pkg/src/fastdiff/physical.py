"""Implicit integrator for u_t = Lap(u^m + eps u) - u^p on a radial grid."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import roots_legendre

from .grid import Field, integrate, lr_norm, mass, second_moment, sphere_area
from .params import ModelParams
from .scheme import FVOperator, StepControl
from .trajectory import Trajectory, march

PHYSICAL_COLUMNS = ["t", "mass", "L1", "L2", "Linf", "second_moment"]


def _operator(grid, op):
    if op is not None and op.grid is grid:
        return op
    return FVOperator(grid)


def step_physical(u: Field, t: float, dt: float, params: ModelParams, ctrl: StepControl, op=None) -> Field:
    """One backward-Euler step; raises NewtonFailure if Newton does not converge."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    values, _ = _physical_step_values(_operator(u.grid, op), u.values, dt, params, ctrl)
    return Field(u.grid, values)


def _physical_step_values(op, values, dt, params, ctrl):
    return op.step(
        values, dt,
        m=params.m, eps=params.epsilon, drift=0.0,
        sink=1.0 if params.absorption_enabled else 0.0, p=params.p, ctrl=ctrl,
    )


def physical_snapshot_row(u: Field, t: float) -> dict:
    return {
        "t": t,
        "mass": mass(u),
        "L1": lr_norm(u, 1.0),
        "L2": lr_norm(u, 2.0),
        "Linf": lr_norm(u, math.inf),
        "second_moment": second_moment(u),
    }


def run_physical(u0: Field, t_end: float, params: ModelParams, ctrl: StepControl, snapshot_times) -> Trajectory:
    grid = u0.grid
    op = FVOperator(grid)
    traj = Trajectory("physical", params, grid)
    sink = 1.0 if params.absorption_enabled else 0.0

    def step_fn(values, t, dt):
        return _physical_step_values(op, values, dt, params, ctrl)

    def on_step(old, new, t_old, t_new, iters):
        traj.append_step({
            "t": t_new,
            "dt": t_new - t_old,
            "mass_old": integrate(grid, old),
            "mass": integrate(grid, new),
            "sink": sink * integrate(grid, new**params.p),
            "L2": math.sqrt(integrate(grid, new**2)),
            "Linf": float(new.max()),
            "newton_iters": iters,
        })

    def on_snapshot(values, t):
        traj.times.append(float(t))
        traj.fields.append(values.copy())
        traj.append_diag(physical_snapshot_row(Field(grid, values), float(t)))

    march(u0.values, 0.0, t_end, snapshot_times, ctrl, step_fn, on_step, on_snapshot)
    return traj


def _bump(z):
    out = np.zeros_like(z)
    inside = z < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def mollify_initial(u0: Field, radius: float, nodes: int = 6, angles: int = 48) -> Field:
    """Convolve a radial density with a normalized C^inf bump supported in B(0, radius).

    The cell-to-cell kernel weights are renormalized so each source cell's mass
    is redistributed exactly (up to rounding).
    """
    if radius < 0.0:
        raise ValueError("mollifier radius must be nonnegative")
    if radius == 0.0:
        return u0
    grid = u0.grid
    n = grid.n
    faces = grid.faces
    xg, wg = roots_legendre(nodes)
    phi_x, phi_w = roots_legendre(angles)
    phi = 0.5 * math.pi * (phi_x + 1.0)
    phi_w = 0.5 * math.pi * phi_w
    ang_w = phi_w * np.sin(phi) ** (n - 2) * sphere_area(n - 1) if n > 2 else phi_w * 2.0
    cos_phi = np.cos(phi)

    lo, hi = faces[:-1], faces[1:]
    # quadrature points (cell, node) in r, weighted by the shell measure
    rq = 0.5 * (hi - lo)[:, None] * xg[None, :] + 0.5 * (hi + lo)[:, None]
    wq = 0.5 * (hi - lo)[:, None] * wg[None, :] * sphere_area(n) * rq ** (n - 1)

    K = grid.cells
    rows, cols, vals = [], [], []
    for j in range(K):
        near = np.nonzero((lo <= hi[j] + radius) & (hi >= lo[j] - radius))[0]
        r_i = rq[near][:, :, None, None]          # target points
        r_j = rq[j][None, None, :, None]          # source points
        dist2 = r_i**2 + r_j**2 - 2.0 * r_i * r_j * cos_phi[None, None, None, :]
        kern = _bump(np.sqrt(np.maximum(dist2, 0.0)) / radius)
        # source shell average of the kernel times target shell measure
        inner = np.tensordot(kern, ang_w, axes=([3], [0])) / sphere_area(n)
        weight = np.einsum("ab,abc,c->a", wq[near], inner, wq[j])
        total = weight.sum()
        if total <= 0.0:
            rows.append(np.array([j])); cols.append(np.array([j])); vals.append(np.array([1.0]))
            continue
        rows.append(near)
        cols.append(np.full(near.size, j))
        vals.append(weight / total)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    # vals[row, col]: fraction of source cell col's mass landing in target cell row
    cell_mass = u0.values * grid.volumes
    out_mass = np.zeros(K)
    np.add.at(out_mass, rows, vals * cell_mass[cols])
    return Field(grid, out_mass / grid.volumes)
