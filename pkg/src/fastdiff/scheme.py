"""Backward-Euler finite-volume machinery shared by both integrators.

One step solves, for every cell i,

    V_i (rho_i' - rho_i) = dt (F_i - F_{i+1}) - dt V_i k rho_i'^p

where F_j is the outward flux through face j,

    F_j = A_j (w_{j-1} - w_j) / d_j  -  c A_j f_j rho_face_j,

w = rho^m + eps rho is the diffusion potential, c switches the confining
drift of the rescaled equation on (1) or off (0), and rho_face is the linear
interpolant of the two neighbouring cells (or the outer cell, for upwinding).
Newton runs on w: d rho / d w = 1 / (m rho^(m-1) + eps) stays bounded where the
density vanishes, which is what keeps the Jacobian usable for m < 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grid import RadialGrid

log = logging.getLogger(__name__)


class NewtonFailure(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    """Time step fell below ``dt_min``; ``time`` is the last accepted time."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class StepControl:
    """Time-step and Newton controls.

    Newton stops when the summed absolute cell residual (a mass) is at most
    ``newton_tol``, so each step conserves mass up to ``newton_tol``. If the
    line search stalls at rounding level with every cell residual already
    below ``newton_tol``, the iterate is accepted.
    """

    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 0.05
    newton_tol: float = 1e-13
    newton_max_iter: int = 30
    grow: float = 1.2
    shrink: float = 0.5
    easy_iters: int = 5
    easy_steps: int = 3

    def __post_init__(self):
        if not 0.0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.newton_tol > 0.0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")


def rho_of_w(w: np.ndarray, m: float, eps: float) -> np.ndarray:
    """Invert w = rho^m + eps rho (rho = 0 for w <= 0)."""
    w = np.maximum(w, 0.0)
    rho = w ** (1.0 / m)
    if eps > 0.0:
        pos = rho > 0.0
        r = rho[pos]
        wp = w[pos]
        # concave in rho: Newton from w^(1/m) stays positive and converges monotonically
        for _ in range(50):
            g = r**m + eps * r - wp
            step = g / (m * r ** (m - 1.0) + eps)
            r = r - step
            if np.all(np.abs(step) <= 4e-16 * r):
                break
        rho[pos] = r
    return rho


def w_of_rho(rho: np.ndarray, m: float, eps: float) -> np.ndarray:
    return rho**m + eps * rho


def drho_dw(rho: np.ndarray, m: float, eps: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        cond = m * rho ** (m - 1.0) + eps
    return 1.0 / cond


class FVOperator:
    """Geometry of the radial scheme, precomputed once per grid."""

    def __init__(self, grid: RadialGrid, drift_scheme: str = "centered"):
        if drift_scheme not in ("centered", "upwind"):
            raise ValueError(f"unknown drift scheme {drift_scheme!r}")
        self.grid = grid
        self.drift_scheme = drift_scheme
        self.vol = grid.volumes
        f = grid.faces[1:-1]
        d = grid.center_gaps
        A = grid.areas[1:-1]
        self.trans = A / d
        self.drift_coef = A * f
        outer = (f - grid.centers[:-1]) / d
        if drift_scheme == "upwind":
            # inward velocity: the upstream cell is the outer one
            outer = np.ones_like(outer)
        self.w_out = outer
        self.w_in = 1.0 - outer

    def fluxes(self, rho, w, drift: float) -> np.ndarray:
        """Outward flux through each interior face."""
        flux = self.trans * (w[:-1] - w[1:])
        if drift:
            flux -= drift * self.drift_coef * (self.w_in * rho[:-1] + self.w_out * rho[1:])
        return flux

    def divergence(self, flux: np.ndarray) -> np.ndarray:
        """Net inflow per cell from interior-face fluxes (zero flux at both ends)."""
        net = np.zeros(flux.size + 1)
        net[:-1] -= flux
        net[1:] += flux
        return net

    def residual(self, w, rho_old, dt, m, eps, drift, sink, p):
        rho = rho_of_w(w, m, eps)
        res = self.vol * (rho - rho_old) - dt * self.divergence(self.fluxes(rho, w, drift))
        if sink:
            res += dt * self.vol * sink * rho**p
        return res, rho

    def jacobian(self, rho, dt, m, eps, drift, sink, p) -> np.ndarray:
        K = rho.size
        dr = drho_dw(rho, m, eps)
        diag = self.vol * dr
        if sink:
            diag = diag + dt * self.vol * sink * p * rho ** (p - 1.0) * dr
        T = dt * self.trans
        upper = -T.copy()
        lower = -T.copy()
        diag = diag.copy()
        diag[:-1] += T
        diag[1:] += T
        if drift:
            G = drift * dt * self.drift_coef
            upper -= G * self.w_out * dr[1:]
            lower += G * self.w_in * dr[:-1]
            diag[:-1] -= G * self.w_in * dr[:-1]
            diag[1:] += G * self.w_out * dr[1:]
        ab = np.zeros((3, K))
        ab[0, 1:] = upper
        ab[1, :] = diag
        ab[2, :-1] = lower
        return ab

    def step(self, rho_old, dt, *, m, eps, drift=0.0, sink=0.0, p=2.0, ctrl: StepControl):
        """Solve one backward-Euler step; returns (rho_new, newton_iterations)."""
        rho_old = np.asarray(rho_old, dtype=float)
        w = w_of_rho(rho_old, m, eps)
        res, rho = self.residual(w, rho_old, dt, m, eps, drift, sink, p)
        norm = np.linalg.norm(res)
        for it in range(ctrl.newton_max_iter + 1):
            if np.sum(np.abs(res)) <= ctrl.newton_tol:
                return rho, it
            if it == ctrl.newton_max_iter:
                break
            ab = self.jacobian(rho, dt, m, eps, drift, sink, p)
            try:
                delta = solve_banded((1, 1), ab, -res)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NewtonFailure(f"singular Jacobian: {exc}") from exc
            if not np.all(np.isfinite(delta)):
                raise NewtonFailure("non-finite Newton update")
            lam = 1.0
            while True:
                w_try = np.maximum(w + lam * delta, 0.0)
                res_try, rho_try = self.residual(w_try, rho_old, dt, m, eps, drift, sink, p)
                norm_try = np.linalg.norm(res_try)
                if norm_try < norm or (lam == 1.0 and norm_try <= norm):
                    break
                lam *= 0.5
                if lam < 1e-8:
                    if np.max(np.abs(res)) <= ctrl.newton_tol:
                        # stalled at rounding level: accept
                        return rho, it + 1
                    raise NewtonFailure(
                        f"line search failed at iteration {it} (residual {norm:.3e})"
                    )
            w, res, rho, norm = w_try, res_try, rho_try, norm_try
        raise NewtonFailure(
            f"no convergence in {ctrl.newton_max_iter} iterations "
            f"(residual {np.sum(np.abs(res)):.3e})"
        )
