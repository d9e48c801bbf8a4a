"""Barenblatt profiles, mass matching and the similarity change of variables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as spi

from .grid import Field, RadialGrid, sphere_area
from .params import ModelParams, classify_regime

THETA_BRACKET = (1e-6, 1e6)
MASS_RTOL = 1e-10


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class BarenblattSpec:
    params: ModelParams
    M: float
    theta: float
    beta: float
    residual: float = 0.0

    def record(self) -> dict:
        return {"M": self.M, "theta": self.theta, "beta": self.beta, "residual": self.residual}

    def rho(self, grid: RadialGrid) -> Field:
        return rho_profile(self.theta, self.params, grid)

    def u(self, t: float, grid: RadialGrid) -> Field:
        return u_profile(self.beta, self.params, t, grid)


def beta_of_theta(theta: float, params: ModelParams) -> float:
    return theta * params.lam ** (2.0 / params.lam)


def theta_of_beta(beta: float, params: ModelParams) -> float:
    return beta * params.lam ** (-2.0 / params.lam)


def rho_values(r, theta: float, params: ModelParams) -> np.ndarray:
    return (params.gamma / (np.asarray(r, dtype=float) ** 2 + theta)) ** params.k


def u_values(x, beta: float, params: ModelParams, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (params.alpha * t / (x**2 + beta * t ** (2.0 / params.lam))) ** params.k


def rho_profile(theta: float, params: ModelParams, grid: RadialGrid) -> Field:
    """Stationary profile (gamma / (|y|^2 + theta))^(1/(1-m)) at the cell centers."""
    if not theta > 0.0:
        raise ProfileError(f"theta must be positive, got {theta}")
    _require_barenblatt(params)
    return Field(grid, rho_values(grid.centers, theta, params))


def u_profile(beta: float, params: ModelParams, t: float, grid: RadialGrid) -> Field:
    """Self-similar solution of the pure fast diffusion equation at time ``t``."""
    if not beta > 0.0:
        raise ProfileError(f"beta must be positive, got {beta}")
    if not t > 0.0:
        raise ProfileError(f"profile time must be positive, got {t}")
    return Field(grid, u_values(grid.centers, beta, params, t))


def _require_barenblatt(params: ModelParams):
    if not classify_regime(params).barenblatt_ok:
        raise ProfileError(
            f"profile mass is infinite for m <= (n-2)/n (n={params.n}, m={params.m})"
        )


def _tail_bound(R: float, params: ModelParams) -> float:
    # integral over |y| > R of gamma^k |y|^(-2k), which dominates the profile there
    n, k = params.n, params.k
    return sphere_area(n) * params.gamma**k * R ** (n - 2.0 * k) / (2.0 * k - n)


def mass_of_theta(theta: float, params: ModelParams, rtol: float = 1e-13) -> float:
    """Total mass of the stationary profile on all of R^n.

    Adaptive quadrature on [0, R_q] plus the closed-form power-law tail beyond
    R_q; R_q grows until the tail is below 1e-12 of the running estimate.
    """
    if not theta > 0.0:
        raise ProfileError(f"theta must be positive, got {theta}")
    _require_barenblatt(params)
    n, k, gamma = params.n, params.k, params.gamma
    omega = sphere_area(n)

    def density(r):
        return r ** (n - 1) * (gamma / (r * r + theta)) ** k

    scale = math.sqrt(theta)
    edges = [0.0, scale]
    core = 0.0
    while True:
        a, b = edges[-2], edges[-1]
        part, _ = spi.quad(density, a, b, epsabs=0.0, epsrel=rtol, limit=200)
        core += omega * part
        tail = _tail_bound(b, params)
        if tail < 1e-12 * core:
            return core + tail
        edges.append(4.0 * b)


def mass_of_theta_on_grid(theta: float, params: ModelParams, grid: RadialGrid) -> float:
    return float(np.dot(rho_values(grid.centers, theta, params), grid.volumes))


def solve_theta(
    M: float,
    params: ModelParams,
    grid: RadialGrid | None = None,
    guess: float | None = None,
    rtol: float = MASS_RTOL,
) -> BarenblattSpec:
    """Find theta with mass(rho_theta) == M by bisection in log(theta).

    With ``grid`` given the mass is the grid quadrature of the sampled profile,
    so the matched profile carries exactly the same discrete mass as a field
    on that grid.
    """
    if not M > 0.0:
        raise ProfileError(f"target mass must be positive, got {M}")
    _require_barenblatt(params)
    if grid is None:
        mass_fn = lambda th: mass_of_theta(th, params)  # noqa: E731
    else:
        mass_fn = lambda th: mass_of_theta_on_grid(th, params, grid)  # noqa: E731

    if guess is not None and guess > 0.0:
        lo, hi = guess / 4.0, guess * 4.0
    else:
        lo, hi = THETA_BRACKET
    # mass decreases in theta: need mass(lo) > M > mass(hi)
    for _ in range(200):
        if mass_fn(lo) > M:
            break
        lo /= 16.0
    else:
        raise ProfileError(f"could not bracket theta for M={M}: mass too small at theta={lo:g}")
    for _ in range(200):
        if mass_fn(hi) < M:
            break
        hi *= 16.0
    else:
        raise ProfileError(f"could not bracket theta for M={M}: mass too large at theta={hi:g}")

    a, b = math.log(lo), math.log(hi)
    for _ in range(400):
        mid = 0.5 * (a + b)
        if mass_fn(math.exp(mid)) > M:
            a = mid
        else:
            b = mid
        if b - a < 1e-15:
            break
    theta = math.exp(0.5 * (a + b))
    residual = abs(mass_fn(theta) - M) / M
    if residual > rtol:
        raise ProfileError(f"mass matching stalled: relative residual {residual:.3e}")
    return BarenblattSpec(params, M, theta, beta_of_theta(theta, params), residual)


def s_of_t(t, lam: float):
    return np.log1p(lam * np.asarray(t, dtype=float)) / lam


def t_of_s(s, lam: float):
    return np.expm1(lam * np.asarray(s, dtype=float)) / lam


def scale_factor(t, lam: float):
    """R(t) = (1 + lam t)^(1/lam)."""
    return np.exp(s_of_t(t, lam))


def rescale_u_to_rho(u: Field, t: float, params: ModelParams) -> tuple[Field, float]:
    """Similarity variables: y = x / R(t), rho = R(t)^n u, s = ln(1 + lam t) / lam."""
    if t < 0.0:
        raise ProfileError("time must be nonnegative")
    R = float(scale_factor(t, params.lam))
    grid = u.grid.scaled(1.0 / R) if R != 1.0 else u.grid
    return Field(grid, u.values * R**params.n), float(s_of_t(t, params.lam))


def rescale_rho_to_u(rho: Field, s: float, params: ModelParams) -> tuple[Field, float]:
    if s < 0.0:
        raise ProfileError("rescaled time must be nonnegative")
    R = math.exp(s)
    grid = rho.grid.scaled(R) if R != 1.0 else rho.grid
    return Field(grid, rho.values * R ** (-params.n)), float(t_of_s(s, params.lam))
