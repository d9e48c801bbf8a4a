"""Entropy functionals, divergences and the functional-inequality oracles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import Field, GridError, integrate, l1_distance, mass, second_moment
from .params import ModelParams
from .profiles import BarenblattSpec, rho_values

MASS_MATCH_RTOL = 1e-6
DENSITY_FLOOR = 1e-30


class FunctionalError(ValueError):
    pass


def _profile_values(g, grid, params) -> np.ndarray:
    if isinstance(g, BarenblattSpec):
        return rho_values(grid.centers, g.theta, params)
    if g.grid is not grid and not np.array_equal(g.grid.faces, grid.faces):
        raise GridError("fields live on different grids")
    return g.values


def entropy(rho: Field, params: ModelParams) -> float:
    """E = 1/(m-1) int rho^m + 1/2 int |y|^2 rho."""
    m = params.m
    return integrate(rho.grid, rho.values**m) / (m - 1.0) + 0.5 * second_moment(rho)


def bregman(f: Field, g, params: ModelParams) -> float:
    """Convexity gap D(f|g) of the density s -> s^m/(m-1).

    ``g`` is a Field (must be strictly positive) or a BarenblattSpec, in which
    case the profile is evaluated analytically on ``f``'s grid.
    """
    m = params.m
    gv = _profile_values(g, f.grid, params)
    if np.any(gv <= 0.0):
        raise FunctionalError("reference density must be strictly positive")
    fv = f.values
    integrand = (fv**m - gv**m - m * gv ** (m - 1.0) * (fv - gv)) / (m - 1.0)
    return integrate(f.grid, integrand)


def relative_entropy(f: Field, g, params: ModelParams) -> float:
    gv = _profile_values(g, f.grid, params)
    return entropy(f, params) - entropy(Field(f.grid, gv), params)


def ck_constant(g, params: ModelParams, M: float, grid=None) -> float:
    """c_{m,g} = M^((m-2)/2) (2/m int g^(2-m))^(1/2)."""
    m = params.m
    if grid is None:
        if isinstance(g, BarenblattSpec):
            raise FunctionalError("a grid is needed to integrate a BarenblattSpec")
        grid = g.grid
    gv = _profile_values(g, grid, params)
    Mg = integrate(grid, gv)
    if abs(Mg - M) > MASS_MATCH_RTOL * abs(M):
        raise FunctionalError(f"mass of g ({Mg:.10g}) does not match M ({M:.10g})")
    return M ** ((m - 2.0) / 2.0) * math.sqrt(2.0 / m * integrate(grid, gv ** (2.0 - m)))


def ck_check(f: Field, g, params: ModelParams) -> float:
    """Slack c_{m,g} sqrt(D(f|g)) - ||f - g||_1 of the Csiszar-Kullback bound."""
    gv = _profile_values(g, f.grid, params)
    Mf = mass(f)
    Mg = integrate(f.grid, gv)
    if abs(Mf - Mg) > MASS_MATCH_RTOL * max(abs(Mf), abs(Mg)):
        raise FunctionalError(f"masses differ: {Mf:.10g} vs {Mg:.10g}")
    gfield = Field(f.grid, gv)
    c = ck_constant(gfield, params, Mg)
    D = max(bregman(f, gfield, params), 0.0)
    return c * math.sqrt(D) - l1_distance(f, gfield)


def entropy_potential(rho: np.ndarray, r: np.ndarray, params: ModelParams, floor=DENSITY_FLOOR):
    m = params.m
    return m / (m - 1.0) * np.maximum(rho, floor) ** (m - 1.0) + 0.5 * r**2


def dissipation(rho: Field, params: ModelParams, floor: float = DENSITY_FLOOR) -> float:
    """Entropy production int rho |grad(m/(m-1) rho^(m-1) + |y|^2/2)|^2.

    Face sum with the arithmetic-mean density and the dual-cell weight A_j d_j.
    Densities below ``floor`` are lifted to it inside the potential only.
    """
    grid = rho.grid
    if grid.cells < 2:
        return 0.0
    v = rho.values
    xi = entropy_potential(v, grid.centers, params, floor)
    d = grid.center_gaps
    grad = np.diff(xi) / d
    face_rho = 0.5 * (v[:-1] + v[1:])
    weight = grid.areas[1:-1] * d
    return float(np.sum(face_rho * grad**2 * weight))


def relative_entropy_upper(rho: Field, params: ModelParams, floor: float = DENSITY_FLOOR) -> float:
    """1/2 int f |m/(m-1) grad f^(m-1) + y|^2, the entropy-production upper bound."""
    return 0.5 * dissipation(rho, params, floor)


def absorption_entropy_terms(rho: Field, spec: BarenblattSpec, params: ModelParams, sink: float):
    """The two signed absorption contributions to the entropy balance.

    Returns (sink * int rho^p xi(rho), sink * int rho^p xi(rho_M)); the second
    equals -theta/2 * sink * int rho^p because xi(rho_M) is constant.
    """
    grid = rho.grid
    v = rho.values
    vp = v**params.p
    xi = entropy_potential(v, grid.centers, params)
    xi_M = entropy_potential(rho_values(grid.centers, spec.theta, params), grid.centers, params)
    return sink * integrate(grid, vp * xi), sink * integrate(grid, vp * xi_M)


@dataclass(frozen=True)
class EntropyReport:
    E: float
    E_rel: float
    D: float
    dissipation: float
    ck_constant: float
    ck_margin: float
    upper: float


def entropy_report(rho: Field, spec: BarenblattSpec, params: ModelParams) -> EntropyReport:
    grid = rho.grid
    g = Field(grid, rho_values(grid.centers, spec.theta, params))
    E = entropy(rho, params)
    E_rel = E - entropy(g, params)
    D = bregman(rho, g, params)
    diss = dissipation(rho, params)
    Mg = mass(g)
    c = ck_constant(g, params, Mg)
    margin = c * math.sqrt(max(D, 0.0)) - l1_distance(rho, g)
    return EntropyReport(E, E_rel, D, diss, c, margin, 0.5 * diss)


def shannon_sides(f: Field, params: ModelParams) -> tuple[float, float]:
    """(int f^m, ||f||_1^(m(1-sigma)) (int |y|^2 f)^(m sigma)) without the constant C(n)."""
    m, sigma = params.m, params.sigma
    lhs = integrate(f.grid, f.values**m)
    rhs = mass(f) ** (m * (1.0 - sigma)) * second_moment(f) ** (m * sigma)
    return lhs, rhs


def gradient_l2(f: Field) -> float:
    grid = f.grid
    if grid.cells < 2:
        return 0.0
    d = grid.center_gaps
    grad = np.diff(f.values) / d
    return math.sqrt(float(np.sum(grid.areas[1:-1] * d * grad**2)))


def nash_sides(f: Field) -> tuple[float, float]:
    """(||f||_2^(1+2/n), ||f||_1^(2/n) ||grad f||_2) without the constant C(n)."""
    n = f.grid.n
    l2 = math.sqrt(integrate(f.grid, f.values**2))
    return l2 ** (1.0 + 2.0 / n), mass(f) ** (2.0 / n) * gradient_l2(f)


def dilate(f: Field, c: float) -> Field:
    """f_c(y) = c^n f(c y), represented exactly on the grid shrunk by 1/c."""
    return Field(f.grid.scaled(1.0 / c), f.values * c**f.grid.n)


def elementary_inequality(a, b, r):
    """Slack of |a^r - b^r| <= 2^(r-1) r (a^(r-1)+b^(r-1))|a-b| (r>1), <= |a-b|^r (r<=1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0) or np.any(r <= 0.0):
        raise ValueError("a, b and r must be positive")
    hi = np.maximum(a, b)
    x = np.minimum(a, b) / hi
    # both sides divided by hi^r, written with log1p/expm1 so that no
    # cancellation happens when x is near 0 or 1
    lhs = -np.expm1(r * np.log(x))
    big = 2.0 ** (r - 1.0) * r * (1.0 + x ** (r - 1.0)) * (1.0 - x)
    with np.errstate(divide="ignore"):
        small_minus_lhs = x**r + np.expm1(r * np.log1p(-x))
    out = hi**r * np.where(r > 1.0, big - lhs, small_minus_lhs)
    return out if out.ndim else float(out)


def cutoff_eta(x_norm, R: float):
    """1 on |x|<R, exp(1 - R/(2R-|x|)) on R<=|x|<2R, 0 beyond."""
    x = np.asarray(x_norm, dtype=float)
    out = np.zeros_like(x)
    out[x < R] = 1.0
    mid = (x >= R) & (x < 2.0 * R)
    out[mid] = np.exp(1.0 - R / (2.0 * R - x[mid]))
    return out if out.ndim else float(out)


def cutoff_eta_dr(x_norm, R: float):
    """Radial derivative of ``cutoff_eta`` (nonpositive)."""
    x = np.asarray(x_norm, dtype=float)
    out = np.zeros_like(x)
    mid = (x >= R) & (x < 2.0 * R)
    gap = 2.0 * R - x[mid]
    out[mid] = -R / gap**2 * np.exp(1.0 - R / gap)
    return out if out.ndim else float(out)


def cutoff_bound_ratio(R: float, a: float, sample_count: int = 20001) -> float:
    """sup over sampled |x| in [R, 2R) of |grad eta| a^2 R eta^(a-1)."""
    if not R > 0.0 or not 0.0 < a < 1.0:
        raise ValueError("need R > 0 and 0 < a < 1")
    # sample in z = R/(2R-|x|) in [1, inf); the sup sits at z = 2/a
    z = np.concatenate((np.linspace(1.0, 4.0 / a, sample_count), [2.0 / a]))
    x = 2.0 * R - R / z
    eta = cutoff_eta(x, R)
    grad = np.abs(cutoff_eta_dr(x, R))
    ok = eta > 0.0
    return float(np.max(grad[ok] * a * a * R * eta[ok] ** (a - 1.0)))


@dataclass(frozen=True)
class RadialTestFunction:
    """Smooth compactly supported radial test function phi(r, t)."""

    value: Callable
    dr: Callable
    dt: Callable
    support: float


def eta_test_function(R: float) -> RadialTestFunction:
    zero = lambda r, t: np.zeros_like(np.asarray(r, dtype=float))  # noqa: E731
    return RadialTestFunction(
        value=lambda r, t: cutoff_eta(r, R),
        dr=lambda r, t: cutoff_eta_dr(r, R),
        dt=zero,
        support=2.0 * R,
    )


def weak_residual(trajectory, test_fn: RadialTestFunction) -> float:
    """|LHS - RHS| of the weak formulation tested against ``test_fn``.

    Space integrals use the cell quadrature (face midpoint rule for the
    gradient pairing); time integrals use the trapezoid rule over snapshots.
    """
    grid = trajectory.grid
    if test_fn.support > grid.R_max:
        raise FunctionalError(
            f"test function support {test_fn.support:g} exceeds grid radius {grid.R_max:g}"
        )
    params = trajectory.params
    m, p = params.m, params.p
    times = np.asarray(trajectory.times, dtype=float)
    r = grid.centers
    f = grid.faces[1:-1]
    d = grid.center_gaps
    pair_w = grid.areas[1:-1]
    sink = 1.0 if params.absorption_enabled else 0.0

    integrand = np.empty(times.size)
    for k, (t, u) in enumerate(zip(times, trajectory.fields)):
        w = u**m
        grad_pair = np.sum(pair_w * np.diff(w) * test_fn.dr(f, t))
        integrand[k] = (
            np.dot(grid.volumes, u * test_fn.dt(r, t))
            - grad_pair
            - sink * np.dot(grid.volumes, u**p * test_fn.value(r, t))
        )
    lhs = np.dot(grid.volumes, trajectory.fields[-1] * test_fn.value(r, times[-1])) - np.dot(
        grid.volumes, trajectory.fields[0] * test_fn.value(r, times[0])
    )
    rhs = float(np.trapezoid(integrand, times)) if times.size > 1 else 0.0
    return abs(float(lhs) - rhs)


def write_inequality_csv(rows, path) -> Path:
    """rows: iterable of (check_name, samples, worst_margin, passed)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# fastdiff-inequalities v1\n")
        writer = csv.writer(fh)
        writer.writerow(["check_name", "samples", "worst_margin", "pass"])
        for name, samples, worst, passed in rows:
            writer.writerow([name, samples, repr(float(worst)), bool(passed)])
    return path
