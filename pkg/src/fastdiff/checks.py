"""Pass/fail checks over finished runs, grouped into the suites run by ``verify``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import functionals as fn
from .grid import Field, build_grid
from .params import ModelParams
from .profiles import rho_values
from .rates import RateError, fit_exponential, fit_power, gronwall_check, theorem_rates

SUITES = ("decay", "convergence", "inequalities", "odes", "cross-check")

NORM_SLACK = 10.0          # multiples of newton_tol allowed per step
MASS_ODE_TOL = 1e-6        # relative to M(0), per step
MOMENT_ODE_TOL = 1e-3      # relative, per snapshot interval
DECAY_TOL = 0.05
L1_RATE_TOL = 0.05
EREL_RATE_TOL = 0.10
LOG_SLOPE_TOL = 0.10
IDENTITY_TOL = 1e-6
DILATION_TOL = 1e-8
CROSS_TOL = 1e-3


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool


def write_checks_csv(checks, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# fastdiff-verify v1\n")
        writer = csv.writer(fh)
        writer.writerow(["suite", "check", "value", "threshold", "pass"])
        for c in checks:
            writer.writerow([c.suite, c.name, repr(float(c.value)), repr(float(c.threshold)), bool(c.passed)])
    return path


def _le(suite, name, value, threshold) -> Check:
    value = float(value)
    return Check(suite, name, value, threshold, bool(np.isfinite(value) and value <= threshold))


def u_norm_factor(s, n: int, r: float):
    """||u||_r = factor * ||rho||_r at similarity time s."""
    power = 1.0 if math.isinf(r) else (r - 1.0) / r
    return np.exp(-n * power * np.asarray(s, dtype=float))


def norm_increases(kind: str, steps: dict, n: int, first: dict) -> dict:
    """Largest per-step increase of ||u||_1, ||u||_2, ||u||_inf.

    ``first`` holds the norms of the initial data (keys L1, L2, Linf), needed
    for the first step's L2/Linf comparison.
    """
    tkey = "t" if kind == "physical" else "s"
    t_new = steps[tkey]
    t_old = t_new - steps["dt" if kind == "physical" else "ds"]
    out = {}
    for label, key, r in (("L1", "mass", 1.0), ("L2", "L2", 2.0), ("Linf", "Linf", math.inf)):
        new = steps[key]
        old = steps["mass_old"] if key == "mass" else np.concatenate(([first[label]], new[:-1]))
        if kind == "rescaled":
            new = new * u_norm_factor(t_new, n, r)
            old = old * u_norm_factor(t_old, n, r)
        out[label] = float(np.max(new - old)) if new.size else 0.0
    return out


def contraction_checks(kind, steps, n, first, newton_tol, suite="decay") -> list[Check]:
    incs = norm_increases(kind, steps, n, first)
    return [_le(suite, f"contraction_{k}", v, NORM_SLACK * newton_tol) for k, v in incs.items()]


def decay_checks(params: ModelParams, diag: dict, window=None) -> list[Check]:
    """Fitted sup-norm decay against the strong-branch exponent (physical runs)."""
    rates = theorem_rates(params, math.inf)
    bound = -(rates.decay_strong or rates.decay)
    try:
        fit = fit_power((diag["t"], diag["Linf"]), params.lam, window)
        slope = fit.slope
    except RateError:
        slope = math.nan
    return [_le("decay", "linf_power_slope", slope, bound + DECAY_TOL)]


def convergence_checks(params: ModelParams, diag: dict, window=None) -> list[Check]:
    """Exponential convergence, Gronwall chain and entropy identities (rescaled runs)."""
    mu = min(1.0, params.delta)
    s = diag["s"]
    checks = []
    for name, key, bound in (("l1_exp_slope", "L1_dist_to_profile", -mu + L1_RATE_TOL),
                             ("erel_exp_slope", "E_rel", -2.0 * mu + EREL_RATE_TOL)):
        try:
            slope = fit_exponential((s, diag[key]), window).slope
        except RateError:
            slope = math.nan
        checks.append(_le("convergence", name, slope, bound))
    try:
        g = gronwall_check((s, np.maximum(diag["E_rel"], 0.0)), params.delta)
        checks.append(_le("convergence", "gronwall_violations", len(g.violations), 0))
        checks.append(_le("convergence", "gronwall_C_min", g.C_min, math.inf))
    except RateError:
        checks.append(_le("convergence", "gronwall_violations", math.nan, 0))
    if theorem_rates(params, 1.0).log_flag:
        try:
            plain = fit_exponential((s, diag["L1_dist_to_profile"]), window)
            logfit = fit_exponential((s, diag["L1_dist_to_profile"]), window, with_log=True, log_power=1.0)
            checks.append(_le("convergence", "log_fit_rms_minus_plain", logfit.rms_residual - plain.rms_residual, 0.0))
            checks.append(_le("convergence", "log_fit_slope_offset", abs(logfit.slope + 1.0), LOG_SLOPE_TOL))
        except RateError:
            checks.append(_le("convergence", "log_fit_slope_offset", math.nan, LOG_SLOPE_TOL))
    D, E_rel = diag["D_bregman"], diag["E_rel"]
    checks.append(_le("convergence", "identity_D_minus_Erel",
                      np.max(np.abs(D - E_rel) / np.maximum(np.abs(D), 1.0)), IDENTITY_TOL))
    checks.append(_le("convergence", "ck_margin_negative_part", np.max(-diag["ck_margin"]), IDENTITY_TOL))
    checks.append(_le("convergence", "erel_above_upper", np.max(E_rel - diag["upper"]), IDENTITY_TOL))
    return checks


def mass_checks(kind: str, diag: dict, steps: dict) -> list[Check]:
    mkey = "mass" if kind == "physical" else "M"
    M = diag[mkey]
    checks = [
        _le("odes", "mass_increase", np.max(np.diff(M)) if M.size > 1 else 0.0, 0.0),
        _le("odes", "mass_negative_part", np.max(-M), 0.0),
    ]
    dt = steps["dt" if kind == "physical" else "ds"]
    res = np.abs((steps["mass"] - steps["mass_old"]) / dt + steps["sink"])
    checks.append(_le("odes", "mass_ode_residual_rel", np.max(res) / M[0] if res.size else 0.0, MASS_ODE_TOL))
    return checks


def moment_ode_residuals(steps: dict, snapshot_s, n: int) -> np.ndarray:
    """Relative mismatch of d/ds int rho |y|^2 over each snapshot interval.

    The right-hand side 2n int rho^m - 2 int rho|y|^2 is completed by the
    vanishing-viscosity and absorption contributions, all at the new time level.
    """
    s, ds = steps["s"], steps["ds"]
    rhs = 2.0 * n * steps["int_rho_m"] - 2.0 * steps["moment"] + 2.0 * n * steps["eps_mass"] - steps["sink_moment"]
    out = []
    for a, b in zip(snapshot_s[:-1], snapshot_s[1:]):
        sel = (s > a + 1e-12) & (s <= b + 1e-12)
        if not sel.any():
            continue
        change = steps["moment"][sel][-1] - steps["moment_old"][sel][0]
        out.append(abs(change - np.sum(ds[sel] * rhs[sel])) / abs(steps["moment"][sel][-1]))
    return np.asarray(out)


def moment_checks(diag: dict, steps: dict, n: int) -> list[Check]:
    s = diag["s"]
    res = moment_ode_residuals(steps, s, n)
    checks = [_le("odes", "moment_ode_residual_rel", res.max() if res.size else 0.0, MOMENT_ODE_TOL)]
    mom = diag["second_moment"]
    if s[-1] >= 2.0:
        ref = float(np.interp(2.0, s, mom))
        ratio = max(mom[-1] / ref, ref / mom[-1])
        checks.append(_le("odes", "moment_ratio_end_vs_s2", ratio, 2.0))
    return checks


def inequality_checks(params: ModelParams, rng: np.random.Generator, samples: int = 100_000) -> list[Check]:
    checks = []
    a = np.exp(rng.uniform(math.log(1e-6), math.log(1e6), samples))
    b = np.exp(rng.uniform(math.log(1e-6), math.log(1e6), samples))
    r = rng.uniform(0.0, 8.0, samples)
    r[r == 0.0] = 0.5
    margin = fn.elementary_inequality(a, b, r)
    checks.append(_le("inequalities", "elementary_negative_part", max(-float(np.min(margin)), 0.0), 0.0))

    grid = build_grid(params.n, 1e3, 2048, ("geometric", 1.006))
    base = Field(grid, rho_values(grid.centers, 1.0, params))
    ratios = {"shannon": [], "nash": []}
    for c in (0.5, 1.0, 2.0, 4.0):
        f = fn.dilate(base, c)
        lhs, rhs = fn.shannon_sides(f, params)
        ratios["shannon"].append(lhs / rhs)
        lhs, rhs = fn.nash_sides(f)
        ratios["nash"].append(lhs / rhs)
    for name, vals in ratios.items():
        vals = np.asarray(vals)
        checks.append(_le("inequalities", f"{name}_dilation_spread", np.ptp(vals) / np.mean(vals), DILATION_TOL))

    sweep = {"shannon": [], "nash": []}
    for theta in np.geomspace(1e-2, 1e2, 9):
        f = Field(grid, rho_values(grid.centers, theta, params))
        lhs, rhs = fn.shannon_sides(f, params)
        sweep["shannon"].append(lhs / rhs)
        lhs, rhs = fn.nash_sides(f)
        sweep["nash"].append(lhs / rhs)
    for name, vals in sweep.items():
        vals = np.asarray(vals)
        spread = vals.max() / vals.min() if vals.min() > 0.0 else math.inf
        checks.append(_le("inequalities", f"{name}_theta_sweep_max_over_min", spread, 2.0))

    worst = max(fn.cutoff_bound_ratio(R, a_) for R in (1.0, 10.0, 100.0)
                for a_ in np.round(np.arange(0.1, 0.95, 0.1), 10))
    # sup over x of the ratio is 4 e^(a-2) <= 4/e
    checks.append(_le("inequalities", "cutoff_ratio_sup", worst, 4.0 / math.e * (1.0 + 1e-9)))
    return checks


def inequality_rows(checks) -> list:
    """Rows for the inequality CSV: (check_name, samples, worst_margin, pass)."""
    counts = {"elementary_negative_part": 100_000}
    return [(c.name, counts.get(c.name, 1), c.threshold - c.value, c.passed) for c in checks]
