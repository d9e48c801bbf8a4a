"""Rate fits on diagnostic series and the exponents they are compared against."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import ModelParams, classify_regime

MODELS = ("power-in-(1+λt)", "exponential-in-s", "exp-with-log-factor")
MIN_POINTS = 8


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    model: str
    slope: float
    intercept: float
    window: tuple
    rms_residual: float
    points: int

    def __post_init__(self):
        if self.model not in MODELS:
            raise RateError(f"unknown model {self.model!r}")
        if not self.window[1] > self.window[0]:
            raise RateError("degenerate fit window")


@dataclass(frozen=True)
class TheoremRates:
    decay: float
    decay_strong: float | None
    convergence: float
    log_flag: bool


def theorem_rates(params: ModelParams, r: float) -> TheoremRates:
    """Predicted decay exponents (positive numbers) for the L^r norm.

    decay_*: ||u(t)||_r <~ (1+t)^(-exponent); convergence: ||u - U_M||_r <~ (1+lam t)^(-exponent),
    with an extra ln(1+lam t) factor when log_flag is set.
    """
    if not r >= 1.0:
        raise RateError("r must be in [1, inf]")
    n, m, p = params.n, params.m, params.p
    frac = 1.0 if math.isinf(r) else (r - 1.0) / r
    weak = frac / (p - 1.0)
    strong = None
    if r >= 3.0 - m:
        strong = max(weak, n * frac / (2.0 * (2.0 - m)))
    mu = min(1.0, params.delta)
    if math.isinf(r):
        conv = n / params.lam
    else:
        conv = (n * (r - 1.0) + mu) / (params.lam * r)
    return TheoremRates(weak, strong, conv, classify_regime(params).log_critical)


def _series(series):
    x, v = (np.asarray(a, dtype=float) for a in series)
    if x.shape != v.shape or x.ndim != 1:
        raise RateError("series must be two 1-d arrays of equal length")
    return x, v


def default_window(x) -> tuple:
    """Last half of the span, minus the final 5%."""
    x0, x1 = float(x[0]), float(x[-1])
    span = x1 - x0
    return (x0 + 0.5 * span, x0 + 0.95 * span)


def _least_squares(x, y, model, window, shown_window):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return RateFit(model, float(coef[0]), float(coef[1]), shown_window, rms, int(x.size))


def _select(x, v, window):
    lo, hi = window
    sel = (x >= lo - 1e-12 * max(1.0, abs(lo))) & (x <= hi + 1e-12 * max(1.0, abs(hi)))
    if sel.sum() < MIN_POINTS:
        raise RateError(f"fit window {window} holds {int(sel.sum())} points, need {MIN_POINTS}")
    if np.any(v[sel] <= 0.0) or not np.all(np.isfinite(v[sel])):
        raise RateError("fitted values must be positive and finite")
    return sel


def fit_power(series, lam: float, window=None) -> RateFit:
    """Slope of ln v against ln(1 + lam t); ``window`` is in t."""
    t, v = _series(series)
    tau = np.log1p(lam * t)
    if window is None:
        lo, hi = default_window(tau)
        window = (math.expm1(lo) / lam, math.expm1(hi) / lam)
    sel = _select(t, v, window)
    return _least_squares(tau[sel], np.log(v[sel]), MODELS[0], window, tuple(window))


def fit_exponential(series, window=None, with_log: bool = False, log_power: float = 2.0) -> RateFit:
    """Slope of ln v against s, after removing log_power*ln(1+s) when ``with_log``."""
    s, v = _series(series)
    if window is None:
        window = default_window(s)
    sel = _select(s, v, window)
    y = np.log(v[sel])
    if with_log:
        y = y - log_power * np.log1p(s[sel])
    model = MODELS[2] if with_log else MODELS[1]
    return _least_squares(s[sel], y, model, window, tuple(window))


@dataclass(frozen=True)
class GronwallResult:
    C_min: float
    violations: list
    required: np.ndarray


def gronwall_check(series, delta: float, growth_tol: float | None = None) -> GronwallResult:
    """Smallest C with d/ds(e^s sqrt(E)) <= C e^((1-delta)s) on every interval.

    Each interval [s_k, s_k+1] demands C_k = max(0, g_k+1 - g_k) / int e^((1-delta)s) ds,
    g = e^s sqrt(E) (a centered difference at the interval midpoint). An interval
    starting at E = 0 restarts the inequality there, which the local form does
    automatically; demands at rounding level are treated as zero.

    A sampled series always admits some C, so "no finite C" is read as the
    demand still growing exponentially over the second half of the series
    (faster than e^(growth_tol s), default growth_tol = min(1, delta)/2). Then
    every second-half interval whose demand exceeds all first-half demands is
    reported as a violation.
    """
    s, E = _series(series)
    if np.any(E < 0.0):
        raise RateError("entropy values must be nonnegative")
    if np.any(np.diff(s) <= 0.0):
        raise RateError("s must be strictly increasing")
    if s.size < 3:
        raise RateError("need at least three points")
    if growth_tol is None:
        growth_tol = 0.5 * min(1.0, delta)
    g = np.exp(s) * np.sqrt(E)
    a = 1.0 - delta
    if abs(a) < 1e-14:
        integral = np.diff(s)
    else:
        integral = (np.exp(a * s[1:]) - np.exp(a * s[:-1])) / a
    rise = np.diff(g)
    rise[rise <= 1e-12 * max(float(g.max()), 1e-300)] = 0.0
    need = rise / integral
    half = need.size // 2
    tail = np.arange(half, need.size)
    pos = tail[need[tail] > 0.0]
    violations = []
    if pos.size >= 3:
        mid = 0.5 * (s[pos] + s[pos + 1])
        growth = np.polyfit(mid, np.log(need[pos]), 1)[0]
        if growth > growth_tol:
            head = float(need[:half].max()) if half else 0.0
            violations = [(float(s[k]), float(s[k + 1])) for k in pos if need[k] > head]
    return GronwallResult(float(need.max()), violations, need)


@dataclass(frozen=True)
class RateRow:
    quantity: str
    model: str
    fitted_slope: float
    theorem_slope: float
    passed: bool


def one_sided(fit: RateFit, theorem_slope: float, tol: float) -> bool:
    """Decay at least as fast as the bound (slopes are negative), up to ``tol``."""
    return fit.slope <= theorem_slope + tol


def write_rates_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# fastdiff-rates v1\n")
        writer = csv.writer(fh)
        writer.writerow(["quantity", "model", "fitted_slope", "theorem_slope", "pass"])
        for row in rows:
            writer.writerow([row.quantity, row.model, repr(float(row.fitted_slope)),
                             repr(float(row.theorem_slope)), bool(row.passed)])
    return path
