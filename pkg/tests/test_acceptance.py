"""End-to-end acceptance checks at desk scale (n=2, m=0.75, p=2 unless noted).

Each test prints one PASS/FAIL line with the measured quantity and its threshold.
"""

import math

import numpy as np
import pytest

from fastdiff import checks as ck
from fastdiff.functionals import eta_test_function, weak_residual
from fastdiff.grid import Field, build_grid, from_function, l1_distance, mass, resample
from fastdiff.params import ModelParams
from fastdiff.physical import run_physical
from fastdiff.profiles import rho_profile, solve_theta
from fastdiff.rates import fit_exponential, fit_power, gronwall_check
from fastdiff.rescaled import cross_check_physical_rescaled, run_rescaled
from fastdiff.scheme import StepControl
from fastdiff.trajectory import snapshot_grid

N, M_EXP = 2, 0.75
NEWTON_TOL = StepControl().newton_tol
THETA_M1 = (432.0 * math.pi) ** (1.0 / 3.0)


@pytest.fixture
def report(capsys):
    def _report(number, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return _report


def _gaussian(grid, M, width):
    f = from_function(grid, lambda r: np.exp(-((r / width) ** 2)))
    return f * (M / mass(f))


def _stationary(grid):
    params = ModelParams(N, M_EXP, 2.0, absorption_enabled=False)
    rho0 = rho_profile(THETA_M1, params, grid)
    traj = run_rescaled(rho0, 5.0, params, StepControl(dt_max=0.05), np.linspace(0.0, 5.0, 26))
    errs = [l1_distance(traj.field_at(i), rho0) for i in range(len(traj.times))]
    return traj, max(errs)


@pytest.fixture(scope="module")
def stationary_runs():
    grid = build_grid(N, 40.0, 2048, "geometric(1.002)")
    coarse = _stationary(grid)
    fine = _stationary(grid.refined())
    return coarse, fine


@pytest.fixture(scope="module")
def tracking_run():
    params = ModelParams(N, M_EXP, 2.0, absorption_enabled=False)
    grid = build_grid(N, 120.0, 2048, "geometric(1.002)")
    spec = solve_theta(1.0, params)
    traj = run_physical(spec.u(1.0, grid), 3.0, params, StepControl(dt_init=1e-4, dt_max=0.01),
                        np.linspace(0.0, 3.0, 13))
    errs = [l1_distance(traj.field_at(i), spec.u(1.0 + t, grid)) for i, t in enumerate(traj.times)]
    return traj, max(errs)


@pytest.fixture(scope="module")
def decay_run():
    params = ModelParams(N, M_EXP, 2.0)
    grid = build_grid(N, 6000.0, 2048, "geometric(1.004)")
    u0 = solve_theta(1.0, params).u(1.0, grid)
    return run_physical(u0, 1000.0, params, StepControl(dt_init=1e-4, dt_max=5.0),
                        snapshot_grid(1000.0, 60, "log"))


def _delta_half(epsilon=1e-8):
    params = ModelParams(N, M_EXP, 2.0, epsilon=epsilon)
    grid = build_grid(N, 50.0, 2048, "geometric(1.002)")
    rho0 = _gaussian(grid, 0.2, 3.07)
    return run_rescaled(rho0, 8.0, params, StepControl(dt_max=0.02), np.linspace(0.0, 8.0, 81))


@pytest.fixture(scope="module")
def delta_half_run():
    return _delta_half()


@pytest.fixture(scope="module")
def delta_one_run():
    params = ModelParams(N, M_EXP, 2.25)
    grid = build_grid(N, 30.0, 2048, "geometric(1.002)")
    rho0 = solve_theta(5.0, params, grid=grid).rho(grid)
    return run_rescaled(rho0, 8.0, params, StepControl(dt_max=0.02), np.linspace(0.0, 8.0, 81))


def _series(traj, key):
    return np.asarray(traj.times), traj.diag(key)


def _first_norms(traj):
    f = traj.field_at(0)
    vals = f.values
    return {"L1": mass(f), "L2": math.sqrt(float(np.sum(f.grid.volumes * vals**2))), "Linf": float(vals.max())}


def _steps(traj):
    return {k: traj.step_series(k) for k in traj.steps}


def test_01_stationarity(stationary_runs, report):
    (_, coarse), (_, fine) = stationary_runs
    ok = coarse <= 1e-3 and coarse / fine >= 2.0
    report(1, "stationarity", ok, f"sup L1 {coarse:.3e} <= 1e-3, refinement ratio {coarse / fine:.2f} >= 2")


def test_02_self_similar_tracking(tracking_run, report):
    _, err = tracking_run
    report(2, "self-similar tracking", err <= 5e-3, f"max L1 error {err:.3e} <= 5e-3")


def test_03_lr_contraction(stationary_runs, tracking_run, decay_run, delta_half_run, delta_one_run, report):
    trajs = [stationary_runs[0][0], stationary_runs[1][0], tracking_run[0], decay_run,
             delta_half_run, delta_one_run]
    worst = -math.inf
    violations = 0
    for traj in trajs:
        incs = ck.norm_increases(traj.kind, _steps(traj), N, _first_norms(traj))
        for v in incs.values():
            worst = max(worst, v)
            violations += v > 10.0 * NEWTON_TOL
    report(3, "L^r contraction", violations == 0,
           f"{violations} violations, worst per-step increase {worst:.2e} vs {10 * NEWTON_TOL:.0e}")


def test_04_decay_rate(decay_run, report):
    fit = fit_power(_series(decay_run, "Linf"), 1.5)
    ok = fit.slope <= -1.0 + 0.05 and abs(fit.slope + 4.0 / 3.0) <= 0.05
    report(4, "decay rate", ok, f"slope {fit.slope:.4f} <= -0.95 and within 0.05 of -4/3")


def test_05_mass_limit(delta_half_run, report):
    M = delta_half_run.diag("M")
    s = np.asarray(delta_half_run.times)
    st = _steps(delta_half_run)
    res = np.max(np.abs((st["mass"] - st["mass_old"]) / st["ds"] + st["sink"]))
    m6, m8 = M[np.argmin(abs(s - 6.0))], M[np.argmin(abs(s - 8.0))]
    ok = (np.all(np.diff(M) <= 0.0) and m8 > 0.0 and res <= 1e-6 * M[0]
          and abs(m8 - m6) <= 1e-3 * M[0])
    report(5, "mass limit", ok, f"ODE residual {res:.2e} <= {1e-6 * M[0]:.1e}, "
           f"|M(8)-M(6)|/M0 {abs(m8 - m6) / M[0]:.2e} <= 1e-3, M(8) {m8:.4f}")


def test_06_second_moment(delta_half_run, report):
    s = np.asarray(delta_half_run.times)
    mom = delta_half_run.diag("second_moment")
    ratio = mom[np.argmin(abs(s - 8.0))] / mom[np.argmin(abs(s - 2.0))]
    res = ck.moment_ode_residuals(_steps(delta_half_run), s, N).max()
    ok = 0.5 <= ratio <= 2.0 and res <= 1e-3
    report(6, "second moment", ok, f"ratio s=8/s=2 {ratio:.4f} in [0.5, 2], ODE residual {res:.2e} <= 1e-3")


def test_07_convergence_to_barenblatt(delta_half_run, report):
    l1 = fit_exponential(_series(delta_half_run, "L1_dist_to_profile"), window=(2.0, 8.0))
    er = fit_exponential(_series(delta_half_run, "E_rel"), window=(2.0, 8.0))
    ok = -l1.slope >= 0.45 and -er.slope >= 0.90
    report(7, "convergence to Barenblatt", ok, f"L1 rate {-l1.slope:.3f} >= 0.45, E_rel rate {-er.slope:.3f} >= 0.90")


def test_08_critical_log_case(delta_one_run, report):
    series = _series(delta_one_run, "L1_dist_to_profile")
    plain = fit_exponential(series)
    logfit = fit_exponential(series, with_log=True, log_power=1.0)
    ok = logfit.rms_residual <= plain.rms_residual and abs(logfit.slope + 1.0) <= 0.1
    report(8, "critical log case", ok,
           f"log rms {logfit.rms_residual:.3e} <= plain rms {plain.rms_residual:.3e}, "
           f"log slope {logfit.slope:.4f} within 0.1 of -1 (plain slope {plain.slope:.4f})")


def test_09_gronwall_chain(delta_half_run, report):
    res = gronwall_check(_series(delta_half_run, "E_rel"), 0.5)
    ok = not res.violations and math.isfinite(res.C_min)
    report(9, "Gronwall chain", ok, f"{len(res.violations)} violations, C_min {res.C_min:.3e}")


def test_10_relative_entropy_identity(delta_half_run, stationary_runs, report):
    worst_id = worst_ck = worst_up = -math.inf
    for traj in (delta_half_run, stationary_runs[0][0], stationary_runs[1][0]):
        D, E = traj.diag("D_bregman"), traj.diag("E_rel")
        worst_id = max(worst_id, float(np.max(np.abs(D - E) / np.maximum(np.abs(D), 1.0))))
        worst_ck = max(worst_ck, float(np.max(-traj.diag("ck_margin"))))
        worst_up = max(worst_up, float(np.max(E - traj.diag("upper"))))
    ok = worst_id <= 1e-6 and worst_ck <= 1e-6 and worst_up <= 1e-6
    report(10, "relative entropy identity", ok,
           f"|D-E_rel| {worst_id:.1e} <= 1e-6, -ck_margin {worst_ck:.1e} <= 1e-6, E_rel-upper {worst_up:.1e} <= 1e-6")


def test_11_inequality_suite(report):
    results = ck.inequality_checks(ModelParams(N, M_EXP, 2.0), np.random.default_rng(20261016))
    failed = [c.name for c in results if not c.passed]
    detail = ", ".join(f"{c.name}={c.value:.3g}" for c in results)
    report(11, "inequality suite", not failed, detail)


def _weak_run(cells, dt):
    params = ModelParams(N, M_EXP, 2.0)
    grid = build_grid(N, 60.0, 1024, "uniform")
    if cells == 2048:
        grid = grid.refined()
    u0 = solve_theta(1.0, params).u(1.0, grid)
    ctrl = StepControl(dt_init=dt, dt_max=dt, dt_min=dt / 4)
    traj = run_physical(u0, 1.0, params, ctrl, np.arange(0.0, 1.0 + dt / 2, dt))
    return weak_residual(traj, eta_test_function(3.75))


def test_12_weak_residual(report):
    coarse = _weak_run(1024, 0.05)
    fine = _weak_run(2048, 0.025)
    ratio = coarse / fine
    report(12, "weak-form residual", 1.6 <= ratio <= 2.4,
           f"residual {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3f} in [1.6, 2.4]")


def test_13_epsilon_and_cross_check(delta_half_run, report):
    other = _delta_half(epsilon=5e-9)
    diff = l1_distance(delta_half_run.field_at(-1), other.field_at(-1))
    params = ModelParams(N, M_EXP, 2.0)
    phys = build_grid(N, 130.0, 2048, "geometric(1.002)")
    resc = build_grid(N, 40.0, 2048, "geometric(1.002)")
    ctrl = StepControl(dt_init=1e-4, dt_max=0.002)
    rep = cross_check_physical_rescaled(_gaussian(phys, 1.0, 2.0), 3.0, params, ctrl, snapshots=7, rho_grid=resc)
    ok = diff <= 1e-4 and rep.max_l1 <= 1e-3
    report(13, "epsilon robustness and cross-check", ok,
           f"eps L1 diff {diff:.2e} <= 1e-4, cross-check {rep.max_l1:.2e} <= 1e-3")
