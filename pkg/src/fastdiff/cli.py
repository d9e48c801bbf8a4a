"""Command line entry point: ``fastdiff {profile,simulate,verify,sweep,report} CONFIG``.

Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks as ck
from . import config as cf
from .functionals import write_inequality_csv
from .grid import write_field_csv
from .params import classify_regime
from .physical import run_physical
from .profiles import solve_theta, t_of_s
from .rates import RateError, RateRow, fit_exponential, fit_power, theorem_rates, write_rates_csv
from .rescaled import cross_check_physical_rescaled, run_rescaled
from .scheme import SolverFailure
from .trajectory import read_diagnostics, read_steps

log = logging.getLogger("fastdiff")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class RunError(RuntimeError):
    """A solver failure surfaced to the command line."""


def _outdir(cfg) -> Path:
    out = Path(cfg.get("outdir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_profile(cfg) -> int:
    params = cf.build_params(cfg)
    grid = cf.build_grid_from(cfg)
    M = cf.profile_mass(cfg)
    try:
        spec = solve_theta(M, params)
    except ValueError as exc:
        raise cf.ConfigError(str(exc)) from exc
    out = _outdir(cfg)
    record = dict(spec.record(), n=params.n, m=params.m, lam=params.lam)
    (out / "profile.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    write_field_csv(spec.rho(grid), out / "rho_profile.csv", M=M, theta=spec.theta)
    write_field_csv(spec.u(1.0, grid), out / "u_profile.csv", M=M, beta=spec.beta, t=1.0)
    print(f"M={M:.12g} theta={spec.theta:.12g} beta={spec.beta:.12g}")
    return EXIT_OK


def simulate(cfg):
    """Run the configured solver; returns the trajectory (not written)."""
    params = cf.build_params(cfg)
    grid = cf.build_grid_from(cfg)
    ctrl = cf.build_control(cfg)
    kind = cf.solver_kind(cfg)
    t_end = cf.end_time(cfg)
    times = cf.snapshot_times(cfg)
    init = cf.initial_field(cfg, params, grid)
    try:
        if kind == "physical":
            return run_physical(init, t_end, params, ctrl, times)
        return run_rescaled(init, t_end, params, ctrl, times)
    except SolverFailure as exc:
        key = "t" if kind == "physical" else "s"
        raise RunError(f"solver failure, last good {key}={exc.time:.9g}: {exc}") from exc


def cmd_simulate(cfg) -> int:
    traj = simulate(cfg)
    out = _outdir(cfg)
    traj.write(out)
    (out / "config.txt").write_text("".join(f"{k}={v}\n" for k, v in sorted(cfg.values.items())))
    print(f"{traj.kind} run: {len(traj.times)} snapshots, {len(traj.steps.get('newton_iters', []))} steps -> {out}")
    return EXIT_OK


def _load_run(cfg):
    out = Path(cfg.get("outdir"))
    diag_path, steps_path = out / "diagnostics.csv", out / "steps.csv"
    for path in (diag_path, steps_path):
        if not path.exists():
            raise cf.ConfigError(f"missing trajectory file {path} (run 'simulate' first)")
    kind, diag = read_diagnostics(diag_path)
    _, steps = read_steps(steps_path)
    return kind, diag, steps


def _first_norms(kind, diag):
    if kind == "physical":
        return {"L1": diag["L1"][0], "L2": diag["L2"][0], "Linf": diag["Linf"][0]}
    return {"L1": diag["M"][0], "L2": diag["L2"][0], "Linf": diag["linf"][0]}


def run_checks(cfg, suites) -> list:
    params = cf.build_params(cfg)
    window = cf.fit_window(cfg)
    results = []
    needs_run = [s for s in suites if s in ("decay", "convergence", "odes")]
    if needs_run:
        kind, diag, steps = _load_run(cfg)
    for suite in suites:
        if suite == "decay":
            results += ck.contraction_checks(kind, steps, params.n, _first_norms(kind, diag), cf.build_control(cfg).newton_tol)
            if kind == "physical":
                results += ck.decay_checks(params, diag, window)
        elif suite == "convergence":
            if kind != "rescaled":
                raise cf.ConfigError("the convergence suite needs a rescaled run")
            results += ck.convergence_checks(params, diag, window)
        elif suite == "odes":
            results += ck.mass_checks(kind, diag, steps)
            if kind == "rescaled":
                results += ck.moment_checks(diag, steps, params.n)
        elif suite == "inequalities":
            ineq = ck.inequality_checks(params, cf.rng(cfg))
            write_inequality_csv(ck.inequality_rows(ineq), _outdir(cfg) / "inequalities.csv")
            results += ineq
        elif suite == "cross-check":
            results.append(_cross_check(cfg, params))
        else:
            raise cf.ConfigError(f"unknown suite {suite!r} (choose from {', '.join(ck.SUITES)})")
    return results


def _cross_check(cfg, params):
    grid = cf.build_grid_from(cfg)
    if cfg.has("t_end"):
        t_end = cfg.float("t_end")
    elif cfg.has("s_end"):
        t_end = t_of_s(cfg.float("s_end"), params.lam)
    else:
        raise cf.ConfigError("cross-check needs t_end or s_end")
    R = (1.0 + params.lam * t_end) ** (1.0 / params.lam)
    phys_grid = grid.scaled(R)
    u0 = cf.initial_field(cfg, params, phys_grid)
    ctrl = cf.build_control(cfg)
    try:
        rep = cross_check_physical_rescaled(u0, t_end, params, ctrl, snapshots=7, rho_grid=grid)
    except SolverFailure as exc:
        raise RunError(f"solver failure during cross-check at time {exc.time:.9g}: {exc}") from exc
    return ck._le("cross-check", "physical_vs_rescaled_l1", rep.max_l1, ck.CROSS_TOL)


def cmd_verify(cfg) -> int:
    suites = [s.strip() for s in cfg.get("suite").split(",") if s.strip()]
    results = run_checks(cfg, suites)
    path = ck.write_checks_csv(results, _outdir(cfg) / "verify.csv")
    for c in results:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.suite:12s} {c.name:32s} {c.value:.4g} (<= {c.threshold:.4g})")
    failed = sum(not c.passed for c in results)
    print(f"{len(results) - failed}/{len(results)} checks passed -> {path}")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def rate_rows(params, kind, diag, window=None) -> list:
    rows = []
    if kind == "physical":
        rates = theorem_rates(params, math.inf)
        bound = -(rates.decay_strong or rates.decay)
        try:
            fit = fit_power((diag["t"], diag["Linf"]), params.lam, window)
            rows.append(RateRow("Linf", fit.model, fit.slope, bound, fit.slope <= bound + ck.DECAY_TOL))
        except RateError as exc:
            log.warning("Linf fit skipped: %s", exc)
        return rows
    conv = theorem_rates(params, 1.0).convergence
    mu = min(1.0, params.delta)
    for name, key, thm, tol, scale in (
        ("L1_dist_to_profile", "L1_dist_to_profile", -conv, ck.L1_RATE_TOL / params.lam, 1.0 / params.lam),
        ("E_rel", "E_rel", -2.0 * mu, ck.EREL_RATE_TOL, 1.0),
    ):
        try:
            fit = fit_exponential((diag["s"], diag[key]), window)
        except RateError as exc:
            log.warning("%s fit skipped: %s", name, exc)
            continue
        # the L1 distance is invariant under the similarity map, so e^(-a s) = (1+lam t)^(-a/lam)
        model = "power-in-(1+λt)" if scale != 1.0 else fit.model
        slope = fit.slope * scale
        rows.append(RateRow(name, model, slope, thm, slope <= thm + tol))
    return rows


def cmd_report(cfg) -> int:
    params = cf.build_params(cfg)
    kind, diag, _ = _load_run(cfg)
    rows = rate_rows(params, kind, diag, cf.fit_window(cfg))
    path = write_rates_csv(rows, _outdir(cfg) / "rates.csv")
    reg = classify_regime(params)
    print(f"lam={params.lam:.6g} delta={params.delta:.6g} log_critical={reg.log_critical}")
    for r in rows:
        print(f"{r.quantity:20s} {r.model:22s} fitted {r.fitted_slope:+.4f} theorem {r.theorem_slope:+.4f} "
              f"{'pass' if r.passed else 'FAIL'}")
    print(f"-> {path}")
    return EXIT_OK


def _sweep_point(args):
    values, source, index = args
    cfg = cf.Config(values, source)
    params = cf.build_params(cfg)
    row = {"point": index, "delta": params.delta}
    try:
        traj = simulate(cfg)
        traj.write(cfg.get("outdir"), fields=False)
        rates = rate_rows(params, traj.kind, {k: np.asarray(v, float) for k, v in traj.diagnostics.items()},
                          cf.fit_window(cfg))
        row["status"] = "ok"
        row["rates"] = [(r.quantity, r.model, r.fitted_slope, r.theorem_slope, r.passed) for r in rates]
    except (RunError, cf.ConfigError) as exc:
        row["status"] = "failed"
        row["error"] = str(exc)
        row["rates"] = []
    return row


def cmd_sweep(cfg) -> int:
    points = cf.sweep_points(cfg)
    if not points:
        log.warning("empty sweep: nothing to do")
        return EXIT_OK
    out = _outdir(cfg)
    jobs = []
    for i, pt in enumerate(points):
        sub = cfg.with_(**pt, outdir=str(out / f"point_{i:03d}"))
        sub.values.pop("sweep", None)
        cf.build_params(sub)
        jobs.append((sub.values, cfg.source, i))
    workers = max(1, cfg.int("workers"))
    if workers == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    keys = sorted({k for pt in points for k in pt})
    failed, check_fail = [], False
    with (out / "sweep.csv").open("w", newline="") as fh:
        fh.write("# fastdiff-sweep v1\n")
        writer = csv.writer(fh)
        writer.writerow(["point", *keys, "delta", "quantity", "model", "fitted_slope", "theorem_slope", "pass", "status"])
        for pt, row in zip(points, rows):
            head = [row["point"], *(pt.get(k, "") for k in keys), repr(float(row["delta"]))]
            if row["status"] != "ok":
                failed.append(row)
                writer.writerow(head + ["", "", "", "", "", row["status"]])
                continue
            if not row["rates"]:
                writer.writerow(head + ["", "", "", "", "", "no-fit"])
            for q, model, slope, thm, ok in row["rates"]:
                check_fail |= not ok
                writer.writerow(head + [q, model, repr(float(slope)), repr(float(thm)), bool(ok), "ok"])
    if failed:
        with (out / "failures.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["point", "error"])
            for row in failed:
                writer.writerow([row["point"], row["error"]])
    print(f"sweep: {len(points)} points, {len(failed)} failed -> {out / 'sweep.csv'}")
    if failed:
        return EXIT_SOLVER
    return EXIT_CHECK if check_fail else EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fastdiff", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="key=value configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cf.load_config(args.config)
        for item in args.set:
            key, sep, value = (part.strip() for part in item.partition("="))
            if not sep or key not in cf.KNOWN or not value:
                raise cf.ConfigError(f"--set {item!r}: expected a known KEY=VALUE")
            cfg = cfg.with_(**{key: value})
        return COMMANDS[args.command](cfg)
    except cf.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
