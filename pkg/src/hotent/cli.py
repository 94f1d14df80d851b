"""Command-line front end.

Commands: simulate, boundary, equilibrium, exponent, oracle-compare, units.
Every command writes its table (CSV or JSON) and a summary JSON into
``--out``. Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import MODES, load_config
from .dynamics import damped_growth, evolve_full, steady_state
from .errors import ConfigError, DivergenceError, DomainError, HotentError, OracleMismatch
from .floquet import floquet_exponent
from .scan import (Axis, ScanSpec, analytic_boundary, boundary_scan, equilibrium_boundary,
                   equilibrium_diagram, exponent_map)
from .units import UnitContext, convert
from .validation import oracle_triangle

COV_LABELS = ("Q1", "Q2", "P1", "P2")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_table(path: Path, header: list, rows: list, fmt: str) -> Path:
    """Write rows as CSV (17 significant digits) or as a JSON list of records."""
    if fmt == "json":
        path = path.with_suffix(".json")
        records = [dict(zip(header, r)) for r in rows]
        path.write_text(json.dumps(_clean(records), indent=2) + "\n")
        return path
    path = path.with_suffix(".csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_json(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    return path


def floquet_summary(config) -> dict:
    out = {}
    for mode in MODES:
        fe = floquet_exponent(config, mode)
        out[mode] = {"mu_real": fe.mu.real, "mu_imag": fe.mu.imag,
                     "growth_rate": fe.growth_rate, "stable": fe.stable}
    out["damped_growth"] = damped_growth(config)
    return out


def _boundary_or_none(config):
    try:
        return analytic_boundary(config)
    except DomainError:
        return None


# -- commands ----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = load_config(args.config, args.set)
    traj = evolve_full(config)
    header = ["t (1/omega)", "E_N (ebits)"]
    header += [f"cov_{COV_LABELS[i]}{COV_LABELS[j]} (natural)" for i in range(4) for j in range(i, 4)]
    header += ["var_x_plus (natural)", "var_p_plus (natural)",
               "var_x_minus (natural)", "var_p_minus (natural)"]
    rows = []
    en = traj.log_negativity
    plus, minus = traj.modes["+"].covariance, traj.modes["-"].covariance
    for k in range(traj.t.size):
        c = traj.covariance[k]
        row = [traj.t[k], en[k]] + [c[i, j] for i in range(4) for j in range(i, 4)]
        row += [plus[k, 0], plus[k, 2], minus[k, 0], minus[k, 2]]
        rows.append(row)
    table = write_table(args.out / "trajectory", header, rows, args.format)
    try:
        rep = steady_state(traj, tolerance=args.tolerance, window=args.window)
        steady = rep.to_dict()
        steady["status"] = "converged" if rep.converged else "nonconvergent"
    except DivergenceError as exc:
        steady = {"status": "diverged", "converged": False, "message": str(exc),
                  "period_index": exc.period_index}
    except DomainError as exc:
        steady = {"status": "too_short", "converged": False, "message": str(exc)}
    summary = {
        "command": "simulate",
        "config": config.to_dict(),
        "steady_state": steady,
        "floquet": floquet_summary(config),
        "analytic_boundary_theta": _boundary_or_none(config),
        "metadata": traj.metadata,
        "table": table.name,
    }
    write_json(args.out / "summary.json", summary)
    print(f"steady state: {steady['status']}"
          + (f", E_N = {steady['log_negativity']:.6g}" if "log_negativity" in steady else ""))
    if steady["status"] == "diverged":
        print(f"error: {steady['message']}", file=sys.stderr)
        return DivergenceError.exit_code
    return 0


def _axes(args, required: tuple, optional: tuple = ()) -> dict:
    axes = {}
    for text in args.axis or []:
        ax = Axis.parse(text)
        if ax.name not in required + optional:
            raise ConfigError(f"axis: {ax.name!r} is not used by this command "
                              f"(expected {', '.join(required + optional)})")
        if ax.name in axes:
            raise ConfigError(f"axis: {ax.name!r} given twice")
        axes[ax.name] = ax
    missing = [n for n in required if n not in axes]
    if missing:
        raise ConfigError(f"axis: missing {', '.join(missing)} (use --axis name=start:stop:count)")
    return axes


def cmd_boundary(args) -> int:
    config = load_config(args.config, args.set)
    axes = _axes(args, ("kappa1",), ("theta",))
    spec = ScanSpec(tuple(axes.values()), config, eps=args.eps, depth=args.depth, window=args.window)
    kappas = axes["kappa1"].values()
    bracket = {}
    if "theta" in axes:
        bracket = {"lo": axes["theta"].start, "hi": axes["theta"].stop}
    points = boundary_scan(config, kappas, eps=spec.eps, depth=spec.depth, window=spec.window,
                           workers=args.workers, **bracket)
    header = ["kappa1 (-)", "g (omega)", "theta_sim (hbar omega/k)", "theta_analytic (hbar omega/k)",
              "relative_error (-)", "status", "flagged"]
    rows = [[p.kappa1, p.g, p.theta_sim, p.theta_analytic, p.relative_error, p.status, p.flagged]
            for p in points]
    table = write_table(args.out / "boundary", header, rows, args.format)
    inside = [p for p in points if p.theta_analytic > 0]
    within = [p for p in inside if abs(p.relative_error) <= 0.25]
    summary = {
        "command": "boundary",
        "config": config.to_dict(),
        "scan": {"kappa1": [axes["kappa1"].start, axes["kappa1"].stop, axes["kappa1"].count],
                 "eps": spec.eps, "depth": spec.depth, "window": spec.window, **bracket},
        "points_in_tongue": len(inside),
        "points_within_25_percent": len(within),
        "flagged": sum(p.flagged for p in points),
        "analytic_boundary_theta_at_config": _boundary_or_none(config),
        "table": table.name,
    }
    write_json(args.out / "summary.json", summary)
    print(f"{len(within)}/{len(inside)} tongue points within 25% of the analytic boundary")
    return 0


def cmd_equilibrium(args) -> int:
    config = load_config(args.config, args.set)
    axes = _axes(args, ("theta", "kappa0"))
    thetas, kappas = axes["theta"].values(), axes["kappa0"].values()
    points = equilibrium_diagram(thetas, kappas)
    header = ["theta (hbar omega/k)", "kappa0 (-)", "E_N (ebits)", "valid"]
    rows = [[p.theta, p.kappa0, p.log_negativity, p.valid] for p in points]
    table = write_table(args.out / "equilibrium", header, rows, args.format)
    contour = [{"kappa0": float(k), "theta_boundary": equilibrium_boundary(float(k))}
               for k in kappas if abs(k) < 1.0]
    summary = {
        "command": "equilibrium",
        "config": config.replace(kappa1=0.0).to_dict(),
        "boundary": contour,
        "invalid_points": sum(not p.valid for p in points),
        "table": table.name,
    }
    write_json(args.out / "summary.json", summary)
    print(f"{len(points)} grid points, {summary['invalid_points']} invalid")
    return 0


def cmd_exponent(args) -> int:
    config = load_config(args.config, args.set)
    axes = _axes(args, ("kappa1", "delta"))
    points = exponent_map(config, axes["kappa1"].values(), axes["delta"].values(), args.workers)
    header = ["kappa1 (-)", "delta (omega)", "growth_plus (omega)", "growth_minus (omega)", "stable"]
    rows = [[p.kappa1, p.delta, p.growth_plus, p.growth_minus, p.stable] for p in points]
    table = write_table(args.out / "exponent", header, rows, args.format)
    summary = {"command": "exponent", "config": config.to_dict(), "table": table.name,
               "unstable_points": sum(not p.stable for p in points)}
    write_json(args.out / "summary.json", summary)
    print(f"{len(points)} grid points, {summary['unstable_points']} unstable")
    return 0


def cmd_oracle_compare(args) -> int:
    config = load_config(args.config, args.set)
    results = oracle_triangle(config, n_modes=args.modes, bath_horizon=args.bath_horizon)
    failed = [r.pair for r in results if r.valid and not r.passed]
    doc = {"command": "oracle-compare", "config": config.to_dict(),
           "comparisons": [r.to_dict() for r in results], "mismatches": failed}
    write_json(args.out / "oracle_compare.json", doc)
    for r in results:
        verdict = "pass" if r.passed else "FAIL"
        if not r.valid:
            verdict += " (outside validity regime)"
        print(f"{r.pair}: deviation {r.deviation:.3g} vs tolerance {r.tolerance:.3g} {verdict}")
    if failed:
        raise OracleMismatch(f"oracle mismatch: {', '.join(failed)}")
    return 0


def cmd_units(args) -> int:
    ctx = UnitContext(args.frequency, args.mass, args.trap_size)
    doc = convert(ctx, theta=args.theta, temperature=args.temperature)
    if args.format == "csv":
        write_table(args.out / "units", list(doc), [list(doc.values())], "csv")
    write_json(args.out / "units.json", doc)
    print(json.dumps(_clean(doc), indent=2, sort_keys=True))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "boundary": cmd_boundary,
    "equilibrium": cmd_equilibrium,
    "exponent": cmd_exponent,
    "oracle-compare": cmd_oracle_compare,
    "units": cmd_units,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file (or summary JSON)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field; repeatable")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes for scans")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="hotent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="single trajectory and steady state")
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--window", type=int, default=10)

    p = sub.add_parser("boundary", parents=[common], help="bisected entanglement boundary vs kappa1")
    p.add_argument("--axis", action="append", metavar="NAME=START:STOP:COUNT",
                   help="kappa1 grid (required); a theta axis sets the bisection bracket")
    p.add_argument("--eps", type=float, default=1e-3, help="steady E_N threshold")
    p.add_argument("--depth", type=int, default=12, help="bisection steps")
    p.add_argument("--window", type=int, default=10)

    p = sub.add_parser("equilibrium", parents=[common], help="undriven Gibbs-state diagram")
    p.add_argument("--axis", action="append", metavar="NAME=START:STOP:COUNT",
                   help="theta and kappa0 grids")

    p = sub.add_parser("exponent", parents=[common], help="Floquet growth-rate map")
    p.add_argument("--axis", action="append", metavar="NAME=START:STOP:COUNT",
                   help="kappa1 and delta grids")

    p = sub.add_parser("oracle-compare", parents=[common], help="exact propagator vs oracles")
    p.add_argument("--modes", type=int, default=None, help="bath modes per oscillator")
    p.add_argument("--bath-horizon", type=float, default=20.0,
                   help="time span of the discretized-bath comparison")

    p = sub.add_parser("units", parents=[common], help="convert to laboratory units")
    p.add_argument("--frequency", type=float, help="oscillator frequency nu in Hz")
    p.add_argument("--mass", type=float, help="oscillator mass in kg")
    p.add_argument("--trap-size", type=float, help="trap size in m")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--theta", type=float)
    grp.add_argument("--temperature", type=float, help="temperature in K")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError(f"workers: must be >= 1 (got {args.workers})")
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args)
    except HotentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
