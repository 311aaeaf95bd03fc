"""Command-line entry point: ``kslayer <command> [options]``.

Exit codes: 0 success, 2 usage, 3 threshold failure, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from typing import Sequence

import numpy as np

from .core import GridFunction, Tolerances, build_graded_grid
from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    ParameterError,
    SingularityError,
    TrajectoryError,
)
from .layer import nu1_closed_form
from .matching import (
    DEFAULT_ETA,
    PROFILE_COLUMNS,
    Construction,
    build_construction,
    eps_of_lambda,
    gluing_mismatch,
    profile_table,
)
from .outer import ProblemParams
from .residual import residual_report, scaling_fit
from .solver import (
    bracket_for,
    build_linearized,
    fixed_point_solve,
    inverse_bound_probe,
    newton_solve,
    shooting_oracle,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_THRESHOLD, EXIT_SOLVER = 0, 2, 3, 4
DEFAULT_SWEEP = (0.1, 0.07, 0.05, 0.035, 0.025)
DEFAULT_LIMITS = (0.08, 0.04, 0.02)
MAX_SOLVE_EPS = 0.1
TREND_NOISE = 0.05


class UsageError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    N: int
    r0: float
    eps: tuple[float, ...] = ()
    log_lambda: tuple[float, ...] = ()
    eta: float = DEFAULT_ETA
    per_layer: int = 200
    n_outer: int = 2000
    tol: Tolerances = Tolerances()
    out: str | None = None
    seed: int = 0
    method: str = "both"
    override_a2: float | None = None
    check_trend: bool = False
    timing: bool = False

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.N, self.r0)


# -- formatting ----------------------------------------------------------------

def fmt(x: float) -> str:
    """17 significant digits, so values round-trip exactly."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return f"{x:.17g}"


def write_csv(path: str | None, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(float(v)) for v in row])
    if path is None:
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


def emit_json(payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _csv_path(config: RunConfig, suffix: str) -> str | None:
    if config.out is None:
        return None
    return config.out if config.out.endswith(".csv") else f"{config.out}.{suffix}.csv"


# -- config ----------------------------------------------------------------------

def _construction(config: RunConfig) -> Construction:
    return build_construction(config.params, config.eta, config.tol, override_a2=config.override_a2)


def _eps_values(config: RunConfig, construction: Construction) -> list[float]:
    if config.eps:
        return list(config.eps)
    return [eps_of_lambda(consts=construction.constants, log_lam=ll, tol=1e-13) for ll in config.log_lambda]


def _grid(config: RunConfig, eps: float):
    return build_graded_grid(config.r0, eps, n_outer=config.n_outer, per_layer=config.per_layer)


# -- commands --------------------------------------------------------------------

def cmd_constants(config: RunConfig) -> int:
    con = _construction(config)
    c, corr = con.constants, con.corrections
    report = {
        "N": config.N, "r0": config.r0, "eta": c.eta,
        "uprime_r0": c.uprime_r0,
        "nu1_quadrature": corr.nu1, "nu1_closed_form": nu1_closed_form(config.params, c.a1),
        "nu2": corr.nu2, "zeta1": corr.zeta1, "zeta2": corr.zeta2,
        "a1": c.a1, "a2": c.a2, "a3": c.a3, "A1": c.A1, "A2": c.A2, "A3": c.A3,
    }
    if config.out and config.out.endswith(".json"):
        with open(config.out, "w", encoding="utf-8") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, **report}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    width = max(len(k) for k in report)
    for key, val in report.items():
        sys.stdout.write(f"{key:<{width}}  {fmt(val)}\n")
    return EXIT_OK


def cmd_approx(config: RunConfig) -> int:
    con = _construction(config)
    eps = _eps_values(config, con)[0]
    approx = con.approx(eps)
    table = profile_table(_grid(config, eps), approx)
    write_csv(_csv_path(config, "profile"), PROFILE_COLUMNS, table)
    if config.out is not None:
        mism = gluing_mismatch(approx)
        emit_json({"eps": eps, "log_lambda": approx.log_lam, "delta": approx.delta,
                   "gluing_value": mism[0], "gluing_slope": mism[1]})
    return EXIT_OK


def cmd_residual_sweep(config: RunConfig) -> int:
    con = _construction(config)
    eps_values = sorted(_eps_values(config, con), reverse=True)
    if len(eps_values) < 4:
        raise UsageError("residual-sweep needs at least 4 eps values")
    reports = [residual_report(con.approx(e), _grid(config, e)) for e in eps_values]
    try:
        sigma = scaling_fit([(r.eps, r.l1_total) for r in reports])
    except DomainError:
        sigma = float("nan")
    rows = [(r.eps, r.lam, r.l1_layer, r.l1_interface, r.l1_outer, r.l1_total) for r in reports]
    write_csv(_csv_path(config, "residual"),
              ("eps", "lambda", "l1_layer", "l1_interface", "l1_outer", "l1_total"), rows)
    if config.out is not None:
        emit_json({"sigma_fit": sigma, "eps": eps_values,
                   "log_lambda": [r.log_lam for r in reports]})
    else:
        sys.stdout.write(f"sigma_fit,{fmt(sigma)}\n")
    return EXIT_OK if sigma > 0 else EXIT_THRESHOLD


def _solve_summary(res) -> dict:
    return {
        "method": res.method, "iterations": res.iterations, "phi_sup": res.phi_sup,
        "final_residual_l1": res.final_residual_l1, "mass_scaled": res.mass_scaled,
        "mass_full": res.mass_full, "outer_dev": res.outer_dev, "layer_dev": res.layer_dev,
        "history": list(res.history), "contraction_ratios": list(res.contraction_ratios),
    }


def cmd_solve(config: RunConfig) -> int:
    con = _construction(config)
    eps = _eps_values(config, con)[0]
    if not eps <= MAX_SOLVE_EPS:
        raise UsageError(f"solve needs eps <= {MAX_SOLVE_EPS}, got {eps}")
    approx = con.approx(eps)
    grid = _grid(config, eps)
    ubar = GridFunction(grid, approx.ubar(grid.nodes))
    results = {}
    t0 = time.perf_counter()
    if config.method in ("picard", "both"):
        results["picard"] = fixed_point_solve(ubar, approx.log_lam, eps, config.params, con.outer, config.tol)
    if config.method in ("newton", "both"):
        results["newton"] = newton_solve(ubar, approx.log_lam, eps, config.params, con.outer, config.tol)
    elapsed = time.perf_counter() - t0
    payload = {"eps": eps, "log_lambda": approx.log_lam, "N": config.N, "r0": config.r0,
               "results": {k: _solve_summary(v) for k, v in results.items()}}
    if len(results) == 2:
        payload["method_agreement"] = float(np.max(np.abs(results["picard"].u.values
                                                          - results["newton"].u.values)))
    if config.timing:
        payload["seconds"] = elapsed
    emit_json(payload)
    if config.out is not None:
        best = results.get("newton") or results["picard"]
        lam_e_u = np.exp(approx.log_lam + best.u.values)
        write_csv(_csv_path(config, "solution"), ("r", "ubar", "phi", "u", "lambda_e_u"),
                  zip(grid.nodes, ubar.values, best.phi.values, best.u.values, lam_e_u))
    return EXIT_OK


def cmd_oracle(config: RunConfig) -> int:
    con = _construction(config)
    eps = _eps_values(config, con)[0]
    approx = con.approx(eps)
    grid = _grid(config, eps)
    ubar = GridFunction(grid, approx.ubar(grid.nodes))
    newton = newton_solve(ubar, approx.log_lam, eps, config.params, con.outer, config.tol)
    bracket = bracket_for(float(newton.u.values[0]), config.params, approx.log_lam, width=0.05)
    shot = shooting_oracle(approx.log_lam, config.params, bracket, grid)
    diff = float(np.max(np.abs(shot.u.values - newton.u.values)))
    emit_json({"eps": eps, "log_lambda": approx.log_lam, "c_newton": float(newton.u.values[0]),
               "c_shooting": shot.c, "bracket": list(bracket), "slope_at_r0": shot.slope_at_r0,
               "sup_difference": diff})
    return EXIT_OK


def _monotone(values: Sequence[float], increasing: bool) -> bool:
    """Monotone up to TREND_NOISE relative slack between consecutive entries."""
    for a, b in zip(values, values[1:]):
        if increasing and b < a * (1 - TREND_NOISE):
            return False
        if not increasing and b > a * (1 + TREND_NOISE):
            return False
    return True


def cmd_limits(config: RunConfig) -> int:
    con = _construction(config)
    eps_values = sorted(_eps_values(config, con), reverse=True)
    if not eps_values:
        raise UsageError("limits needs at least one eps value")
    rows = []
    for eps in eps_values:
        approx = con.approx(eps)
        grid = _grid(config, eps)
        ubar = GridFunction(grid, approx.ubar(grid.nodes))
        res = newton_solve(ubar, approx.log_lam, eps, config.params, con.outer, config.tol)
        probe = inverse_bound_probe(build_linearized(ubar, approx.log_lam, config.params), seed=config.seed)
        rows.append((eps, res.mass_scaled, res.layer_dev, res.outer_dev, res.mass_full, res.phi_sup, probe))
    write_csv(_csv_path(config, "limits"),
              ("eps", "mass_scaled", "layer_dev", "outer_dev", "mass_full", "phi_sup", "inverse_bound"), rows)
    if config.check_trend:
        cols = list(zip(*rows))
        mass_ok = _monotone(cols[1], increasing=False) or _monotone(cols[1], increasing=True)
        ok = (mass_ok and _monotone(cols[2], increasing=False) and _monotone(cols[3], increasing=False)
              and _monotone(cols[4], increasing=True))
        if not ok:
            return EXIT_THRESHOLD
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "approx": cmd_approx,
    "residual-sweep": cmd_residual_sweep,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "limits": cmd_limits,
}
MULTI_EPS = {"residual-sweep", "limits"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kslayer", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--N", type=int, required=True, help="space dimension (>= 2)")
    common.add_argument("--r0", type=float, required=True, help="ball radius")
    common.add_argument("--eta", type=float, default=DEFAULT_ETA, help="interface exponent, delta = eps^eta")
    common.add_argument("--override-eta", type=float, default=None, help="sensitivity study: replaces --eta")
    common.add_argument("--override-a2", type=float, default=None,
                        help="negative control: replaces a2 in the eps-lambda relation only")
    common.add_argument("--grid-per-layer", type=int, default=200, help="grid nodes per layer width eps")
    common.add_argument("--grid-outer", type=int, default=2000, help="uniform node count away from the layer")
    common.add_argument("--tol-quad", type=float, default=1e-10)
    common.add_argument("--tol-newton", type=float, default=1e-11)
    common.add_argument("--out", default=None, help="CSV path or prefix; JSON goes to stdout")
    common.add_argument("--seed", type=int, default=0, help="seed for the a-priori bound probe")
    common.add_argument("--method", choices=("newton", "picard", "both"), default="both")
    common.add_argument("--check-trend", action="store_true", help="limits: exit 3 on a non-monotone column")
    common.add_argument("--timing", action="store_true", help="solve: include wall time (breaks byte-identity)")
    group = common.add_mutually_exclusive_group()
    group.add_argument("--eps", type=float, nargs="+", default=None)
    group.add_argument("--lambda", dest="lam", type=float, nargs="+", default=None)
    group.add_argument("--log-lambda", type=float, nargs="+", default=None)

    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    log_lam: tuple[float, ...] = ()
    if args.lam is not None:
        if any(not x > 0 for x in args.lam):
            raise UsageError("--lambda values must be positive")
        log_lam = tuple(math.log(x) for x in args.lam)
    elif args.log_lambda is not None:
        log_lam = tuple(args.log_lambda)
    eps = tuple(args.eps) if args.eps is not None else ()
    if not eps and not log_lam:
        if args.command == "residual-sweep":
            eps = DEFAULT_SWEEP
        elif args.command == "limits":
            eps = DEFAULT_LIMITS
        elif args.command != "constants":
            raise UsageError(f"{args.command} needs --eps or --lambda")
    if args.command not in MULTI_EPS and len(eps) + len(log_lam) > 1:
        raise UsageError(f"{args.command} takes a single eps or lambda")
    tol = Tolerances(quad_tol=args.tol_quad, newton_tol=args.tol_newton)
    eta = args.override_eta if args.override_eta is not None else args.eta
    return RunConfig(args.command, args.N, args.r0, eps, log_lam, eta, args.grid_per_layer, args.grid_outer,
                     tol, args.out, args.seed, args.method, args.override_a2, args.check_trend, args.timing)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config = config_from_args(args)
        return COMMANDS[config.command](config)
    except (UsageError, ParameterError, DomainError) as exc:
        sys.stderr.write(f"kslayer: error: {exc}\n")
        return EXIT_USAGE
    except (ConvergenceError, SingularityError, BracketError, TrajectoryError) as exc:
        sys.stderr.write(f"kslayer: solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
