"""
Command-line entry point for blowup-lab.

Every subcommand writes its series as CSV and its reports as JSON into the
output directory, next to a manifest.json that echoes the config and
records each acceptance check. Exit codes: 0 success, 2 usage or
parameter error, 3 failed numerical check, 4 file or parse error.
"""

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from internal.python.blowup_lab import __version__
from internal.python.blowup_lab.models.config import (
    ModesConfig,
    OperatorConfig,
    ProfileConfig,
    QbConfig,
    SimConfig,
    default_out_dir,
    default_threads,
)
from internal.python.blowup_lab.models.errors import (
    BlowupLabError,
    CheckFailure,
    CheckResult,
    DomainError,
    FileError,
    ParameterError,
    ParseError,
    UsageError,
)
from internal.python.blowup_lab.models.manifest import RunManifest
from internal.python.blowup_lab.modes.dynamics import (
    integrate_system,
    instability_experiment,
    shoot_unstable,
    shrinking_set_check,
    trapped_trajectory,
)
from internal.python.blowup_lab.modes.linearization import build_Al
from internal.python.blowup_lab.modes.system import explicit_solution, make_mode_system
from internal.python.blowup_lab.profile.ground_state import lamq_tail_exponent, wronskian_residual
from internal.python.blowup_lab.qb.approximate_profile import (
    assemble_Qb,
    b_on_explicit_curve,
    compute_Psib,
    residual_scaling,
)
from internal.python.blowup_lab.services.verification_service import (
    DEFAULT_DIMENSIONS,
    FAULTS,
    RESIDUAL_EXPONENT_TOL,
    VerificationService,
    at_most,
    holds,
    near,
)
from internal.python.blowup_lab.sim.report import exponent_window
from internal.python.blowup_lab.sim.runner import (
    FLOAT_FORMAT,
    RATE_REPORT_NAME,
    TRAJECTORY_NAME,
    run_blowup,
)
from internal.python.blowup_lab.sim.state import energy_allowance
from internal.python.common.logger import default_logger

logger = default_logger.child("cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CHECK = 3
EXIT_IO = 4

SIM_RATE_TOL = 0.05
SIM_B1S_TOL = 0.05
SIM_TYPE_II_GROWTH = 10.0
SIM_LAMBDA_DECADES = 2.0

LOGLOG_NAME = "loglog.csv"
OVERLAY_NAME = "fit_overlay.csv"
PLOT_COLUMNS = ("t", "s", "lambda")

Handler = Callable[[argparse.Namespace, Path, RunManifest], None]


def exit_code_for(error: BaseException) -> int:
    """Map a failure to the process exit code."""
    if isinstance(error, (UsageError, ParameterError, DomainError)):
        return EXIT_USAGE
    if isinstance(error, (FileError, ParseError, OSError)):
        return EXIT_IO
    return EXIT_CHECK


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def write_json(data: Dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default))
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def parse_dimensions(text: str) -> List[int]:
    """'7,8,11' -> [7, 8, 11]; empty or malformed lists are usage errors."""
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise UsageError("dimension list is empty")
    try:
        return [int(item) for item in items]
    except ValueError as exc:
        raise UsageError(f"dimension list must hold integers: {text!r}") from exc


def parse_floats(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma separated list of numbers: {text!r}") from exc


def _provided(args: argparse.Namespace, *keys: str) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}


def _seed(args: argparse.Namespace) -> int:
    return 0 if args.seed is None else args.seed


def _record(manifest: RunManifest, checks: Sequence[CheckResult]) -> None:
    for check in checks:
        manifest.add_check(check)


# -- subcommands ---------------------------------------------------------------

def cmd_profile(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = ProfileConfig.from_dict(_provided(args, "d", "y_min", "y_max", "n"))
    manifest.config.update(cfg.to_dict())
    service = VerificationService(profile_config=cfg, seed=_seed(args))
    pack = service.pack(cfg.d, cfg.y_min, cfg.y_max, cfg.n)

    series = pd.DataFrame({
        "y": pack.grid.y,
        "Q": pack.Q.values,
        "LamQ": pack.LamQ.values,
        "V": pack.V.values,
        "Z": pack.Z.values,
        "Gamma": pack.Gamma.values,
    })
    manifest.add_output(write_csv(series, out_dir / "profile.csv"))

    checks = service.gamma_checks() + service.profile_checks(cfg.d)
    report = {
        "d": pack.d,
        "gamma": pack.gamma,
        "measured_gamma": pack.measured_gamma,
        "a0": pack.a0,
        "hbar": pack.hbar,
        "delta": pack.delta,
        "lamq_tail_exponent": lamq_tail_exponent(pack),
        "wronskian_residual": wronskian_residual(pack),
        "checks": [check.to_dict() for check in checks],
    }
    manifest.add_output(write_json(report, out_dir / "profile_report.json"))
    _record(manifest, checks)


def cmd_operator(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = OperatorConfig.from_dict(_provided(args, "d", "K", "M", "L", "y_min", "y_max", "n",
                                             "samples", "k_coercivity"))
    manifest.config.update(cfg.to_dict())
    service = VerificationService(operator_config=cfg, seed=_seed(args))
    art = service.operator_artifacts(cfg.d)

    y = art.ctx.grid.y
    tk = pd.DataFrame({"y": y, **{f"T_{k}": art.tks[k].values for k in range(art.tks.K + 1)}})
    manifest.add_output(write_csv(tk, out_dir / "tk.csv"))
    phi = pd.DataFrame({"y": y, **{f"Phi_M{M:g}": p.Phi.values for M, p in art.phis.items()}})
    manifest.add_output(write_csv(phi, out_dir / "phi.csv"))

    checks = service.operator_checks(cfg.d)
    report = {
        "d": cfg.d,
        "gamma": art.ctx.pack.gamma,
        "tk_tail_exponents": art.tks.measured_tail,
        "tk_expected_tails": [2.0 * k - art.ctx.pack.gamma for k in range(art.tks.K + 1)],
        "tk_round_trip": art.tks.round_trip,
        "phi": [p.to_dict() for p in art.phis.values()],
        "coercivity": {"k": art.k_coercivity, "ratio": art.coercivity, "samples": cfg.samples},
        "checks": [check.to_dict() for check in checks],
    }
    manifest.add_output(write_json(report, out_dir / "operator_report.json"))
    _record(manifest, checks)


def cmd_qb(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    data = _provided(args, "d", "ell", "L", "b1", "eta", "scaling_eta", "M", "y_min", "y_max", "n")
    if args.b1_window is not None:
        data["b1_window"] = parse_floats(args.b1_window)
    cfg = QbConfig.from_dict(data)
    manifest.config.update(cfg.to_dict())
    service = VerificationService(qb_config=cfg, seed=_seed(args))
    art = service.qb_artifacts(cfg.d)
    system = make_mode_system(cfg.d, cfg.ell, cfg.L)

    profile = assemble_Qb(art.ctx, art.tks, art.corrections, b_on_explicit_curve(system, cfg.b1),
                          cfg.eta)
    single = compute_Psib(profile, M=cfg.M)
    scaling = art.scaling
    if scaling is None:
        scaling = residual_scaling(art.ctx, art.tks, art.corrections, system, cfg.b1_window,
                                   cfg.scaling_eta, cfg.M)

    checks = service.qb_checks(cfg.d)
    if art.scaling is None:
        fit = scaling.weighted[0]
        checks.append(near(f"qb.residual_scaling[d={cfg.d}]", fit.exponent,
                           scaling.expected_weighted[0], RESIDUAL_EXPONENT_TOL,
                           residual=fit.residual))
    report = {
        "system": system.to_dict(),
        "profile": profile.to_dict(),
        "corrections": art.corrections.to_dict(),
        "residual": single.to_dict(),
        "scaling": scaling.to_dict(),
        "checks": [check.to_dict() for check in checks],
    }
    manifest.add_output(write_json(report, out_dir / "qb_report.json"))
    _record(manifest, checks)


def cmd_modes(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = ModesConfig.from_dict(_provided(args, "d", "ell", "L", "s0", "decades", "eps", "eta"))
    manifest.config.update(cfg.to_dict())
    seed = _seed(args)
    system = make_mode_system(cfg.d, cfg.ell, cfg.L)
    s1 = cfg.s0 * 10.0 ** cfg.decades
    traj = integrate_system(system, explicit_solution(system, cfg.s0), cfg.s0, s1)

    series = pd.DataFrame({"s": traj.s, "t": traj.t, "lambda": traj.lam,
                           **{f"b_{k + 1}": traj.b[:, k] for k in range(system.L)}})
    manifest.add_output(write_csv(series, out_dir / "modes_trajectory.csv"))

    report: Dict[str, Any] = {
        "system": system.to_dict(),
        "expected_t_exponent": system.t_exponent(),
        "expected_s_exponent": system.s_exponent(),
        "linearization": build_Al(system.gamma, system.ell).to_dict(),
        "trajectory": traj.summary(),
        "shrinking_set": shrinking_set_check(system, traj.s, traj.b, cfg.eta),
    }
    if system.ell >= 2:
        report["instability"] = instability_experiment(system, cfg.eps, seed, cfg.s0)
    if args.shoot:
        v2 = shoot_unstable(system, cfg.s0, s1, args.shoot_tol, cfg.eta)
        trapped = trapped_trajectory(system, cfg.s0, s1, v2, cfg.eta)
        shot = pd.DataFrame({"s": trapped["s"], "bound": trapped["bound"],
                             **{f"V_{j + 1}": trapped["V"][:, j] for j in range(system.ell)}})
        manifest.add_output(write_csv(shot, out_dir / "modes_shooting.csv"))
        report["shooting"] = {"v2": v2, "tol": args.shoot_tol}

    service = VerificationService(modes_config=cfg, seed=seed)
    checks = service.modes_checks(cfg.d)
    report["checks"] = [check.to_dict() for check in checks]
    manifest.add_output(write_json(report, out_dir / "modes_report.json"))
    _record(manifest, checks)


def simulation_checks(report: Dict[str, Any], trajectory: pd.DataFrame,
                      cfg: SimConfig) -> List[CheckResult]:
    """Acceptance checks of a run that reached the blowup criterion."""
    expected = report["expected_exponent"]
    exponent = report["exponent"]
    checks = [
        near("simulate.exponent", float("nan") if exponent is None else exponent,
             expected, SIM_RATE_TOL * expected),
        holds("simulate.lambda_decades", report["lambda_decades"] >= SIM_LAMBDA_DECADES,
              value=report["lambda_decades"]),
    ]
    b1_s = report["b1_s"]
    checks.append(near("simulate.b1_s", float("nan") if b1_s is None else b1_s,
                       report["c1"], SIM_B1S_TOL * report["c1"]))
    growth = report["type_ii_indicator_growth"]["run"]
    checks.append(holds("simulate.type_ii_growth", growth is not None and growth >= SIM_TYPE_II_GROWTH,
                        value=growth))
    E = trajectory["E"].to_numpy()
    slack = energy_allowance(cfg.energy_tol, E[:-1], cfg.sample_every)
    increase = np.diff(E) - slack
    checks.append(at_most("simulate.energy_monotone",
                          float(increase.max()) if increase.size else 0.0, 0.0))
    return checks


def cmd_simulate(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = SimConfig.from_file(args.config) if args.config else SimConfig()
    if args.seed is not None:
        cfg = SimConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    manifest.config.update(cfg.to_dict())
    result = run_blowup(cfg, out_dir)
    for path in result.outputs:
        manifest.add_output(path)
    if result.outcome.status == "blowup":
        _record(manifest, simulation_checks(result.report, result.trajectory, cfg))
    else:
        logger.warn("run ended without blowup, rate checks skipped",
                    {"status": result.outcome.status, "reason": result.outcome.reason})


def _parse_error_line(exc: Exception) -> Optional[int]:
    match = re.search(r"line (\d+)", str(exc))
    return int(match.group(1)) if match else None


def read_trajectory(path: Path) -> pd.DataFrame:
    """trajectory.csv with every plotted column numeric; ParseError names the bad line."""
    if not path.is_file():
        raise FileError(f"missing {path.name}", path=str(path))
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise ParseError(f"{path}:1: empty trajectory", line=1) from exc
    except pd.errors.ParserError as exc:
        line = _parse_error_line(exc)
        raise ParseError(f"{path}:{line}: {exc}", line=line) from exc
    missing = [col for col in PLOT_COLUMNS if col not in frame.columns]
    if missing:
        raise ParseError(f"{path}:1: missing columns {missing}", line=1, missing=missing)
    for col in PLOT_COLUMNS:
        numeric = pd.to_numeric(frame[col], errors="coerce")
        bad = np.flatnonzero(numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy()))
        if bad.size:
            line = int(bad[0]) + 2  # header is line 1
            raise ParseError(f"{path}:{line}: non-numeric value in column '{col}'",
                             line=line, column=col)
        frame[col] = numeric
    return frame


def read_rate_report(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise FileError(f"missing {path.name}", path=str(path))
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from exc


def cmd_plotdata(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    run_dir = Path(args.run_dir)
    manifest.config.update({"run_dir": str(run_dir)})
    frame = read_trajectory(run_dir / TRAJECTORY_NAME)
    report = read_rate_report(run_dir / RATE_REPORT_NAME)
    T, exponent, c = report.get("T"), report.get("exponent"), report.get("c")
    if T is None or exponent is None or c is None:
        raise CheckFailure("rate report carries no fitted rate", status=report.get("status"))

    gap = T - frame["t"].to_numpy()
    keep = gap > 0.0
    in_fit = exponent_window(frame, T)
    loglog = pd.DataFrame({
        "log_T_minus_t": np.log(gap[keep]),
        "log_lambda": np.log(frame["lambda"].to_numpy()[keep]),
        "in_fit": in_fit[keep],
    })
    manifest.add_output(write_csv(loglog, out_dir / LOGLOG_NAME))

    x = loglog["log_T_minus_t"].to_numpy()
    intercept = float(np.log(c))
    overlay = pd.DataFrame({
        "log_T_minus_t": x,
        "log_lambda_fit": intercept + exponent * x,
        "slope": exponent,
        "intercept": intercept,
    })
    manifest.add_output(write_csv(overlay, out_dir / OVERLAY_NAME))


def cmd_verify_all(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    dims = parse_dimensions(args.d)
    manifest.config.update({"dimensions": dims, "fault": args.fault})
    service = VerificationService(seed=_seed(args), fault=args.fault)
    report = service.run(dims, threads=args.threads)
    manifest.add_output(report.write(out_dir))
    _record(manifest, report.checks)


# -- parser --------------------------------------------------------------------

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=str, default=None,
                        help="Output directory (default: $BLOWUP_LAB_OUT/<subcommand>).")
    common.add_argument("--seed", type=int, default=None, help="Seed for every sampled quantity.")
    common.add_argument("--threads", type=int, default=default_threads(),
                        help="Worker threads for commands that fan out.")
    return common


def _grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=int, default=None, help="Space dimension (>= 7).")
    parser.add_argument("--y-min", dest="y_min", type=float, default=None)
    parser.add_argument("--y-max", dest="y_max", type=float, default=None)
    parser.add_argument("--n", type=int, default=None, help="Grid points.")


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="blowup-lab",
                                     description="Numerical laboratory for type-II blowup of "
                                                 "the corotational harmonic map heat flow.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("profile", parents=[common], help="Ground state Q and its fields.")
    _grid_flags(p)
    p.set_defaults(handler=cmd_profile)

    p = sub.add_parser("operator", parents=[common], help="Kernel iterates T_k and Phi_M.")
    _grid_flags(p)
    p.add_argument("--K", type=int, default=None, help="Highest kernel iterate.")
    p.add_argument("--M", type=float, default=None, help="Localization radius of Phi_M.")
    p.add_argument("--L", type=int, default=None, help="Orthogonality conditions.")
    p.add_argument("--samples", type=int, default=None, help="Coercivity samples.")
    p.add_argument("--k-coercivity", dest="k_coercivity", type=int, default=None)
    p.set_defaults(handler=cmd_operator)

    p = sub.add_parser("qb", parents=[common], help="Approximate profile and its residual.")
    _grid_flags(p)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--b1", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--scaling-eta", dest="scaling_eta", type=float, default=None)
    p.add_argument("--b1-window", dest="b1_window", type=str, default=None,
                   help="Comma separated b_1 values for the scaling fit.")
    p.add_argument("--M", type=float, default=None, help="Radius of the local Sobolev norm.")
    p.set_defaults(handler=cmd_qb)

    p = sub.add_parser("modes", parents=[common], help="Finite-dimensional b-system.")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--s0", type=float, default=None)
    p.add_argument("--decades", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--shoot", action="store_true", help="Shoot the unstable direction (ell = 2).")
    p.add_argument("--shoot-tol", dest="shoot_tol", type=float, default=1e-10)
    p.set_defaults(handler=cmd_modes)

    p = sub.add_parser("simulate", parents=[common], help="Dynamically rescaled PDE run.")
    p.add_argument("--config", type=str, default=None, help="key=value run config.")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("plotdata", parents=[common], help="Log-log series of a finished run.")
    p.add_argument("run_dir", type=str)
    p.set_defaults(handler=cmd_plotdata)

    p = sub.add_parser("verify-all", parents=[common], help="Acceptance suite over dimensions.")
    p.add_argument("--d", type=str, default=",".join(str(d) for d in DEFAULT_DIMENSIONS),
                   help="Comma separated dimensions.")
    p.add_argument("--fault", type=str, default=None, choices=sorted(FAULTS),
                   help="Inject a deliberate defect.")
    p.set_defaults(handler=cmd_verify_all)
    return parser


def resolve_out_dir(args: argparse.Namespace) -> Path:
    if args.out:
        return Path(args.out)
    if args.command == "plotdata":
        return Path(args.run_dir)
    return Path(default_out_dir()) / args.command


def _write_manifest(manifest: RunManifest, out_dir: Path) -> Optional[Path]:
    if manifest.error is not None:
        manifest.outputs = [p for p in manifest.outputs if Path(p).exists()]
        if not out_dir.is_dir():
            return None
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        return manifest.write(out_dir)
    except (FileError, OSError) as exc:
        logger.error("could not write manifest", exc)
        return None


def run_command(args: argparse.Namespace) -> int:
    """Run one parsed subcommand and return its exit code."""
    handler: Handler = args.handler
    out_dir = resolve_out_dir(args)
    echo = {k: v for k, v in vars(args).items() if k != "handler"}
    manifest = RunManifest(args.command, {"arguments": echo}, __version__)
    manifest.start()
    code = EXIT_OK
    try:
        if args.command == "plotdata" and not Path(args.run_dir).is_dir():
            raise FileError(f"run directory not found: {args.run_dir}", path=args.run_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler(args, out_dir, manifest)
        manifest.complete()
        if not manifest.all_passed:
            logger.error("checks failed", {"failed": manifest.failed_checks})
            print(f"failed checks: {', '.join(manifest.failed_checks)}", file=sys.stderr)
            code = EXIT_CHECK
    except BlowupLabError as exc:
        manifest.fail(exc.to_dict())
        logger.error(f"{args.command} failed", exc)
        print(f"error: {exc.message}", file=sys.stderr)
        code = exit_code_for(exc)
    except OSError as exc:
        manifest.fail({"error_type": "file", "message": str(exc), "details": {}})
        logger.error(f"{args.command} failed", exc)
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_IO
    if _write_manifest(manifest, out_dir) is None and code == EXIT_OK:
        code = EXIT_IO
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
