"""Command-line interface.

Subcommands: simulate, eigen, threshold, classify, sweep.  All take
--config plus repeatable --set key=value overrides; exit status is 0 on
success/pass, 2 when a verification fails, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import models
from .classify import predict_regime, verify_outcome
from .config import (
    ConfigError,
    PRESETS,
    RunConfig,
    config_from_entries,
    load_sweep_config,
    parse_config_text,
    preset_config,
)
from .mesh import build_grid, eval_expression
from .output import emit_csv, emit_svg, emit_sweep_svg, trajectory_from_csv
from .spectral import basic_reproduction_number, principal_eigenvalue
from .sweep import run_sweep
from .threshold import critical_population


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key = value configuration file")
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="built-in scenario preset")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a configuration key")


def _resolve_config(args) -> RunConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.config:
        entries = parse_config_text(Path(args.config).read_text(), source=args.config)
        if args.preset:
            entries["preset"] = (args.preset, 0)
        for key, value in overrides.items():
            entries[key] = (value, 0)
        return config_from_entries(entries, source=args.config)
    if args.preset:
        entries = {"preset": (args.preset, 0)}
        for key, value in overrides.items():
            entries[key] = (value, 0)
        return config_from_entries(entries)
    raise ConfigError("give --config and/or --preset")


def _cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    spec, grid, S0, I0 = cfg.build()
    traj = models.run(spec, S0, I0, **cfg.run_kwargs())
    out = Path(args.out or cfg.output_dir)
    profiles, diagnostics = emit_csv(traj, out)
    if args.svg:
        emit_svg(traj, out / f"{args.svg}.svg", args.svg)
    summary = {
        "preset": cfg.preset,
        "model": spec.variant.value,
        "N": traj.N,
        "final_time": traj.final.t,
        "steady_detected": traj.steady_detected,
        "snapshots": len(traj.snapshots),
        "warnings": traj.warnings,
    }
    (out / "run.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {profiles} and {diagnostics}")
    print(f"final t={traj.final.t:g}  sup S={traj.final.S.max():.6g}  "
          f"sup I={traj.final.I.max():.6g}  steady={traj.steady_detected}")
    return 0


def _cmd_eigen(args) -> int:
    if args.h is not None:
        grid = build_grid(args.x_min, args.x_max, args.nx)
        h = eval_expression(grid, args.h)
        result = principal_eigenvalue(args.d, h, tol=args.tol)
        print(f"sigma({args.d:g}, {args.h}) = {result.sigma!r}")
        print(f"iterations={result.iterations} residual={result.residual:.3e} "
              f"min phi={result.phi.min():.3e}")
        return 0
    cfg = _resolve_config(args)
    spec, grid, _, _ = cfg.build()
    d = spec.d_I if spec.d_I > 0 else spec.d_S
    r0 = basic_reproduction_number(d, spec.beta, spec.gamma, tol=args.tol)
    gap = eval_expression(grid, f"({cfg.beta_expr}) - ({cfg.gamma_expr})", cfg.params)
    sig = principal_eigenvalue(d, gap, tol=args.tol).sigma
    print(f"R0 = {r0!r}  (d={d:g})")
    print(f"sigma(d, beta - gamma) = {sig!r}")
    return 0


def _cmd_threshold(args) -> int:
    cfg = _resolve_config(args)
    spec, grid, S0, _ = cfg.build()
    result = critical_population(S0, spec.risk_ratio(), spec.beta, spec.d_I)
    print(f"critical population N* = {result.n_star!r}")
    print(f"bounds: int r = {result.lower_bound!r} <= N* <= "
          f"int max(S0, r) = {result.upper_bound!r}")
    print(f"constraint eigenvalue at optimum = {result.sigma_at_opt:.3e}  "
          f"converged={result.converged}")
    return 0


def _cmd_classify(args) -> int:
    cfg = _resolve_config(args)
    spec, grid, S0, I0 = cfg.build()
    run_dir = Path(args.run_dir) if args.run_dir else None
    if run_dir is not None:
        traj = trajectory_from_csv(spec, run_dir / "profiles.csv",
                                   run_dir / "diagnostics.csv")
    else:
        traj = models.run(spec, S0, I0, **cfg.run_kwargs())
    pred = predict_regime(spec, S0, I0)
    print(f"predicted regime: {pred.regime.name} — {pred.regime.value}")
    for note in pred.notes:
        print(f"  note: {note}")
    report = verify_outcome(traj, pred, tol=args.tol)
    for name, err in report.measured_errors.items():
        print(f"  {name} = {err:.6g}")
    for note in report.notes:
        print(f"  {note}")
    if report.passed is None:
        print("verdict: none (indeterminate prediction)")
        return 0
    print(f"verdict: {'PASS' if report.passed else 'FAIL'} at tolerance {args.tol:g}")
    return 0 if report.passed else 2


def _cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("sweep needs --config with sweep_* keys")
    overrides = {}
    for item in args.overrides:
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.preset:
        overrides["preset"] = args.preset
    sweep_cfg = load_sweep_config(args.config, overrides)
    result = run_sweep(sweep_cfg, jobs=args.jobs)
    out = Path(args.out or sweep_cfg.base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "sweep.csv"
    with table_path.open("w") as fh:
        fh.write(f"{result.parameter},{result.observable},error\n")
        for p in result.points:
            val = "" if p.value is None else repr(p.value)
            fh.write(f"{p.parameter!r},{val},{p.error or ''}\n")
    if args.svg:
        emit_sweep_svg(result.table(), out / "sweep.svg", knee=result.knee,
                       x_label=result.parameter, y_label=result.observable)
    failures = [p for p in result.points if p.error]
    print(f"wrote {table_path} ({len(result.points)} points, "
          f"{len(failures)} failures)")
    if result.knee is None:
        print("knee: absent")
    else:
        print(f"knee at {result.parameter} = {result.knee!r}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sislab",
        description="Numerical laboratory for degenerate SIS reaction-diffusion models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate a model and emit CSVs")
    _add_common(p_sim)
    p_sim.add_argument("--out", help="output directory (default: config output_dir)")
    p_sim.add_argument("--svg", choices=["final_profiles", "mass_series",
                                         "lyapunov_series"],
                       help="also write this plot")
    p_sim.set_defaults(func=_cmd_simulate)

    p_eig = sub.add_parser("eigen", help="principal eigenvalue / reproduction number")
    _add_common(p_eig)
    p_eig.add_argument("--d", type=float, default=1.0, help="diffusion rate")
    p_eig.add_argument("--h", help="potential expression; omit to compute R0 "
                                   "from the configured coefficients")
    p_eig.add_argument("--nx", type=int, default=201)
    p_eig.add_argument("--x-min", type=float, default=0.0)
    p_eig.add_argument("--x-max", type=float, default=1.0)
    p_eig.add_argument("--tol", type=float, default=1e-12)
    p_eig.set_defaults(func=_cmd_eigen)

    p_thr = sub.add_parser("threshold", help="critical population size")
    _add_common(p_thr)
    p_thr.set_defaults(func=_cmd_threshold)

    p_cls = sub.add_parser("classify", help="predict the regime and verify a run")
    _add_common(p_cls)
    p_cls.add_argument("--run-dir", help="directory with profiles.csv/diagnostics.csv "
                                         "(default: simulate now)")
    p_cls.add_argument("--tol", type=float, default=0.01)
    p_cls.set_defaults(func=_cmd_classify)

    p_swp = sub.add_parser("sweep", help="parameter sweep with knee detection")
    _add_common(p_swp)
    p_swp.add_argument("--jobs", type=int, default=1, help="concurrent workers")
    p_swp.add_argument("--out", help="output directory")
    p_swp.add_argument("--svg", action="store_true", help="also write sweep.svg")
    p_swp.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
