"""Command-line entry points for the simulation and inference workflows.

Exit codes: 0 success, 1 config error, 2 runtime failure over budget, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .dynamics import dump_trajectory, simulate
from .estimation import error_decomposition, estimate
from .harness import (
    ConfigError,
    ExperimentConfig,
    FailureBudgetExceeded,
    config_template,
    emit_results,
    read_records_csv,
    run_replication,
    run_study,
)
from .observation import kernel_coefficients, kernel_report, observe


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, study=dataclasses.replace(cfg.study, base_seed=args.seed)
        )
    if args.parallelism is not None:
        cfg = dataclasses.replace(
            cfg, study=dataclasses.replace(cfg.study, parallelism=args.parallelism)
        )
    if args.out is not None:
        cfg = dataclasses.replace(
            cfg, outputs=dataclasses.replace(cfg.outputs, out_dir=args.out)
        )
    if args.format is not None:
        cfg = dataclasses.replace(
            cfg, outputs=dataclasses.replace(cfg.outputs, format=args.format)
        )
    cfg.validate()
    return cfg


def _cmd_init(args) -> int:
    text = config_template()
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        path = Path(args.out) / "experiment.ini"
        path.write_text(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_kernel_check(args) -> int:
    cfg = _load_config(args)
    spec = cfg.observation.kernel_spec()
    report = kernel_report(spec, cfg.model.n_modes, cfg.observation.deltas)
    if args.format == "json" or args.out:
        payload = json.dumps(report, indent=1, default=float)
        if args.out:
            path = Path(args.out)
            path.mkdir(parents=True, exist_ok=True)
            (path / "kernel_report.json").write_text(payload)
            print(f"wrote {path / 'kernel_report.json'}")
        else:
            print(payload)
        return 0
    print(f"kernel at x0={report['x0']} support={report['support']}")
    print(f"  |K|_L2      = {report['norm_K']:.12e}")
    print(f"  |K'|_L2     = {report['norm_Kprime']:.12e}")
    print(f"  max scale   = {report['max_scale']:.6f}")
    for name, value in report["assumption_checks"].items():
        print(f"  {name}: {value}")
    for delta, entry in report["per_delta"].items():
        print(f"  delta={delta}: {entry}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    solver = cfg.model.solver_config()
    plan = solver.plan(cfg.study.base_seed, args.replication)
    traj = simulate(solver, plan, store_stride=args.store_stride)
    out = Path(cfg.outputs.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    suffix = "npz" if cfg.outputs.format == "json" else "csv"
    suffix = "npz" if args.binary else suffix
    path = out / f"trajectory_rep{args.replication}.{suffix}"
    dump_trajectory(traj, path, fmt="npz" if suffix == "npz" else "csv", seed=cfg.study.base_seed)
    print(f"wrote {path} (blow_up={traj.blow_up})")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_config(args)
    delta = args.delta if args.delta is not None else cfg.observation.deltas[0]
    record = run_replication(cfg, delta, args.replication)
    if record.failed:
        print(f"replication failed (blow_up={record.blow_up})")
        return 2
    print(f"delta={record.delta} replication={record.replication_id}")
    print(f"  theta_hat   = {record.theta_hat:.10g}")
    print(f"  fisher_info = {record.fisher_info:.10g}")
    for level, (lo, hi) in sorted(record.ci.items()):
        print(f"  ci{int(round(level * 100))}        = [{lo:.10g}, {hi:.10g}]")
    return 0


def _cmd_decompose(args) -> int:
    cfg = _load_config(args)
    delta = args.delta if args.delta is not None else cfg.observation.deltas[0]
    solver = cfg.model.solver_config()
    plan = solver.plan(cfg.study.base_seed, args.replication)
    kernel = cfg.observation.kernel_spec()
    coeffs = kernel_coefficients(kernel, delta, cfg.model.n_modes)
    traj = simulate(solver, plan, with_linear_part=True, drift_probes=coeffs[None, :])
    if traj.blow_up:
        print(f"replication blew up at step {traj.blow_up_step}")
        return 2
    stride = int(round(cfg.observation.dt_obs / cfg.model.dt))
    obs = observe(traj, kernel, delta, cfg.observation.dt_obs, coefficients=coeffs)
    decomp = error_decomposition(
        traj, obs, kernel, drift_series=traj.drift_projections[0][::stride]
    )
    result = estimate(obs, kernel, cfg.study.confidence_levels, diagnostics=decomp)
    print(f"delta={delta} replication={args.replication}")
    print(f"  theta_hat          = {result.theta_hat:.10g}")
    print(f"  fisher_info        = {decomp.fisher_info:.10g}")
    print(f"  drift_bias         = {decomp.drift_bias:.10g}")
    print(f"  martingale_part    = {decomp.martingale_part:.10g}")
    print(f"  fisher_info_linear = {decomp.fisher_info_linear:.10g}")
    return 0


def _cmd_study(args) -> int:
    cfg = _load_config(args)
    existing = None
    records_path = Path(cfg.outputs.out_dir) / "records.csv"
    if args.resume and records_path.exists():
        existing = read_records_csv(records_path, cfg)
        print(f"resuming: {len(existing)} records already present")
    try:
        summary, records = run_study(cfg, existing_records=existing)
    except FailureBudgetExceeded as exc:
        emit_results(exc.summary, exc.records, cfg)
        print(f"study failed: {exc}", file=sys.stderr)
        return 2
    paths = emit_results(summary, records, cfg)
    for delta in sorted(summary.per_delta, reverse=True):
        entry = summary.per_delta[delta]
        print(
            f"delta={delta:g}: n_ok={entry.n_ok} mean={entry.mean_theta_hat:.6g} "
            f"rmse={entry.rmse:.4g} var_ratio={entry.variance_ratio:.3f} "
            f"ks_p={entry.ks_pvalue:.3f} coverage={ {k: round(v, 3) for k, v in entry.coverage.items()} }"
        )
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="burgerslab",
        description="Simulation and local-measurement diffusivity inference studies.",
    )
    parser.add_argument("--config", help="experiment config file (ini)")
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    parser.add_argument("--parallelism", type=int, default=None, help="worker processes")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("init", help="emit a config template with explicit defaults")
    sub.add_parser("kernel-check", help="kernel self-test report")

    p_sim = sub.add_parser("simulate", help="dump one trajectory")
    p_sim.add_argument("--replication", type=int, default=0)
    p_sim.add_argument("--store-stride", type=int, default=1)
    p_sim.add_argument("--binary", action="store_true", help="dump npz instead of csv")

    p_est = sub.add_parser("estimate", help="run and print one replication")
    p_est.add_argument("--replication", type=int, default=0)
    p_est.add_argument("--delta", type=float, default=None)

    p_dec = sub.add_parser("decompose", help="error-decomposition diagnostics")
    p_dec.add_argument("--replication", type=int, default=0)
    p_dec.add_argument("--delta", type=float, default=None)

    p_study = sub.add_parser("study", help="full Monte Carlo study")
    p_study.add_argument("--resume", action="store_true", help="skip completed replications")

    args = parser.parse_args(argv)
    handlers = {
        "init": _cmd_init,
        "kernel-check": _cmd_kernel_check,
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "decompose": _cmd_decompose,
        "study": _cmd_study,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
