"""Command-line entry point: ``regrls {simulate,identify,compare,verify}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment, lti_sim, metrics, reg_recursive, rls_baseline
from .experiment import ExperimentConfig, parse_config_text, parse_value
from .hyper_update import ProjectionContext
from .verification import verify_mode


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("experiment configuration (override --config)")
    for f in dataclasses.fields(ExperimentConfig):
        group.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="VALUE")
    parser.add_argument("--config", type=Path, help="file of 'key = value' lines")
    parser.add_argument("--print-config", action="store_true", help="print the resolved config and exit")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config is not None:
        values.update(parse_config_text(args.config.read_text(encoding="utf-8")))
    for f in dataclasses.fields(ExperimentConfig):
        raw = getattr(args, f"cfg_{f.name}", None)
        if raw is not None:
            values[f.name] = parse_value(f.name, raw)
    return ExperimentConfig(**values)


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    seed = cfg.run_seeds()[0]
    record = experiment.make_record(cfg, seed, cfg.true_system())
    path = experiment.write_dataset(record, args.out)
    print(f"wrote {len(record)} samples to {path} (snr {metrics.snr_db(record.y_clean, cfg.noise_std):.2f} dB)"
          if cfg.noise_std > 0 else f"wrote {len(record)} samples to {path}")
    return 0


def cmd_identify(args, cfg: ExperimentConfig) -> int:
    u, y = experiment.read_dataset(args.data)
    Phi = lti_sim.regressor_matrix(u, cfg.n)
    g_true = lti_sim.impulse_response(cfg.true_system(), cfg.horizon) if args.reference == "true" else None
    series = metrics.MetricsSeries(eta=[] if args.estimator == "regularized" else None)

    if args.estimator == "regularized":
        state = reg_recursive.reg_init(cfg.n, cfg.eta0(), cfg.sigma2, cfg.correction_order, cfg.max_updates)
        ctx = ProjectionContext(cfg.n, epsilon=cfg.epsilon, gamma=cfg.gamma)
    else:
        state = rls_baseline.rls_init(cfg.n, args.f0)

    for t, (phi, y_t) in enumerate(zip(Phi, y)):
        if args.estimator == "regularized":
            state, diag = reg_recursive.step(state, phi, y_t, ctx)
            eps, eta = diag.epsilon_o, state.eta.eta
        else:
            state, eps = rls_baseline.rls_step(state, phi, y_t)
            eta = None
        mse = metrics.impulse_mse(state.theta_hat, g_true, cfg.horizon) if g_true is not None else float("nan")
        series.append(t + 1, mse, metrics.fit_percent(y, Phi @ state.theta_hat), eps, eta)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "b_k"])
        for k, b in enumerate(state.theta_hat, 1):
            writer.writerow([k, format(float(b), ".17g")])
    if args.series is not None:
        experiment.emit_csv(series, args.series, ts=args.ts)
    print(f"{args.estimator}: final fit {series.fit_percent[-1]:.2f} %, taps written to {out}")
    return 0


def cmd_compare(args, cfg: ExperimentConfig) -> int:
    result = experiment.run_experiment(cfg)
    if args.outdir is not None:
        experiment.write_results(result, args.outdir, ts=args.ts)
    print(f"runs: {len(result.runs)} ok, {len(result.failed)} failed; mean SNR {result.mean_snr_db:.2f} dB")
    for seed, why in result.failed.items():
        print(f"  seed {seed} failed: {why}")
    print(f"{'estimator':<16} {'final MSE':>12} {'final fit %':>12} {'mean MSE':>12}")
    for row in experiment.summary_rows(result):
        print(f"{row['estimator']:<16} {row['final_mse_impulse']:>12.4e} {row['final_fit_percent']:>12.2f} {row['mean_mse_impulse']:>12.4e}")
    return 0 if result.ok else 1


def cmd_verify(args, cfg: ExperimentConfig) -> int:
    results = verify_mode(psi_perturbation=args.inject_fault)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regrls", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a dataset CSV (t,u,y) from the true system (nominal by default)")
    p.add_argument("--out", required=True, type=Path)
    _add_config_flags(p)

    p = sub.add_parser("identify", help="run one estimator over a dataset CSV")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--estimator", choices=["regularized", "rls"], default="regularized")
    p.add_argument("--f0", type=float, default=1.0, help="initial RLS gain diagonal")
    p.add_argument("--out", required=True, type=Path, help="CSV of estimated taps")
    p.add_argument("--series", type=Path, help="also write the per-sample metrics CSV")
    p.add_argument("--reference", choices=["true", "none"], default="true",
                   help="score the impulse-response MSE against the configured true system, or skip it")
    p.add_argument("--ts", type=float, help="sampling period used to label time in seconds")
    _add_config_flags(p)

    p = sub.add_parser("compare", help="Monte-Carlo comparison of the regularized estimator and RLS")
    p.add_argument("--outdir", type=Path)
    p.add_argument("--ts", type=float, help="sampling period used to label time in seconds")
    _add_config_flags(p)

    p = sub.add_parser("verify", help="run the oracle checks at small scale")
    p.add_argument("--inject-fault", type=float, default=0.0, metavar="DELTA",
                   help="add DELTA to the gradient (negative control)")
    _add_config_flags(p)
    return parser


COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "compare": cmd_compare, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (KeyError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.dumps())
        return 0
    np.seterr(over="raise", invalid="raise")
    return COMMANDS[args.command](args, cfg)


if __name__ == "__main__":
    sys.exit(main())
