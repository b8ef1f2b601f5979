"""Command-line entry point: ``lqr-ac {check,solve,train,sweep}``."""

import argparse
import json
import sys
import time

import numpy as np

from . import harness
from . import model as lqr
from .checks import precondition_radius, run_checks
from .errors import LqrError, ModelParseError, UnstableGain
from .numerics import operator_norm

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_ABORT = 0, 1, 2, 3


def _matrix(M):
    return np.array2string(np.asarray(M), precision=6, suppress_small=True, max_line_width=120)


def cmd_check(args, out):
    model = harness.load_model(args.model)
    radius = precondition_radius(model)
    if radius >= 1.0:
        err = UnstableGain(radius)
        print(f"FAIL  initial gain K0 = 0 is not stabilizing: {err}", file=out)
        return EXIT_VERIFY
    results = run_checks(model, seed=0 if args.seed is None else args.seed)
    for r in results:
        print(r.line(), file=out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=out)
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed", file=out)
    return EXIT_OK


def cmd_solve(args, out):
    model = harness.load_model(args.model)
    P, K = lqr.solve_riccati(model)
    ops = lqr.stationary_operators(model, K)
    G = lqr.natural_grad_G(model, K, ops)
    report = {
        "P_star": P.tolist(),
        "K_star": K.tolist(),
        "J_star": ops.J_K,
        "rho_closed_loop": ops.rho,
        "riccati_residual": lqr.riccati_residual(model, P),
        "G_norm_F": float(np.linalg.norm(G)),
        "norm_K_star": operator_norm(K),
        "norm_theta_star_F": float(np.linalg.norm(ops.theta_K)),
    }
    print(f"P* =\n{_matrix(P)}", file=out)
    print(f"K* =\n{_matrix(K)}", file=out)
    for key in ("J_star", "rho_closed_loop", "riccati_residual", "G_norm_F", "norm_K_star", "norm_theta_star_F"):
        print(f"{key} = {report[key]:.12g}", file=out)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    return EXIT_OK


def cmd_train(args, out):
    model = harness.load_model(args.model)
    if not args.config:
        raise ModelParseError("train needs --config")
    cfg = harness.load_train_config(args.config, seed=args.seed)
    if not args.out:
        raise ModelParseError("train needs --out")
    start = time.perf_counter()
    result = harness.run_single(model, cfg, csv_path=args.out)
    elapsed = time.perf_counter() - start
    if result.log:
        last = result.log[-1]
        print(f"T={cfg.T} steps={len(result.log)} critic_err_sq={last.critic_err_sq:.6g} "
              f"actor_gap={last.actor_gap:.6g} ({elapsed:.1f}s)", file=out)
    if result.error is not None:
        print(f"aborted: {type(result.error).__name__}: {result.error}", file=out)
        return EXIT_ABORT
    return EXIT_OK


def cmd_sweep(args, out):
    if not args.config:
        raise ModelParseError("sweep needs --config (experiment file)")
    spec = harness.load_experiment(args.config, seed=args.seed)
    if args.model:
        spec.model = harness.load_model(args.model)
    start = time.perf_counter()
    result = harness.run_sweep(spec, out_dir=args.out, threads=args.threads)
    elapsed = time.perf_counter() - start
    print(f"{'T':>6s} {'ok':>3s} {'fail':>4s} {'mean critic_err_sq':>20s} {'mean actor_gap':>16s}", file=out)
    for T in spec.t_list:
        c = result.mean_critic.get(T, float("nan"))
        a = result.mean_actor.get(T, float("nan"))
        print(f"{T:>6d} {result.completed[T]:>3d} {result.failed[T]:>4d} {c:>20.6g} {a:>16.6g}", file=out)
    if result.slope_critic is None:
        print("slopes unavailable (fewer than two T values completed)", file=out)
    else:
        print(f"slope_critic = {result.slope_critic:.4f}  slope_actor = {result.slope_actor:.4f}", file=out)
    maxima = result.maxima()
    print("monitor maxima: " + ", ".join(f"{k}={v:.4f}" for k, v in maxima.items()), file=out)
    print(f"elapsed {elapsed:.1f}s", file=out)
    n_failed = sum(result.failed.values())
    if n_failed:
        print(f"{n_failed} run(s) aborted and were excluded", file=out)
        return EXIT_ABORT
    return EXIT_OK


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "train": cmd_train, "sweep": cmd_sweep}


def build_parser():
    parser = argparse.ArgumentParser(prog="lqr-ac", description="Actor-critic for stochastic LQR.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "run the analytic verification suite on a model",
        "solve": "solve the Riccati equation and report P*, K*, J*",
        "train": "one training run, written as CSV",
        "sweep": "multi-T sweep with slope regression",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=(name in ("check", "solve", "train")),
                       help="model JSON file or built-in name (example1, example2)")
        p.add_argument("--config", help="training config (train) or experiment file (sweep)")
        p.add_argument("--out", help="output path (CSV for train, directory for sweep)")
        p.add_argument("--seed", type=int, help="overrides the seed in the config file")
        p.add_argument("--threads", type=int, default=1, help="parallel processes for sweep")
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except ModelParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except LqrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
