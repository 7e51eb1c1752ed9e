"""Command-line entry point.

    ttsa run            --config cfg.json [--seed n] [--jobs n] [--out dir]
    ttsa mixing         --mdp twostate [--horizon n]
    ttsa probe-variance --mdp twostate --M 10,100,1000 [--reps n] [--seed n]
    ttsa sweep          --config cfg.json [--out dir]
    ttsa constants      --algo nonlinear-tdc --all-ones | --config cfg.json

Exit codes: 0 success, 2 config error, 3 assumption violation,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ttsa.errors import AssumptionViolation, ConfigError, ResourceCapError, ValidationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_RESOURCE = 4


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="ttsa", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the seed list with one seed")
    run.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    run.add_argument("--out", default=None, help="override the output directory")

    mixing = sub.add_parser("mixing", help="fit a geometric mixing envelope")
    mixing.add_argument("--mdp", required=True)
    mixing.add_argument("--horizon", type=int, default=60)
    mixing.add_argument("--out", default=None)

    probe = sub.add_parser("probe-variance", help="mini-batch variance probe")
    probe.add_argument("--mdp", default="twostate")
    probe.add_argument("--M", default="10,30,100,300,1000")
    probe.add_argument("--reps", type=int, default=600)
    probe.add_argument("--seed", type=int, default=0)
    probe.add_argument("--out", default=None)

    sweep = sub.add_parser("sweep", help="samples-to-accuracy sweep")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--eps", default="1e-1,3e-2,1e-2")
    sweep.add_argument("--seeds", default="0,1,2,3")
    sweep.add_argument("--out", default=None)

    consts = sub.add_parser("constants", help="schedule-constant calculators")
    consts.add_argument("--algo", required=True,
                        choices=["linear-tdc", "nonlinear-tdc", "greedy-gq"])
    consts.add_argument("--all-ones", action="store_true",
                        help="evaluate the formulas with every input set to 1")
    consts.add_argument("--config", default=None)
    consts.add_argument("--gamma", type=float, default=0.9)
    consts.add_argument("--alpha", type=float, default=0.1)
    consts.add_argument("--beta", type=float, default=0.1)
    consts.add_argument("--rho", type=float, default=0.5, help="mixing decay for --all-ones")
    consts.add_argument("--out", default=None)
    return parser.parse_args(argv)


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def _cmd_run(args) -> int:
    from ttsa.harness import load_config, run_experiment

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.out is not None:
        cfg.out_dir = args.out
    summary = run_experiment(cfg, jobs=max(args.jobs, 1))
    print(json.dumps(summary["seed_mean"], indent=2, sort_keys=True))
    if summary["assumption_violations"]:
        print(
            f"{len(summary['assumption_violations'])} assumption violation(s) recorded",
            file=sys.stderr,
        )
        return EXIT_ASSUMPTION
    return EXIT_OK


def _cmd_mixing(args) -> int:
    from ttsa.harness import behavior_mixing
    from ttsa.mdp import load_mdp, uniform_policy

    mdp = load_mdp(args.mdp)
    mixing, _, mu = behavior_mixing(mdp, uniform_policy(mdp), args.horizon)
    _emit(
        {
            "mdp": args.mdp,
            "kappa": mixing.kappa,
            "rho": mixing.rho,
            "max_residual": mixing.max_residual,
            "factor": mixing.factor,
            "stationary": list(mu),
        },
        args.out,
    )
    return EXIT_OK


def _cmd_probe(args) -> int:
    from ttsa.analysis import batch_variance_probe, _loglog_fit
    from ttsa.harness import behavior_mixing
    from ttsa.mdp import induced_chain, load_mdp, stationary_distribution, uniform_policy

    mdp = load_mdp(args.mdp)
    policy = uniform_policy(mdp)
    mixing, chain, mu = behavior_mixing(mdp, policy, 60)
    batch_sizes = [int(x) for x in args.M.split(",")]
    X = np.eye(mdp.n_states)  # indicator features, C_x = 1
    result = batch_variance_probe(
        chain, mu, X, batch_sizes, reps=args.reps, seed=args.seed, mixing=mixing
    )
    fit = _loglog_fit(result.batch_sizes, result.empirical)
    _emit(
        {
            "mdp": args.mdp,
            "batch_sizes": result.batch_sizes,
            "empirical": result.empirical,
            "std_err": result.std_err,
            "bound": result.bound,
            "satisfied": result.satisfied(),
            "loglog_slope": fit.slope,
        },
        args.out,
    )
    return EXIT_OK if result.satisfied() else EXIT_ASSUMPTION


def _cmd_sweep(args) -> int:
    from ttsa.harness import load_config, sweep_experiment

    cfg = load_config(args.config)
    eps_list = [float(x) for x in args.eps.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")]
    doc = sweep_experiment(cfg, eps_list, seeds)
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_constants(args) -> int:
    doc: dict = {"algo": args.algo}
    if args.all_ones:
        if args.algo == "nonlinear-tdc":
            from ttsa.nonlinear_tdc import compute_Cf, compute_Cg, compute_Lw

            r_w = 1.0 * (1.0 + 2.0 * 1.0) / 1.0  # C_phi (r_max + 2 C_v) / lambda_v
            doc.update(
                R_w=r_w,
                L_w=compute_Lw(1, 1, 1, 1, 1, 1, args.gamma),
                C_g=compute_Cg(1, 1, 1, r_w, 1, args.gamma),
                C_f=compute_Cf(1, 1, r_w, 1),
                gamma=args.gamma,
            )
        elif args.algo == "greedy-gq":
            c2 = 32.0 * (2.0 * (1.0 + 1.0) ** 4 * 1.0 + (1.0 + 1.0) * 1.0)
            a, b = args.alpha, args.beta
            c1 = c2 + (192.0 / b) * (4.0 + 1.0) * (
                32.0 * a**2 / b + 2.0 * b + 2.0 * b**2
            )
            doc.update(C2=c2, C1=c1, alpha=a, beta=b)
        else:
            a, b = args.alpha, args.beta
            mix = (1.0 + (1.0 - 1.0) * args.rho) / (1.0 - args.rho)
            lead = 256.0 * (4.0 + 1.0) / min(b, a)
            steps = 32.0 * a**2 / b + 2.0 * b + 2.0 * b**2 + 2.0 * a + 3.0 * a**2
            doc.update(A1=lead * steps * mix, alpha=a, beta=b, rho=args.rho)
        _emit(doc, args.out)
        return EXIT_OK
    if not args.config:
        raise ConfigError("constants needs either --all-ones or --config")
    from ttsa.harness import build_context, load_config

    cfg = load_config(args.config)
    context = build_context(cfg)
    doc.update(context["constants"])
    doc["mixing"] = {
        "kappa": context["mixing"].kappa,
        "rho": context["mixing"].rho,
        "factor": context["mixing"].factor,
    }
    _emit(doc, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    handlers = {
        "run": _cmd_run,
        "mixing": _cmd_mixing,
        "probe-variance": _cmd_probe,
        "sweep": _cmd_sweep,
        "constants": _cmd_constants,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
