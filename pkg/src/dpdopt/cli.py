"""Command-line front end.

Subcommands: run (experiment to trace CSV + summary JSON), audit
(sensitivity envelopes and ordering checks), spectral (mixing constants and
feasible decay rates for a config's graph), tune (accuracy-bound parameter
search), mnmi (three-agent leakage scenario), compare (residual curves for
several dynamics on one problem). --format csv|json selects machine output;
without it a short human-readable text is printed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import analysis, harness, privacy_eval
from .engine import ALGORITHMS, monte_carlo
from .errors import ConfigError
from .objective import make_adjacent
from .topology import spectral_constants

__all__ = ["cli", "main"]


def _emit(path: str | None, data: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data)


def _schedule_with(cfg, epsilon=None):
    if epsilon is None:
        return cfg.schedule
    return dataclasses.replace(cfg.schedule, epsilon=epsilon)


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    summary = harness.run_experiment(
        cfg, jobs=args.jobs, trace_path=args.trace, summary_path=args.summary
    )
    final = summary["final_residual"]
    if args.format == "json":
        _emit(None, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        print(
            f"{cfg.algorithm}: trials={summary['trials']} T={summary['iterations']} "
            f"final residual {final['mean']:.6g} +- {final['std']:.6g} "
            f"(spent {summary['privacy_spent']:.6g})"
        )
        print(f"content hash {summary['content_hash']}")
    return 0


def _cmd_audit(args) -> int:
    cfg = harness.load_config(args.config)
    _, wm = harness.build_graph(cfg)
    pr = harness.build_problem(cfg)
    sp = cfg.schedule
    delta = sp.delta if args.delta is None else args.delta
    pair = make_adjacent(pr, args.i0, delta, cfg.seed)
    trials = args.trials or cfg.trials
    T = args.iterations or cfg.iterations
    report = analysis.compare_sensitivities(pair, wm, sp, T, trials, cfg.seed)

    env = report.envelopes[args.algorithm]
    if args.format == "csv":
        lines = ["k,delta_hat,bound,margin"]
        for i in range(T):
            lines.append(
                f"{i + 1},{float(env.delta_hat[i])!r},{float(env.bound[i])!r},"
                f"{float(env.margin[i])!r}"
            )
        _emit(args.out, "\n".join(lines) + "\n")
        return 0

    checks = {
        "bound alg1": report.envelopes["alg1"].within_bound,
        "untouched rows alg1": report.envelopes["alg1"].off_target_max == 0.0,
    }
    for key in report.ordering_gap:
        checks[f"ordering {key}"] = report.ordering_holds(key)
    for key in report.recursion_gap:
        checks[f"recursion {key}"] = report.recursion_holds(key)

    if args.format == "json":
        body = {
            "checks": checks,
            "ordering_gap": report.ordering_gap,
            "recursion_gap": report.recursion_gap,
            "envelopes": {
                name: {
                    "delta_hat": e.delta_hat.tolist(),
                    "bound": e.bound.tolist(),
                    "trials": e.trials,
                    "off_target_max": e.off_target_max,
                }
                for name, e in report.envelopes.items()
            },
        }
        _emit(args.out, json.dumps(body, indent=2, sort_keys=True) + "\n")
        return 0

    failed = 0
    for name, ok in checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
        failed += not ok
    return 1 if failed else 0


def _cmd_spectral(args) -> int:
    cfg = harness.load_config(args.config)
    _, wm = harness.build_graph(cfg)
    sigma, w_minus_i = spectral_constants(wm)
    q1_max = analysis.q1_bound(sigma, args.theta, w_minus_i)
    block = analysis.atilde(sigma, cfg.schedule.q1, w_minus_i)
    contractive = analysis.rho_less_than(block, 1.0)
    rho = float(np.max(np.abs(np.linalg.eigvals(block))))
    rows = {
        "sigma": sigma,
        "w_minus_i_norm": w_minus_i,
        "q1_bound": q1_max,
        "q1": cfg.schedule.q1,
        "rho_atilde": rho,
        "contractive": contractive,
    }
    if args.format == "json":
        _emit(None, json.dumps(rows, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv":
        _emit(
            None,
            "key,value\n" + "\n".join(f"{k},{v!r}" for k, v in rows.items()) + "\n",
        )
    else:
        print(f"sigma = {sigma:.12g}")
        print(f"||W - I|| = {w_minus_i:.12g}")
        print(f"q1 bound (theta={args.theta:g}) = {q1_max:.12g}")
        print(
            f"q1 = {cfg.schedule.q1:g}: rho(A~) = {rho:.6g} "
            f"({'contractive' if contractive else 'NOT contractive'})"
        )
    return 0


def _cmd_tune(args) -> int:
    gamma, q1, q2, bound = analysis.tune(
        args.epsilon,
        args.delta,
        args.mu,
        args.L,
        args.n,
        args.p,
        args.c1,
        args.c2,
        restarts=args.restarts,
        seed=args.seed,
    )
    rows = {"gamma": gamma, "q1": q1, "q2": q2, "bound": bound}
    if args.format == "json":
        _emit(None, json.dumps(rows, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv":
        _emit(None, "gamma,q1,q2,bound\n" + f"{gamma!r},{q1!r},{q2!r},{bound!r}\n")
    else:
        print(f"gamma = {gamma:.6g}, q1 = {q1:.6g}, q2 = {q2:.6g}")
        print(f"accuracy bound = {bound:.6g}")
    return 0


def _cmd_mnmi(args) -> int:
    cfg = harness.load_config(args.config)
    _, wm = harness.build_graph(cfg)
    pr = harness.build_problem(cfg)
    sp = _schedule_with(cfg, args.epsilon)
    trials = args.trials or cfg.trials
    T = args.iterations or cfg.iterations
    ds = privacy_eval.collect_attacker_view(pr, wm, sp, T, trials, cfg.seed)
    report = privacy_eval.mnmi_report(
        ds, k_neighbors=args.neighbors, variant=args.variant, joint=args.joint
    )
    if args.dataset:
        est = ds.estimate(args.variant)
        lines = ["trial,k,v,attacker_estimate"]
        for t in range(ds.trials):
            for k in range(ds.K):
                lines.append(f"{t},{k + 1},{float(ds.V[t, k])!r},{float(est[t, k])!r}")
        _emit(args.dataset, "\n".join(lines) + "\n")

    if args.format == "json":
        body = {
            "mnmi": report.value,
            "argmax_k": report.argmax_k,
            "ratios": [None if np.isnan(r) else r for r in report.ratios],
            "skipped": list(report.skipped),
            "epsilon": sp.epsilon,
            "variant": args.variant,
            "joint": args.joint,
        }
        _emit(args.out, json.dumps(body, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv":
        lines = ["k,ratio"]
        for i, r in enumerate(report.ratios):
            lines.append(f"{i + 1},{'' if np.isnan(r) else repr(float(r))}")
        _emit(args.out, "\n".join(lines) + "\n")
    else:
        print(
            f"M-NMI = {report.value:.4g} at k = {report.argmax_k} "
            f"(epsilon = {sp.epsilon:g}, variant = {args.variant}, "
            f"trials = {trials}, K = {T})"
        )
    return 0


def _cmd_compare(args) -> int:
    cfg = harness.load_config(args.config)
    _, wm = harness.build_graph(cfg)
    pr = harness.build_problem(cfg)
    sp = _schedule_with(cfg, args.epsilon)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for alg in algorithms:
        if alg not in ALGORITHMS:
            print(f"unknown algorithm {alg!r}; expected one of {ALGORITHMS}",
                  file=sys.stderr)
            return 2
    trials = args.trials or cfg.trials

    curves = {}
    for alg in algorithms:
        traces = monte_carlo(pr, wm, sp, alg, cfg.iterations, trials, cfg.seed,
                             jobs=args.jobs)
        stats = analysis.trace_metrics(traces)
        residual = np.stack([tr.residual for tr in traces]).mean(axis=0)
        curves[alg] = (residual, stats)

    if args.format == "json":
        body = {
            alg: {
                "residual_mean": residual.tolist(),
                "final_residual_mean": stats.final_residual_mean,
                "final_residual_std": stats.final_residual_std,
            }
            for alg, (residual, stats) in curves.items()
        }
        _emit(args.out, json.dumps(body, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv":
        lines = ["algorithm,k,residual_mean"]
        for alg, (residual, _stats) in curves.items():
            for k, value in enumerate(residual):
                lines.append(f"{alg},{k},{float(value)!r}")
        _emit(args.out, "\n".join(lines) + "\n")
    else:
        for alg, (_residual, stats) in curves.items():
            print(
                f"{alg}: final residual {stats.final_residual_mean:.6g} "
                f"+- {stats.final_residual_std:.6g}"
            )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpdopt",
        description="simulate and analyze differentially private distributed optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p, choices=("csv", "json")):
        p.add_argument("--format", choices=choices, default=None,
                       help="machine-readable output format")

    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trace", help="override output.trace")
    p.add_argument("--summary", help="override output.summary")
    fmt(p, choices=("json",))
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("audit", help="sensitivity envelopes and orderings")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--i0", type=int, default=0, help="perturbed agent index")
    p.add_argument("--delta", type=float, help="override adjacency bound")
    p.add_argument("--algorithm", choices=analysis.AUDIT_ALGORITHMS, default="alg1",
                   help="which envelope the CSV body reports")
    p.add_argument("--out", help="write output here instead of stdout")
    fmt(p)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("spectral", help="mixing constants for a config's graph")
    p.add_argument("--config", required=True)
    p.add_argument("--theta", type=float, default=2.0)
    fmt(p)
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("tune", help="minimize the accuracy bound")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    fmt(p)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("mnmi", help="three-agent leakage scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--epsilon", type=float, help="override schedule.epsilon")
    p.add_argument("--neighbors", type=int, default=3)
    p.add_argument("--variant", choices=("reconstruction", "verbatim"),
                   default="reconstruction")
    p.add_argument("--joint", action="store_true",
                   help="score the full observable triple")
    p.add_argument("--dataset", help="also dump (trial,k,v,estimate) CSV here")
    p.add_argument("--out", help="write output here instead of stdout")
    fmt(p)
    p.set_defaults(func=_cmd_mnmi)

    p = sub.add_parser("compare", help="residual curves for several dynamics")
    p.add_argument("--config", required=True)
    p.add_argument("--algorithms", required=True,
                   help="comma-separated tags, e.g. alg1,dp-dgd")
    p.add_argument("--epsilon", type=float, help="override schedule.epsilon")
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write output here instead of stdout")
    fmt(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2


def main() -> int:
    return cli(sys.argv[1:])
