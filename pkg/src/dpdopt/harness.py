"""Experiment configuration, orchestration, and machine-readable outputs.

Configs are flat key = value text with dotted section prefixes:

    topology.kind = ring            # ring | erdos-renyi
    topology.n = 10
    topology.p_edge = 0.35          # erdos-renyi only
    topology.seed = 7               # erdos-renyi only
    problem.m = 3
    problem.p = 2
    problem.omega_min = 0.5
    problem.omega_max = 1.5
    problem.seed = 11
    schedule.gamma = 0.05
    schedule.beta = 10
    schedule.q1 = 0.97
    schedule.q2 = 0.99
    schedule.epsilon = 1
    schedule.delta = 1
    run.algorithm = alg1
    run.iterations = 200
    run.trials = 100
    run.seed = 0
    run.retain = false              # optional
    output.trace = trace.csv        # optional
    output.summary = summary.json   # optional

Loading validates everything at once and reports the full list of
violations, not just the first. Outputs are byte-deterministic functions of
(config, master seed): the trace CSV has one row per (trial, k) and the
summary JSON carries the config echo, aggregate curves, final-residual
statistics, and a sha256 content hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .engine import ALGORITHMS, Trace, monte_carlo
from .errors import ConfigError, ScheduleError
from .objective import Problem, optimum, random_problem
from .schedule import ScheduleParams, privacy_spent
from .topology import (
    Graph,
    WeightMatrix,
    connected_erdos_renyi,
    metropolis_weights,
    ring,
)

__all__ = [
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "build_graph",
    "build_problem",
    "run_experiment",
    "canonical_json_bytes",
    "content_hash",
]

_TOPOLOGY_KINDS = ("ring", "erdos-renyi")

_REQUIRED = (
    "topology.kind",
    "topology.n",
    "problem.m",
    "problem.p",
    "problem.omega_min",
    "problem.omega_max",
    "problem.seed",
    "schedule.gamma",
    "schedule.beta",
    "schedule.q1",
    "schedule.q2",
    "schedule.epsilon",
    "schedule.delta",
    "run.algorithm",
    "run.iterations",
    "run.trials",
    "run.seed",
)

_OPTIONAL = (
    "topology.p_edge",
    "topology.seed",
    "run.retain",
    "output.trace",
    "output.summary",
)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int
    p_edge: float | None
    topology_seed: int | None
    m: int
    p: int
    omega_range: tuple[float, float]
    problem_seed: int
    schedule: ScheduleParams
    algorithm: str
    iterations: int
    trials: int
    seed: int
    retain: bool
    trace_path: str | None
    summary_path: str | None
    raw: tuple  # ((key, value) pairs as parsed, for echoing into summaries


def _parse_kv(text: str) -> tuple[dict, list[str]]:
    pairs = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in pairs:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        pairs[key] = value
    return pairs, problems


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse and validate a config from its text; collects all violations."""
    pairs, problems = _parse_kv(text)

    known = set(_REQUIRED) | set(_OPTIONAL)
    for key in pairs:
        if key not in known:
            problems.append(f"unknown key {key!r}")
    for key in _REQUIRED:
        if key not in pairs:
            problems.append(f"missing key {key!r}")

    def take(key, conv, check=None, explain=""):
        if key not in pairs:
            return None
        try:
            value = conv(pairs[key])
        except ValueError:
            problems.append(f"{key}: cannot parse {pairs[key]!r} as {conv.__name__}")
            return None
        if check is not None and not check(value):
            problems.append(f"{key}: {explain}, got {pairs[key]}")
            return None
        return value

    def boolean(text: str) -> bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(text)

    boolean.__name__ = "boolean"

    kind = take("topology.kind", str, lambda s: s in _TOPOLOGY_KINDS,
                f"must be one of {_TOPOLOGY_KINDS}")
    n = take("topology.n", int, lambda v: v >= 3, "must be >= 3")
    p_edge = take("topology.p_edge", float, lambda v: 0.0 < v <= 1.0,
                  "must be in (0, 1]")
    topo_seed = take("topology.seed", int)
    if kind == "erdos-renyi":
        if p_edge is None and "topology.p_edge" not in pairs:
            problems.append("topology.p_edge: required for erdos-renyi")
        if topo_seed is None and "topology.seed" not in pairs:
            problems.append("topology.seed: required for erdos-renyi")

    m = take("problem.m", int, lambda v: v >= 1, "must be >= 1")
    p = take("problem.p", int, lambda v: v >= 1, "must be >= 1")
    omega_min = take("problem.omega_min", float)
    omega_max = take("problem.omega_max", float)
    if omega_min is not None and omega_max is not None and omega_min > omega_max:
        problems.append(
            f"problem.omega_min: must be <= problem.omega_max, got {omega_min} > {omega_max}"
        )
    problem_seed = take("problem.seed", int)

    sched_values = {
        name: take(f"schedule.{name}", float)
        for name in ("gamma", "beta", "q1", "q2", "epsilon", "delta")
    }
    schedule = None
    if all(v is not None for v in sched_values.values()):
        try:
            schedule = ScheduleParams(**sched_values)
        except ScheduleError as exc:
            problems.extend(f"schedule: {part}" for part in str(exc).split("; "))

    algorithm = take("run.algorithm", str, lambda s: s in ALGORITHMS,
                     f"must be one of {ALGORITHMS}")
    iterations = take("run.iterations", int, lambda v: v >= 1, "must be >= 1")
    trials = take("run.trials", int, lambda v: v >= 1, "must be >= 1")
    seed = take("run.seed", int)
    retain = take("run.retain", boolean)
    if algorithm is not None and schedule is not None:
        noiseless = ("gt-noiseless", "alg1-noiseless-constant", "dgd-noiseless-constant")
        if algorithm in noiseless and schedule.delta != 0.0:
            problems.append(
                f"run.algorithm: {algorithm} is noiseless and needs schedule.delta = 0"
            )

    if problems:
        raise ConfigError(problems)

    return ExperimentConfig(
        kind=kind,
        n=n,
        p_edge=p_edge,
        topology_seed=topo_seed,
        m=m,
        p=p,
        omega_range=(omega_min, omega_max),
        problem_seed=problem_seed,
        schedule=schedule,
        algorithm=algorithm,
        iterations=iterations,
        trials=trials,
        seed=seed,
        retain=bool(retain),
        trace_path=pairs.get("output.trace"),
        summary_path=pairs.get("output.summary"),
        raw=tuple(sorted(pairs.items())),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    return parse_config_text(text)


def build_graph(cfg: ExperimentConfig) -> tuple[Graph, WeightMatrix]:
    if cfg.kind == "ring":
        g = ring(cfg.n)
    else:
        g = connected_erdos_renyi(cfg.n, cfg.p_edge, cfg.topology_seed)
    return g, metropolis_weights(g)


def build_problem(cfg: ExperimentConfig) -> Problem:
    return random_problem(cfg.n, cfg.m, cfg.p, cfg.omega_range, cfg.problem_seed)


def canonical_json_bytes(obj) -> bytes:
    """Deterministic JSON encoding: sorted keys, no whitespace, no NaN."""
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), allow_nan=False
    ).encode("utf-8")


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json_bytes(obj)).hexdigest()


def format_trace_csv(traces: list[Trace]) -> str:
    # repr of a Python float round-trips exactly; numpy scalars must be
    # unwrapped first or they stringify as np.float64(...)
    lines = ["trial,k,residual,consensus_err,mean_err,step_norm"]
    for t, tr in enumerate(traces):
        for k in range(tr.iterations + 1):
            lines.append(
                f"{t},{k},{float(tr.residual[k])!r},{float(tr.consensus_err[k])!r},"
                f"{float(tr.mean_err[k])!r},{float(tr.step_norm[k])!r}"
            )
    return "\n".join(lines) + "\n"


def summarize(cfg: ExperimentConfig, traces: list[Trace], trace_csv: str) -> dict:
    residuals = np.stack([tr.residual for tr in traces])
    finals = residuals[:, -1]
    body = {
        "config": {k: v for k, v in cfg.raw},
        "trials": len(traces),
        "iterations": cfg.iterations,
        "privacy_spent": privacy_spent(cfg.schedule, cfg.iterations),
        "residual_mean": residuals.mean(axis=0).tolist(),
        "residual_std": residuals.std(axis=0).tolist(),
        "final_residual": {
            "mean": float(finals.mean()),
            "std": float(finals.std()),
            "min": float(finals.min()),
            "max": float(finals.max()),
        },
        "converged": bool(finals.mean() < 1e-8),
        "trace_sha256": hashlib.sha256(trace_csv.encode("utf-8")).hexdigest(),
    }
    body["content_hash"] = content_hash(body)
    return body


def _write(path: str, data: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def run_experiment(
    cfg: ExperimentConfig,
    jobs: int = 1,
    trace_path: str | None = None,
    summary_path: str | None = None,
) -> dict:
    """Run the configured ensemble and write the artifacts.

    Returns the summary dict. trace_path/summary_path override the config's
    output section; files are only written for paths that are set.
    """
    _, wm = build_graph(cfg)
    pr = build_problem(cfg)
    traces = monte_carlo(
        pr,
        wm,
        cfg.schedule,
        cfg.algorithm,
        cfg.iterations,
        cfg.trials,
        cfg.seed,
        jobs=jobs,
    )
    trace_csv = format_trace_csv(traces)
    summary = summarize(cfg, traces, trace_csv)

    trace_path = trace_path or cfg.trace_path
    summary_path = summary_path or cfg.summary_path
    if trace_path:
        _write(trace_path, trace_csv)
    if summary_path:
        _write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
