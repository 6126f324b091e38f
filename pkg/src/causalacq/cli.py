"""Command-line entry point: TOML config, generate/run/probe, CSV/JSON output."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from causalacq.acquisition import AcqMethod
from causalacq.engine import (
    BenchmarkConfig,
    EpisodeConfig,
    consistency_probe,
    run_benchmark,
)
from causalacq.graph import GraphKind, Misspecification
from causalacq.optimizer import OptimizerConfig
from causalacq.scm import gen_instance

ROW_HEADER = ["method", "instance", "run", "step", "rel_dist", "sq_a_dist", "wall_time_s"]
SUMMARY_HEADER = [
    "method",
    "step",
    "mean_rel_dist",
    "std_across_instances",
    "sem_across_runs",
]


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "instance": {
        "kind",
        "p",
        "q",
        "expected_edges_per_node",
        "k_targets",
        "target_rule",
        "misspecification_kind",
        "misspecification_count",
    },
    "benchmark": {
        "methods",
        "instances",
        "runs",
        "T",
        "n",
        "warmup_obs",
        "base_seed",
        "known_variance",
    },
    "optimizer": {"max_iters", "grad_tol", "step_init", "backtrack_factor", "armijo_c"},
    "methods": {"kappa", "beta_explore", "mc_samples", "n_candidates", "noise_scale"},
    "output": {"dir"},
    "probe": {"T", "seed"},
}


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    for section, keys in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(keys) - _SECTIONS[section]
        if unknown:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}"
            )
    if "instance" not in raw or "benchmark" not in raw:
        raise ConfigError("config requires [instance] and [benchmark] sections")
    return raw


def _graph_kind(inst: dict) -> GraphKind:
    kind = inst.get("kind", "complete")
    if kind == "complete":
        return GraphKind.complete()
    if kind == "path":
        return GraphKind.path()
    if kind == "erdos_renyi":
        if "q" in inst:
            return GraphKind.erdos_renyi(float(inst["q"]))
        raise ConfigError("erdos_renyi needs q")
    raise ConfigError(f"unknown graph kind {kind!r}")


def _methods(cfg: dict, filter_names: list[str] | None) -> tuple[AcqMethod, ...]:
    names = cfg["benchmark"].get("methods", ["civ"])
    if filter_names:
        missing = set(filter_names) - set(names)
        if missing:
            raise ConfigError(f"--methods not in config: {', '.join(sorted(missing))}")
        names = [n for n in names if n in filter_names]
    params = cfg.get("methods", {})
    return tuple(AcqMethod(name=n, **params) for n in names)


def build_benchmark_config(
    cfg: dict, seed_override: int | None, filter_names: list[str] | None
) -> BenchmarkConfig:
    inst = cfg["instance"]
    bench = cfg["benchmark"]
    base_seed = bench.get("base_seed", 0)
    env_seed = os.environ.get("CAUSALACQ_SEED")
    if env_seed is not None:
        base_seed = int(env_seed)
    if seed_override is not None:
        base_seed = seed_override

    misspec = None
    if "misspecification_kind" in inst:
        misspec = Misspecification(
            kind=inst["misspecification_kind"],
            count=int(inst.get("misspecification_count", 1)),
        )

    opt = OptimizerConfig(**cfg.get("optimizer", {}))
    episode = EpisodeConfig(
        T=int(bench.get("T", 50)),
        n=int(bench.get("n", 1)),
        method=AcqMethod(name="civ"),  # placeholder; run_benchmark sets per-method
        warmup_obs=int(bench.get("warmup_obs", 0)),
        known_variance=bool(bench.get("known_variance", True)),
        optimizer=opt,
    )
    return BenchmarkConfig(
        kind=_graph_kind(inst),
        p=int(inst["p"]),
        k_targets=int(inst.get("k_targets", 1)),
        target_rule=inst.get("target_rule", "random"),
        methods=_methods(cfg, filter_names),
        instances=int(bench.get("instances", 1)),
        runs=int(bench.get("runs", 1)),
        episode=episode,
        base_seed=int(base_seed),
        misspecification=misspec,
    )


def _write_csv(path: Path, header: list[str], rows: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)


def cmd_generate(cfg: dict, out_dir: Path, seed_override: int | None) -> int:
    bc = build_benchmark_config(cfg, seed_override, None)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(bc.instances):
        inst = gen_instance(bc.kind, bc.p, bc.k_targets, bc.target_rule, bc.base_seed + i)
        (out_dir / f"instance_{i:03d}.json").write_text(inst.to_json())
    print(f"wrote {bc.instances} instance file(s) to {out_dir}")
    return 0


def cmd_run(
    cfg: dict, out_dir: Path, seed_override: int | None, jobs: int, filter_names
) -> int:
    bc = build_benchmark_config(cfg, seed_override, filter_names)
    result = run_benchmark(bc, jobs=jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "results.csv", ROW_HEADER, result.rows)
    _write_csv(out_dir / "summary.csv", SUMMARY_HEADER, result.summary)
    (out_dir / "summary.json").write_text(
        json.dumps({"summary": result.summary, "failures": result.failures}, indent=2)
    )
    if result.failures:
        print(json.dumps({"failures": result.failures}), file=sys.stderr)
        return 1
    print(f"wrote results to {out_dir}")
    return 0


def cmd_probe(cfg: dict, out_dir: Path, seed_override: int | None) -> int:
    bc = build_benchmark_config(cfg, seed_override, None)
    probe = cfg.get("probe", {})
    T = int(probe.get("T", 50))
    seed = int(probe.get("seed", bc.base_seed))
    inst = gen_instance(bc.kind, bc.p, bc.k_targets, bc.target_rule, bc.base_seed)
    try:
        dist = consistency_probe(inst, T, seed)
    except Exception as exc:
        print(json.dumps({"failures": [{"error": str(exc)}]}), file=sys.stderr)
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        {
            "method": "civ",
            "instance": 0,
            "run": 0,
            "step": t + 1,
            "rel_dist": float(d),
            "sq_a_dist": float(d * d),
            "wall_time_s": 0.0,
        }
        for t, d in enumerate(dist)
    ]
    _write_csv(out_dir / "probe.csv", ROW_HEADER, rows)
    print(f"wrote probe trajectory to {out_dir / 'probe.csv'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="causalacq", description="active-learning benchmark for shift interventions"
    )
    parser.add_argument("command", choices=["generate", "run", "probe"])
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--methods", default=None, help="comma-separated subset")
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out)
        if args.command == "generate":
            return cmd_generate(cfg, out_dir, args.seed)
        if args.command == "run":
            names = args.methods.split(",") if args.methods else None
            return cmd_run(cfg, out_dir, args.seed, args.jobs, names)
        return cmd_probe(cfg, out_dir, args.seed)
    except (ConfigError, OSError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
