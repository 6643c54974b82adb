"""Command-line entry point.

Five subcommands cover the full workflow: `simulate` and `eval` roll
one episode under a policy and write the trace plus metric report,
`train` runs the optimizer and writes checkpoints, `transfer` replays
a trained checkpoint on the other scenario modes, and `allocate`
disaggregates a single power command over a fleet CSV.

Every run gets its own directory (config snapshot, journal, artifacts)
and every artifact embeds the config hash. Exit codes: 0 ok, 2 bad
configuration or IO, 3 infeasible command, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import signal
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import backend
from .aggregator import allocation_to_csv, step_aggregate
from .env import EpisodeSpec, V2gEnv, write_trace_rows
from .errors import ConfigurationError, DivergenceError, InfeasibleError, V2gError
from .evaluate import UNCONTROLLED, evaluate, markdown_table
from .fleet import FleetConfig, availability, fleet_from_csv
from .grid import default_scenario, load_scenario, scenario_to_json
from .ppo import PpoConfig, Trainer, fast_config
from .ppo.checkpoint import config_hash

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGED = 4

OUTPUT_ROOT_ENV = "V2GCOORD_OUTPUT_ROOT"

BUILTIN_SCENARIOS = ("baseload", "res", "weekly", "res-weekly", "large-scale")
SCENARIO_DEFAULT_MODE = {
    "baseload": "baseload",
    "res": "res",
    "weekly": "weekly",
    "res-weekly": "weekly",
    "large-scale": "large_scale",
}
TRANSFER_MODES = ("res", "large_scale", "weekly")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2gcoord",
        description="EV-fleet charging coordination: simulate, train, evaluate, allocate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, checkpoint=False):
        p.add_argument("--scenario", default="baseload",
                       help=f"builtin name {BUILTIN_SCENARIOS} or a scenario JSON path")
        p.add_argument("--mode", default=None,
                       choices=["baseload", "res", "weekly", "large_scale"],
                       help="episode mode (default follows the scenario)")
        p.add_argument("--evs", type=int, default=50, help="fleet size")
        p.add_argument("--fleet-seed", type=int, default=1, help="fleet sampling seed")
        p.add_argument("--fleet-config", default=None, help="FleetConfig JSON path")
        p.add_argument("--noise-pct", type=float, default=None,
                       help="uniform load noise half-width (builtin scenarios)")
        p.add_argument("--scale", type=float, default=None,
                       help="scenario magnitude multiplier (builtin scenarios)")
        p.add_argument("--seed", type=int, default=0, help="run seed")
        p.add_argument("--out", default=None, help=f"output root (default ${OUTPUT_ROOT_ENV} or ./runs)")
        p.add_argument("--backend", default=None, choices=["auto", "numpy", "numba"],
                       help="kernel backend override")
        p.add_argument("--emit-plot-data", action="store_true",
                       help="write per-figure CSVs under plots/")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="trained checkpoint JSON")

    p_sim = sub.add_parser("simulate", help="roll one episode under a fixed policy")
    add_common(p_sim)
    p_sim.add_argument("--policy", default=UNCONTROLLED,
                       help="'uncontrolled' or a checkpoint path")
    p_sim.add_argument("--markdown", action="store_true", help="print a comparison table")

    p_train = sub.add_parser("train", help="optimize a coordination policy")
    add_common(p_train)
    p_train.add_argument("--episodes", type=int, default=None, help="episode budget override")
    p_train.add_argument("--preset", default="fast", choices=["reference", "fast"],
                         help="hyperparameter preset")
    p_train.add_argument("--ppo-config", default=None, help="PpoConfig overrides JSON path")
    p_train.add_argument("--checkpoint-every", type=int, default=None,
                         help="checkpoint cadence in episodes")

    p_eval = sub.add_parser("eval", help="score a trained checkpoint against uncontrolled")
    add_common(p_eval, checkpoint=True)
    p_eval.add_argument("--markdown", action="store_true", help="print a comparison table")

    p_tr = sub.add_parser("transfer", help="replay a checkpoint on the other scenario modes")
    add_common(p_tr, checkpoint=True)
    p_tr.add_argument("--modes", default=",".join(TRANSFER_MODES),
                      help="comma-separated subset of res,large_scale,weekly")
    p_tr.add_argument("--large-scale-factor", type=int, default=10,
                      help="fleet and scenario multiplier for large_scale")

    p_alloc = sub.add_parser("allocate", help="split one aggregate command across a fleet CSV")
    p_alloc.add_argument("--fleet", required=True, help="fleet CSV path")
    p_alloc.add_argument("--power-kw", type=float, required=True, help="commanded aggregate kW")
    p_alloc.add_argument("--slot", type=int, default=18, help="hour of day for availability")
    p_alloc.add_argument("--dt", type=float, default=1.0, help="slot length in hours")
    p_alloc.add_argument("--seed", type=int, default=0)
    p_alloc.add_argument("--out", default=None)
    p_alloc.add_argument("--backend", default=None, choices=["auto", "numpy", "numba"])
    return parser


# -- config plumbing --------------------------------------------------------


def _load_strict_json(path, allowed: set, what: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"{what} file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{what} file {path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{what} file {path} must hold a JSON object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigurationError(
            f"{what} file {path} has unknown fields: {sorted(unknown)}"
        )
    return doc


def resolve_scenario(args):
    name = args.scenario
    if name in BUILTIN_SCENARIOS:
        kwargs = {}
        if args.noise_pct is not None:
            kwargs["noise_pct"] = args.noise_pct
        if args.scale is not None:
            kwargs["scale"] = args.scale
        if name == "weekly" and args.noise_pct is None:
            kwargs["noise_pct"] = 0.10
        if name == "large-scale" and args.scale is None:
            kwargs["scale"] = 100.0
        scenario = default_scenario(
            res=name in ("res", "res-weekly"),
            weekly=name in ("weekly", "res-weekly"),
            **kwargs,
        )
        mode = args.mode or SCENARIO_DEFAULT_MODE[name]
        return scenario, mode
    path = Path(name)
    if not path.exists():
        raise ConfigurationError(f"scenario file not found: {path}")
    return load_scenario(path), (args.mode or "baseload")


def resolve_fleet_config(args) -> FleetConfig:
    fields = {f.name for f in dataclasses.fields(FleetConfig)}
    base = {}
    if args.fleet_config:
        base = _load_strict_json(args.fleet_config, fields, "fleet config")
    base.setdefault("n_evs", args.evs)
    base.setdefault("rng_seed", args.fleet_seed)
    if args.fleet_config is None:
        base["n_evs"] = args.evs
        base["rng_seed"] = args.fleet_seed
    return FleetConfig(**base)


def resolve_ppo_config(args) -> PpoConfig:
    fields = {f.name for f in dataclasses.fields(PpoConfig)}
    overrides = {}
    if args.ppo_config:
        overrides = _load_strict_json(args.ppo_config, fields, "ppo config")
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.checkpoint_every is not None:
        overrides["checkpoint_every"] = args.checkpoint_every
    if "hidden" in overrides:
        overrides["hidden"] = tuple(overrides["hidden"])
    if args.preset == "fast":
        return fast_config(**overrides)
    return PpoConfig(**overrides)


def make_run_dir(command: str, seed: int, out_root) -> Path:
    root = Path(out_root or os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = f"{command}-{stamp}-{seed & 0xFFFFFF:06x}"
    run_dir = root / base
    suffix = 0
    while run_dir.exists():
        suffix += 1
        run_dir = root / f"{base}.{suffix}"
    run_dir.mkdir(parents=True)
    return run_dir


def write_config_snapshot(run_dir: Path, doc: dict) -> str:
    digest = config_hash(doc)
    snapshot = dict(doc)
    snapshot["config_hash"] = digest
    with open(run_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, indent=1, sort_keys=True, default=list)
        fh.write("\n")
    return digest


def write_journal(run_dir: Path, digest: str, rows: list) -> None:
    with open(run_dir / "journal.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config_hash": digest}, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# -- shared episode artifact writing -----------------------------------------


def write_eval_artifacts(run_dir: Path, report, digest: str, emit_plot_data: bool) -> None:
    write_trace_rows(report.trace, run_dir / "trace.csv")
    write_trace_rows(report.baseline_trace, run_dir / "baseline_trace.csv")
    doc = {"config_hash": digest, **report.metrics_dict()}
    with open(run_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    report.write_latency_json(run_dir / "latency.json")
    write_journal(run_dir, digest, report.journal)
    if emit_plot_data:
        plots = run_dir / "plots"
        plots.mkdir(exist_ok=True)
        _write_csv(
            plots / "load_comparison.csv",
            ("slot", "baseline_total_kw", "policy_total_kw"),
            [
                (b.slot, repr(b.total_load_kw), repr(p.total_load_kw))
                for b, p in zip(report.baseline_trace, report.trace)
            ],
        )
        _write_csv(
            plots / "soc_quantiles.csv",
            ("slot", "min", "q25", "median", "q75", "max"),
            [
                (r["slot"], repr(r["min"]), repr(r["q25"]), repr(r["median"]),
                 repr(r["q75"]), repr(r["max"]))
                for r in report.soc_quantiles
            ],
        )


def build_spec(args) -> EpisodeSpec:
    scenario, mode = resolve_scenario(args)
    fleet = resolve_fleet_config(args)
    return EpisodeSpec(scenario=scenario, fleet=fleet, mode=mode)


def snapshot_doc(args, spec: EpisodeSpec, extra: dict | None = None) -> dict:
    doc = {
        "command": args.command,
        "seed": args.seed,
        "mode": spec.mode,
        "scenario": scenario_to_json(spec.scenario),
        "fleet": dataclasses.asdict(spec.fleet),
        "backend": backend.active_backend(),
    }
    if extra:
        doc.update(extra)
    return doc


# -- subcommands --------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = build_spec(args)
    run_dir = make_run_dir(args.command, args.seed, args.out)
    digest = write_config_snapshot(run_dir, snapshot_doc(args, spec, {"policy": args.policy}))
    report = evaluate(args.policy, spec, seed=args.seed)
    write_eval_artifacts(run_dir, report, digest, args.emit_plot_data)
    if getattr(args, "markdown", False):
        print(markdown_table(report))
    print(f"run dir: {run_dir}")
    print(
        f"departure variance {report.departure_variance_kw2:.1f} kW^2, "
        f"reduction {report.variance_reduction_pct:.2f}%, cost {report.cost:.2f}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    args.policy = args.checkpoint
    return cmd_simulate(args)


def cmd_train(args) -> int:
    spec = build_spec(args)
    config = resolve_ppo_config(args)
    run_dir = make_run_dir(args.command, args.seed, args.out)
    digest = write_config_snapshot(
        run_dir, snapshot_doc(args, spec, {"ppo": dataclasses.asdict(config)})
    )
    trainer = Trainer(spec, config, seed=args.seed)
    checkpoint_path = run_dir / "checkpoint.json"
    report_path = run_dir / "report.jsonl"

    def _graceful(signum, frame):
        raise KeyboardInterrupt

    old_int = signal.signal(signal.SIGINT, _graceful)
    old_term = signal.signal(signal.SIGTERM, _graceful)
    try:
        trainer.train(checkpoint_path=checkpoint_path, report_path=report_path)
    except KeyboardInterrupt:
        trainer.save(checkpoint_path)
        trainer.report.write_jsonl(report_path)
        write_journal(run_dir, digest, [{"event": "interrupted", "episode": trainer.episodes_done}])
        print(f"interrupted at episode {trainer.episodes_done}; checkpoint saved to {checkpoint_path}")
        return EXIT_OK
    except DivergenceError as exc:
        trainer.report.write_jsonl(report_path)
        write_journal(
            run_dir, digest,
            [{"event": "diverged", "episode": trainer.episodes_done, "detail": str(exc)}],
        )
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    finally:
        signal.signal(signal.SIGINT, old_int)
        signal.signal(signal.SIGTERM, old_term)

    write_journal(run_dir, digest, [{"event": "completed", "episode": trainer.episodes_done}])
    if args.emit_plot_data:
        plots = run_dir / "plots"
        plots.mkdir(exist_ok=True)
        _write_csv(
            plots / "reward_curve.csv",
            ("episode", "reward", "variance_kw2"),
            [(r["episode"], repr(r["reward"]), repr(r["variance_kw2"])) for r in trainer.report.rows],
        )
    print(f"run dir: {run_dir}")
    print(f"trained {trainer.episodes_done} episodes; checkpoint {checkpoint_path}")
    return EXIT_OK


def cmd_transfer(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    bad = set(modes) - set(TRANSFER_MODES)
    if bad:
        raise ConfigurationError(f"transfer modes must be among {TRANSFER_MODES}, got {sorted(bad)}")
    run_dir = make_run_dir(args.command, args.seed, args.out)
    summary = {}
    for mode in modes:
        sub_args = argparse.Namespace(**vars(args))
        sub_args.mode = mode
        if mode == "res":
            sub_args.scenario = "res"
        elif mode == "weekly":
            sub_args.scenario = "weekly"
        else:
            sub_args.scenario = "large-scale"
            if args.scale is None:
                sub_args.scale = float(args.large_scale_factor)
            sub_args.evs = args.evs * args.large_scale_factor
        spec = build_spec(sub_args)
        mode_dir = run_dir / mode
        mode_dir.mkdir()
        digest = write_config_snapshot(
            mode_dir, snapshot_doc(sub_args, spec, {"checkpoint": str(args.checkpoint)})
        )
        report = evaluate(args.checkpoint, spec, seed=args.seed)
        write_eval_artifacts(mode_dir, report, digest, args.emit_plot_data)
        envelope_hi = max(row["envelope_hi_kw"] for row in report.journal)
        envelope_lo = min(row["envelope_lo_kw"] for row in report.journal)
        summary[mode] = {
            "variance_reduction_pct": report.variance_reduction_pct,
            "cost_reduction_pct": report.cost_reduction_pct,
            "departure_variance_kw2": report.departure_variance_kw2,
            "n_evs": spec.fleet.n_evs,
            "envelope_lo_kw": envelope_lo,
            "envelope_hi_kw": envelope_hi,
            "trace_slots": len(report.trace),
        }
        print(
            f"{mode}: variance reduction {report.variance_reduction_pct:.2f}%, "
            f"cost reduction {report.cost_reduction_pct:.2f}%"
        )
    with open(run_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"run dir: {run_dir}")
    return EXIT_OK


def cmd_allocate(args) -> int:
    fleet_path = Path(args.fleet)
    if not fleet_path.exists():
        raise ConfigurationError(f"fleet file not found: {fleet_path}")
    fleet = fleet_from_csv(fleet_path)
    mask = availability(fleet, args.slot % 24)
    run_dir = make_run_dir(args.command, args.seed, args.out)
    doc = {
        "command": "allocate",
        "seed": args.seed,
        "fleet": str(fleet_path),
        "power_kw": args.power_kw,
        "slot": args.slot,
        "dt": args.dt,
        "backend": backend.active_backend(),
    }
    digest = write_config_snapshot(run_dir, doc)
    new_fleet, eva_state, result = step_aggregate(fleet, mask, args.power_kw, args.dt)
    allocation_to_csv(run_dir / "allocation.csv", args.slot, new_fleet, mask, result)
    residual = abs(float(result.power_kw.sum()) - result.applied_eva_power_kw)
    write_journal(
        run_dir,
        digest,
        [
            {
                "slot": args.slot,
                "kappa": result.kappa,
                "n_clipped": int(result.clipped_ids.size),
                "eva_power_kw": result.applied_eva_power_kw,
                "residual_kw": residual,
                "eva_soc": eva_state.soc,
            }
        ],
    )
    print(f"run dir: {run_dir}")
    print(f"kappa {result.kappa:.6g}, conservation residual {residual:.3e} kW")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "allocate": cmd_allocate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "backend", None):
            backend.set_backend(args.backend)
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        achievable = getattr(exc, "achievable_kw", None)
        hint = f" (achievable: {achievable:.3f} kW)" if achievable is not None else ""
        print(f"infeasible command: {exc}{hint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except V2gError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
