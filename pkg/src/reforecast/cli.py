"""Command-line pipeline: synth -> diagnose/fit -> sample -> rebuild -> evaluate.

Every command writes its outputs plus a ``<out>.meta.json`` sidecar carrying
the fully resolved configuration, seed, and format version; nothing embeds
wall-clock time, so reruns with identical inputs are byte-identical. Errors
exit nonzero with one machine-parsable line on stderr.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .argen import MODEL_KINDS, fit_model
from .data import (
    diagnose_updates,
    extract_updates,
    load_observations,
    load_trajectories,
    load_updates_csv,
    write_observations_csv,
    write_trajectory_csv,
    write_updates_csv,
)
from .errors import ReforecastError, UsageError
from .evaluate import evaluate_model, write_report_csv
from .persistence import FORMAT_VERSION, load_model, save_model
from .reconstruct import RebuildConfig, rebuild_trajectory
from .synthbench import SyntheticProcessConfig, generate_synthetic_trajectory, run_benchmark


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config_file(path):
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_meta(out_path, command, resolved):
    meta = {
        "command": command,
        "config": resolved,
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
    }
    with open(str(out_path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _process_config(file_cfg, args):
    raw = dict(file_cfg.get("process", {}))
    for key in ("kind", "n", "m", "d"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            raw[key] = value
    if args.seed is not None:
        raw["seed"] = args.seed
    return SyntheticProcessConfig(**raw)


def _model_config(file_cfg, args):
    raw = dict(file_cfg.get("model", {}))
    if args.seed is not None:
        raw.setdefault("train", {})
        raw["train"] = {**raw.get("train", {}), "seed": args.seed}
    return raw


def cmd_synth(args):
    file_cfg = _load_config_file(args.config)
    config = _process_config(file_cfg, args)
    dataset = generate_synthetic_trajectory(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(dataset.trajectory, out / "trajectory.csv")
    write_observations_csv(dataset.pseudo_obs, out / "observations.csv")
    write_updates_csv(dataset.updates, out / "updates.csv")
    _write_meta(out / "dataset", "synth", {"process": config.echo(), "meta": dataset.meta})
    print(f"wrote {out}/trajectory.csv, observations.csv, updates.csv")
    return 0


def cmd_diagnose(args):
    traj = load_trajectories(args.input)
    updates = extract_updates(traj)
    report = diagnose_updates(updates, weather_period=args.weather_period)
    payload = report.to_dict()
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_meta(args.out, "diagnose", {
        "input": args.input, "weather_period": args.weather_period,
    })
    print(f"wrote {args.out}")
    return 0


def cmd_fit(args):
    file_cfg = _load_config_file(args.config)
    model_cfg = _model_config(file_cfg, args)
    traj = load_trajectories(args.input)
    updates = extract_updates(traj)
    model = fit_model(args.model, updates, model_cfg)
    save_model(args.out, model)
    _write_meta(args.out, "fit", {
        "input": args.input, "model": args.model,
        "config": model.config_echo, "seed": args.seed,
    })
    print(f"wrote {args.out} ({args.model})")
    return 0


def cmd_sample(args):
    model = load_model(args.input)
    updates = model.sample(args.count, args.seed or 0)
    write_updates_csv(updates, args.out)
    _write_meta(args.out, "sample", {
        "input": args.input, "count": args.count, "seed": args.seed or 0,
        "model": model.kind,
    })
    print(f"wrote {args.out} ({args.count} sequences)")
    return 0


def cmd_rebuild(args):
    updates = load_updates_csv(args.input)
    obs = load_observations(args.obs)
    config = RebuildConfig(
        horizon=args.horizon or updates.m_prime + 2,
        clip_min=0.0,
        clip_max=args.clip_max,
    )
    result = rebuild_trajectory(obs, updates, config)
    write_trajectory_csv(result.trajectory, args.out)
    _write_meta(args.out, "rebuild", {
        "input": args.input, "obs": args.obs, "horizon": config.horizon,
        "clip_max": args.clip_max, "clipped_cells": result.clipped_cells,
    })
    print(f"wrote {args.out} ({result.clipped_cells} cells clipped)")
    return 0


def cmd_evaluate(args):
    model = load_model(args.artifact)
    traj = load_trajectories(args.input)
    report = evaluate_model(
        model, traj, scenario_count=args.scenarios, seed=args.seed or 0,
        threads=args.threads,
    )
    write_report_csv([report], args.out)
    _write_meta(args.out, "evaluate", {
        "artifact": args.artifact, "input": args.input,
        "scenarios": args.scenarios, "seed": args.seed or 0,
    })
    print(report.summary_text())
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args):
    file_cfg = _load_config_file(args.config)
    config = _process_config(file_cfg, args)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for kind in models:
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model {kind!r}; choose from {MODEL_KINDS}")
    report = run_benchmark(
        models, config, scenario_count=args.scenarios, seed=args.seed or 0,
        model_config=_model_config(file_cfg, args),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows_path = out / "benchmark.csv"
    with open(rows_path, "w", encoding="utf-8") as fh:
        fh.write("model,metric,value\n")
        for row in report.rows:
            for metric in ("es", "vs", "mivo"):
                fh.write(f"{row.model},{metric},{repr(float(getattr(row, metric)))}\n")
    summary = report.summary_text()
    (out / "summary.txt").write_text(summary + "\n", encoding="utf-8")
    _write_meta(out / "benchmark", "bench", {
        "process": config.echo(), "models": models,
        "scenarios": args.scenarios, "seed": args.seed or 0,
    })
    print(summary)
    return 0


def cmd_plotdata(args):
    traj = load_trajectories(args.input)
    limit = args.max_sequences or traj.n_issues
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("sequence,horizon,area,value\n")
        for t in range(min(limit, traj.n_issues)):
            for k in range(traj.horizon):
                for ai, area in enumerate(traj.area_ids):
                    fh.write(f"{t},{k},{area},{repr(float(traj.values[t, k, ai]))}\n")
    _write_meta(args.out, "plotdata", {
        "input": args.input, "max_sequences": limit,
    })
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = _Parser(prog="reforecast", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--out", required=out_required, help="output path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON config file; flags override it")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker thread cap (results are thread-count-invariant)")

    p = sub.add_parser("synth", help="generate a known-truth synthetic dataset")
    common(p)
    p.add_argument("--kind", default=None, help="process kind")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("diagnose", help="update-process hypothesis diagnostics")
    common(p)
    p.add_argument("--input", required=True, help="trajectory CSV")
    p.add_argument("--weather-period", type=int, default=6)
    p.set_defaults(fn=cmd_diagnose)

    p = sub.add_parser("fit", help="fit a generative model on extracted updates")
    common(p)
    p.add_argument("--input", required=True, help="trajectory CSV")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("sample", help="sample update sequences from a model artifact")
    common(p)
    p.add_argument("--input", required=True, help="model artifact")
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("rebuild", help="rebuild trajectories from updates and observations")
    common(p)
    p.add_argument("--input", required=True, help="updates CSV")
    p.add_argument("--obs", required=True, help="observations CSV")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--clip-max", type=float, default=None)
    p.set_defaults(fn=cmd_rebuild)

    p = sub.add_parser("evaluate", help="score a fitted model on held-out data")
    common(p)
    p.add_argument("--artifact", required=True, help="model artifact")
    p.add_argument("--input", required=True, help="held-out trajectory CSV")
    p.add_argument("--scenarios", type=int, default=100)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("bench", help="benchmark model families on synthetic data")
    common(p)
    p.add_argument("--models", required=True, help="comma-separated model kinds")
    p.add_argument("--scenarios", type=int, default=10)
    p.add_argument("--kind", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("plotdata", help="emit long-format CSV for fan charts")
    common(p)
    p.add_argument("--input", required=True, help="trajectory CSV")
    p.add_argument("--max-sequences", type=int, default=None)
    p.set_defaults(fn=cmd_plotdata)

    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc}", file=sys.stderr)
        return 2
    except ReforecastError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
