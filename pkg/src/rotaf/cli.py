"""Command-line runner: ``rotaf run | sweep | validate-bounds``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, ExperimentConfig, PRESETS, load_config, preset
from .data import IdxFormatError
from .engine import RoundMetrics, run_experiment

COLUMNS = ("run_id", "seed", "t", "train_loss", "test_loss", "test_acc", "dist2_opt",
           "groups_dropped", "contaminated_groups")


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_value(x) -> str:
    if isinstance(x, float):
        return "null" if not math.isfinite(x) else format(x, ".17g")
    if isinstance(x, int):
        return str(x)
    return '"' + str(x).replace("\\", "\\\\").replace('"', '\\"') + '"'


class MetricsWriter:
    """CSV (and optional JSON-lines) sink flushed after every record."""

    def __init__(self, path: Path, jsonl: bool = False):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self._csv = open(path, "w", encoding="utf-8", newline="")
        self._csv.write(",".join(COLUMNS) + "\n")
        self._csv.flush()
        self._json = open(path.with_suffix(".jsonl"), "w", encoding="utf-8") if jsonl else None

    def write(self, run_id: str, seed: int, rec: RoundMetrics) -> None:
        values = (run_id, seed) + dataclasses.astuple(rec)
        self._csv.write(",".join(fmt(v) for v in values) + "\n")
        self._csv.flush()
        if self._json is not None:
            body = ", ".join(f'"{k}": {_json_value(v)}' for k, v in zip(COLUMNS, values))
            self._json.write("{" + body + "}\n")
            self._json.flush()

    def close(self) -> None:
        self._csv.close()
        if self._json is not None:
            self._json.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def resolve_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    cfg = cfg.with_overrides(parse_set(args.set))
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _default_run_id(args) -> str:
    if args.run_id:
        return args.run_id
    if args.preset:
        return args.preset
    if args.config:
        return Path(args.config).stem
    return "run"


def execute(cfg: ExperimentConfig, run_id: str, path: Path, jsonl: bool = False) -> list[RoundMetrics]:
    with MetricsWriter(path, jsonl) as sink:
        return run_experiment(cfg, on_record=lambda rec: sink.write(run_id, cfg.seed, rec))


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return 0
    cfg.validate()
    run_id = _default_run_id(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{run_id}.cfg").write_text(cfg.dumps(), encoding="utf-8")
    path = out / f"{run_id}.csv"
    recs = execute(cfg, run_id, path, args.jsonl)
    last = recs[-1]
    if cfg.problem == "mnist":
        print(f"{run_id} seed={cfg.seed} t={last.t} test_acc={last.test_acc:.4f} test_loss={last.test_loss:.4f}")
    else:
        print(f"{run_id} seed={cfg.seed} t={last.t} dist2_opt={last.dist2_opt:.6g} train_loss={last.train_loss:.6g}")
    print(f"metrics: {path}")
    return 0


def parse_grid(items) -> list[tuple[str, list[str]]]:
    grid = []
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--grid expects key=v1,v2,..., got {item!r}")
        key, vals = item.split("=", 1)
        grid.append((key.strip(), [v.strip() for v in vals.split(",") if v.strip()]))
    return grid


def cell_id(cell: dict) -> str:
    raw = "_".join(f"{k}={v}" for k, v in cell.items())
    return re.sub(r"[^A-Za-z0-9_.=+-]", "-", raw)


def _run_cell(job) -> str:
    cfg, run_id, final, jsonl = job
    final = Path(final)
    tmp = final.with_name(final.stem + ".partial.csv")
    execute(cfg, run_id, tmp, jsonl)
    if jsonl:
        os.replace(tmp.with_suffix(".jsonl"), final.with_suffix(".jsonl"))
    os.replace(tmp, final)
    return str(final)


def cmd_sweep(args) -> int:
    base = resolve_config(args)
    grid = parse_grid(args.grid)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    cells = [dict(zip([k for k, _ in grid], combo)) for combo in itertools.product(*[v for _, v in grid])] if grid else []
    if not cells or not seeds:
        print("empty grid: nothing to run")
        return 0
    out = Path(args.out)
    cell_dir = out / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)
    jobs, files = [], []
    for cell in cells:
        cfg_cell = base.with_overrides(cell)
        rid = cell_id(cell)
        for seed in seeds:
            cfg = dataclasses.replace(cfg_cell, seed=seed).validate()
            run_id = f"{rid}_seed{seed}"
            final = cell_dir / f"{run_id}.csv"
            files.append(final)
            if final.exists():
                continue
            jobs.append((cfg, run_id, str(final), args.jsonl))
    skipped = len(files) - len(jobs)
    if skipped:
        print(f"resuming: {skipped} completed run(s) skipped")
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for done in pool.map(_run_cell, jobs):
                print(f"done {done}")
    else:
        for job in jobs:
            print(f"done {_run_cell(job)}")
    combined = out / "metrics.csv"
    with open(combined, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for f in files:
            with open(f, encoding="utf-8") as part:
                next(part)
                fh.writelines(part)
    print(f"{len(files)} run(s), combined metrics: {combined}")
    return 0


def cmd_validate_bounds(args) -> int:
    from .theory import validate_bounds

    cfg = resolve_config(args).validate()
    report = validate_bounds(cfg, seeds=range(args.seeds), slack=args.slack)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_id = _default_run_id(args)
    path = out / f"{run_id}-bound.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("run_id,t,dist2_mean,bound\n")
        for t, (e, b) in enumerate(zip(report.empirical, report.bound)):
            fh.write(f"{run_id},{t},{fmt(float(e))},{fmt(float(b))}\n")
    ok = report.passed(args.required)
    print(f"{run_id} mode={report.mode} within={report.fraction:.3f} required={args.required} "
          f"{'PASS' if ok else 'FAIL'}")
    print(f"curves: {path}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotaf", description="Byzantine-resilient over-the-air FL simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--preset", choices=sorted(PRESETS), metavar="NAME", help="embedded configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--out", default="runs", help="output directory (default: runs)")
        p.add_argument("--run-id", help="identifier written to every metrics row")

    r = sub.add_parser("run", help="run one experiment")
    common(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    r.add_argument("--jsonl", action="store_true", help="also write a JSON-lines metrics file")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="grid of runs over config keys and seeds")
    common(s)
    s.add_argument("--grid", action="append", metavar="KEY=V1,V2", help="one sweep dimension")
    s.add_argument("--seeds", default="0", help="comma-separated seeds (default: 0)")
    s.add_argument("--workers", type=int, default=1, help="parallel runs (default: 1)")
    s.add_argument("--jsonl", action="store_true")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate-bounds", help="compare seed-averaged error with the theoretical curve")
    common(v)
    v.add_argument("--seeds", type=int, default=20, help="number of seeds (default: 20)")
    v.add_argument("--slack", type=float, default=1.05)
    v.add_argument("--required", type=float, default=0.95)
    v.set_defaults(func=cmd_validate_bounds)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IdxFormatError) as exc:
        print(f"rotaf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
