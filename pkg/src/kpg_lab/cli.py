"""Command line: ``run``, ``verify`` and ``plot``.

Exit codes: 0 success or pass, 1 verification failure, 2 input error,
3 numeric runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import svg
from .checks import theorem1_suite, theorem2_suite, theorem3_suite
from .config import ConfigError, ExperimentConfig, load_config
from .core import InputError, NumericError
from .engine import train
from .tabular import kpg_tabular_train
from .theory import estimate_constants
from .traceio import SchemaError, read_params, read_trace, write_params, write_trace

log = logging.getLogger("kpg_lab")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _setup_logging():
    level = os.environ.get("KPG_LAB_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _stem(path: Path) -> Path:
    name = path.name
    for suffix in (".trace.csv", ".csv", ".json"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)])
    return path


def trace_path(cfg: ExperimentConfig, config_path: Path, out: str | None) -> Path:
    if out:
        return Path(out)
    if cfg.out:
        return Path(cfg.out)
    return _stem(config_path).with_name(_stem(config_path).name + ".trace.csv")


def execute(cfg: ExperimentConfig):
    """Run one configured experiment and return its trace."""
    game = cfg.build_game()
    if cfg.tabular:
        run = kpg_tabular_train(game, cfg.K, cfg.rates(game.n), cfg.steps, cfg.eps_clip, cfg.seed,
                                cfg.surrogate, cfg.init_scale)
        return run.trace
    constants = None
    if cfg.algo == "kpg":
        constants = estimate_constants(game, samples=cfg.samples, seed=cfg.seed)
        log.info("estimated L=%.6g grad_max=%.6g", constants.L, constants.grad_max)
    return train(game, cfg.initial_theta(game), cfg.rates(game.n), cfg.K or 1, cfg.steps,
                 cfg.make_optimizer(game.dims), cfg.reference(game), constants, cfg.algo, cfg.tol, cfg.k_max)


def run_one(cfg: ExperimentConfig, out: Path) -> Path:
    trace = execute(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out)
    stem = _stem(out)
    write_params(trace, stem.with_name(stem.name + ".params.csv"))
    echo = cfg.to_dict()
    echo["out"] = str(out)
    stem.with_name(stem.name + ".config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", out)
    return out


def _seed_range(text: str):
    m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", text)
    if not m or int(m.group(2)) < int(m.group(1)):
        raise InputError(f"--seeds expects '<a>..<b>' with a <= b, got {text!r}")
    return list(range(int(m.group(1)), int(m.group(2)) + 1))


def cmd_run(args) -> int:
    config_path = Path(args.config)
    cfg = load_config(config_path)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = trace_path(cfg, config_path, args.out)
    if not args.seeds:
        run_one(cfg, out)
        print(out)
        return EXIT_OK
    seeds = _seed_range(args.seeds)
    stem = _stem(out)
    jobs = [(replace(cfg, seed=s), stem.with_name(f"{stem.name}.seed{s}.trace.csv")) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 1)) as pool:
        paths = list(pool.map(run_one, *zip(*jobs)))
    index = stem.with_name(stem.name + ".index.csv")
    index.write_text("seed,trace\n" + "".join(f"{s},{p}\n" for s, p in zip(seeds, paths)))
    print(index)
    return EXIT_OK


def cmd_verify(args) -> int:
    config_path = Path(args.config)
    cfg = load_config(config_path)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if cfg.tabular:
        raise ConfigError(f"{config_path}:1: theorem checks need a differentiable game, got a matrix game")
    game = cfg.build_game()
    rates = cfg.rates(game.n)
    v = cfg.verify
    theta_star = cfg.reference(game)
    if args.theorem in (2, 3) and theta_star is None:
        raise ConfigError(f"{config_path}:1: theorem {args.theorem} needs 'theta_star' for this game")
    if args.theorem == 1:
        result = theorem1_suite(game, rates, starts=v.starts, K=v.K, seed=cfg.seed, samples=v.samples)
    elif args.theorem == 2:
        result = theorem2_suite(game, theta_star, rates, v.radius, min(v.starts, 20), v.max_updates, v.target,
                                seed=cfg.seed)
    else:
        result = theorem3_suite(game, theta_star, rates, radius=v.radius, starts=min(v.starts, 20), K=v.K,
                                seed=cfg.seed, samples=v.samples)
    stem = _stem(Path(args.out)) if args.out else _stem(config_path)
    detail = Path(args.out) if args.out else stem.with_name(f"{stem.name}.verify{args.theorem}.csv")
    write_trace(result.trace, detail)
    summary = {"theorem": args.theorem, "status": result.status, "checked": result.checked,
               "violations": result.violations, **result.details}
    text = json.dumps(summary, indent=2, sort_keys=True, default=float)
    detail.with_name(_stem(detail).name + ".summary.json").write_text(text + "\n")
    if result.status == "SKIPPED":
        log.warning("theorem %d precondition unmet: %s", args.theorem, result.details.get("reason"))
    print(result.summary_line())
    return EXIT_FAIL if result.status == "FAIL" else EXIT_OK


def cmd_plot(args) -> int:
    path = Path(args.trace)
    trace = read_trace(path)
    if args.kind == "k-convergence":
        doc = svg.k_convergence(trace, args.update)[0]
    elif args.kind == "learning-curve":
        doc = svg.learning_curve(trace)[0]
    else:
        stem = _stem(path)
        doc = svg.trajectory(trace, read_params(stem.with_name(stem.name + ".params.csv")))
    out = Path(args.out) if args.out else _stem(path).with_name(f"{_stem(path).name}.{args.kind}.svg")
    out.write_text(doc)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kpg-lab", description="K-level policy gradient experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment and write its trace CSV")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--seeds", help="seed sweep a..b, run concurrently")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check one convergence theorem numerically")
    v.add_argument("--theorem", type=int, choices=(1, 2, 3), required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--out")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="render a trace CSV as SVG")
    pl.add_argument("trace")
    pl.add_argument("--kind", choices=("trajectory", "k-convergence", "learning-curve"), required=True)
    pl.add_argument("--out")
    pl.add_argument("--update", type=int, help="update shown by k-convergence (default: last)")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, SchemaError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
