"""Command-line runner: ``openfrag --scenario fig4 --out results/``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, ExperimentConfig, load
from .scenarios import SCENARIOS, ScenarioResult, default_configs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

log = logging.getLogger("openfrag")


def list_scenarios() -> list[tuple[str, str, str]]:
    return [(key, fig, desc) for key, (fig, desc, _, _) in SCENARIOS.items()]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "observable_name", "value_real", "value_imag"])
        for step, name, value in rows:
            w.writerow([step, name, _fmt(value.real), _fmt(value.imag)])


def write_table_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_outputs(cfg: ExperimentConfig, result: ScenarioResult, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    for stem, rows in result.series.items():
        write_series_csv(out / f"{stem}.csv", rows)
    for stem, (header, rows) in result.tables.items():
        write_table_csv(out / f"{stem}.csv", header, rows)
    failed = [c.name for c in result.checks if not c.passed]
    manifest = {
        "config": cfg.as_dict(),
        "scenario": {"id": cfg.scenario, "figure": SCENARIOS[cfg.scenario][0]},
        "versions": {
            "openfrag": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        **result.manifest,
    }
    summary = {
        "scenario": cfg.scenario,
        "entries": result.summary,
        "invariants": [
            {"name": c.name, "invariant": c.invariant, "value": c.value, "limit": c.limit, "passed": c.passed}
            for c in result.checks
        ],
        "failed_invariants": failed,
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return failed


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="openfrag", description="Run fragmentation experiments.")
    p.add_argument("--config", type=Path, help="key = value config file with one section per scenario")
    p.add_argument("--scenario", help="scenario id (see --list)")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--list", action="store_true", help="list scenarios and exit")
    return p


def resolve_config(args) -> ExperimentConfig:
    defaults = default_configs()
    configs = load(args.config, defaults) if args.config else {}
    scenario = args.scenario
    if scenario is None:
        if len(configs) == 1:
            scenario = next(iter(configs))
        else:
            raise ConfigError("no scenario given; use --scenario or a config with one section")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; known: {', '.join(SCENARIOS)}")
    cfg = configs.get(scenario, defaults[scenario])
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        cfg = cfg.replace(seed=args.seed)
    if args.out is not None:
        cfg = cfg.replace(output_dir=str(args.out))
    return cfg


def main(argv=None) -> int:
    level = os.environ.get("FRAG_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.list:
        for key, fig, desc in list_scenarios():
            print(f"{key}\t{fig}\t{desc}")
        return EXIT_OK
    try:
        cfg = resolve_config(args)
        runner = SCENARIOS[cfg.scenario][2]
        log.info("running %s with %s", cfg.scenario, cfg)
        result = runner(cfg, workers=max(1, args.workers))
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failed = write_outputs(cfg, result, Path(cfg.output_dir))
    if failed:
        print("invariant violations: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
