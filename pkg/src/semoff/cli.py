"""Command-line entry point: single runs, baseline comparisons, parameter
sweeps, and the oracle self-test."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import engine, oracles, plotting
from .scenario import ConfigError, ScenarioConfig, load_config

ENV_PREFIX = "SEMOFF_"


def _env_overrides() -> dict:
    import yaml

    overrides = {}
    for key, value in os.environ.items():
        if key.startswith(ENV_PREFIX):
            field = key[len(ENV_PREFIX):].lower()
            overrides[field] = yaml.safe_load(value)
    return overrides


def _load(args) -> ScenarioConfig:
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = _env_overrides()
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(text, overrides=overrides)


def _cfg_with(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    import copy

    out = copy.deepcopy(cfg)
    for key, value in changes.items():
        setattr(out, key, value)
    return out


def _final_avg_utility(lts_records) -> float:
    return lts_records[-1].avg_utility if lts_records else 0.0


def cmd_run(args) -> int:
    cfg = _load(args)
    lts, sts = engine.run(cfg)
    paths = engine.emit_metrics(lts, sts, args.format, args.out, cfg)
    if not args.no_plots:
        paths["figure"] = plotting.save_run_figure(lts, sts, os.path.join(args.out, "run.png"))
    print(f"run complete: {len(lts)} long slots, mean utility "
          f"{_final_avg_utility(lts):.6g}")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    seeds = [cfg.seed + i for i in range(args.seeds)]
    variants = ["proposed"] + args.baselines
    utilities: dict[str, list[float]] = {v: [] for v in variants}
    admitted: dict[str, list[np.ndarray]] = {v: [] for v in variants}
    violation_rates: dict[str, list[float]] = {v: [] for v in variants}
    os.makedirs(args.out, exist_ok=True)

    for variant in variants:
        for seed in seeds:
            run_cfg = _cfg_with(cfg, seed=seed)
            if variant == "proposed":
                lts, sts = engine.run(run_cfg)
            else:
                lts, sts = engine.run_baseline(run_cfg, variant)
            out_dir = os.path.join(args.out, f"{variant}_seed{seed}")
            engine.emit_metrics(lts, sts, args.format, out_dir, run_cfg, seed=seed)
            utilities[variant].append(_final_avg_utility(lts))
            admitted[variant].append(np.mean([r.admitted_by_type for r in lts], axis=0)
                                     if lts else np.zeros(len(cfg.task_types)))
            slot_count = max(len(sts), 1)
            violation_rates[variant].append(sum(r.violations for r in sts) / slot_count)

    summary_path = os.path.join(args.out, "summary.csv")
    with open(summary_path, "w") as fh:
        fh.write("variant,mean_utility,admitted_per_type,violation_rate\n")
        for v in variants:
            adm = np.mean(admitted[v], axis=0)
            fh.write(f"{v},{np.mean(utilities[v]):.17g},"
                     f"{';'.join(f'{a:.4g}' for a in adm)},"
                     f"{np.mean(violation_rates[v]):.6g}\n")
    print(f"{'variant':<10} {'mean utility':>14} {'admitted/type':>20} {'viol rate':>10}")
    for v in variants:
        adm = np.mean(admitted[v], axis=0)
        print(f"{v:<10} {np.mean(utilities[v]):>14.6g} "
              f"{';'.join(f'{a:.3g}' for a in adm):>20} "
              f"{np.mean(violation_rates[v]):>10.4g}")
    if not args.no_plots:
        plotting.save_compare_figure(utilities, os.path.join(args.out, "compare.png"))
    print(f"summary: {summary_path}")
    return 0


def _sweep_axis_value(cfg: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis not in cfg.__dataclass_fields__:
        raise ConfigError(f"sweep axis must name a config field, got {axis!r}")
    current = getattr(cfg, axis)
    if isinstance(current, int) and not isinstance(current, bool):
        value = int(round(value))
    return _cfg_with(cfg, **{axis: value})


def _sweep_worker(payload):
    cfg, axis, value, seed, out_dir, fmt = payload
    run_cfg = _sweep_axis_value(_cfg_with(cfg, seed=seed), axis, value)
    lts, sts = engine.run(run_cfg)
    engine.emit_metrics(lts, sts, fmt, out_dir, run_cfg, seed=seed)
    rows = [(value, seed, r.lts_index, r.revenue, r.cost, r.utility, r.avg_utility,
             int(np.sum(r.y))) for r in lts]
    return value, seed, rows, engine.config_hash(run_cfg)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [float(v) for v in args.values.split(",") if v]
    if not values:
        raise ConfigError("sweep needs a nonempty --values list")
    seeds = [cfg.seed + i for i in range(args.seeds)]
    os.makedirs(args.out, exist_ok=True)
    jobs = []
    for value in values:
        for seed in seeds:
            out_dir = os.path.join(args.out, f"{args.axis}_{value:g}_seed{seed}")
            jobs.append((cfg, args.axis, value, seed, out_dir, args.format))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]

    series_path = os.path.join(args.out, "sweep.csv")
    series: dict[float, list[float]] = {v: [] for v in values}
    with open(series_path, "w") as fh:
        fh.write("axis,value,seed,manifest_hash,lts_index,revenue,cost,utility,"
                 "avg_utility,admitted\n")
        for value, seed, rows, digest in results:
            for (_v, _s, lts_index, g_l, g_s, g, g_bar, adm) in rows:
                fh.write(f"{args.axis},{value:.17g},{seed},{digest},{lts_index},"
                         f"{g_l:.17g},{g_s:.17g},{g:.17g},{g_bar:.17g},{adm}\n")
            if rows:
                series[value].append(rows[-1][6])
    if not args.no_plots:
        plotting.save_sweep_figure(values, series, args.axis,
                                   os.path.join(args.out, "sweep.png"))
    print(f"sweep complete: {len(values)} values x {len(seeds)} seeds -> {series_path}")
    return 0


def cmd_selftest(args) -> int:
    results = oracles.run_selftest(verbose=True)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semoff",
        description="Multi-timescale admission and resource allocation simulator "
                    "for semantic-extraction offloading.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a YAML config document")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_run = sub.add_parser("run", help="simulate one configuration")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="proposed vs baselines on paired seeds")
    common(p_cmp)
    p_cmp.add_argument("--baselines", default="FA,FC,TC",
                       type=lambda s: [b for b in s.split(",") if b])
    p_cmp.add_argument("--seeds", type=int, default=5, help="number of paired seeds")
    p_cmp.set_defaults(func=cmd_compare)

    p_sw = sub.add_parser("sweep", help="sweep one config field over a value list")
    common(p_sw)
    p_sw.add_argument("--axis", required=True, help="config field to sweep")
    p_sw.add_argument("--values", required=True, help="comma-separated values")
    p_sw.add_argument("--seeds", type=int, default=3)
    p_sw.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p_sw.set_defaults(func=cmd_sweep)

    p_st = sub.add_parser("selftest", help="run the brute-force oracle suites")
    p_st.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
