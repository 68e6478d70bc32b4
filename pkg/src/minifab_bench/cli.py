"""
Command-line workflow: ``enumerate`` -> ``simulate`` -> ``analyze``, plus
``evaluate`` for forecasting baselines on a single exported series.

Scenario files hold one scenario per line as space-separated ``key=value``
pairs (the fields of :class:`ScenarioConfig`). Lines starting with ``#`` are
comments; ``# master_seed=N`` records the seed the file was enumerated with.

Output locations default to ``$MINIFAB_OUT`` (or ``./minifab_out``) when
``--out`` is not given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from minifab_bench import __version__
from minifab_bench.analytics.features import FEATURE_NAMES, extract_features
from minifab_bench.analytics.forecast import autoregressive_forecast, evaluate_forecast, persistence_forecast, split_index
from minifab_bench.analytics.pca import pca_on_features
from minifab_bench.dataset import CASCADE, SERIES_COLUMNS, export_scenario, format_number, read_meta, read_series_column
from minifab_bench.errors import ConstructionError, ContractError, DegenerateInputError, LookupFailure, ModelError
from minifab_bench.factory import (
    BENCHMARK_HORIZON,
    BENCHMARK_STAGES,
    ScenarioConfig,
    build_cascade,
    enumerate_scenarios,
)
from minifab_bench.pdevs import simulate

OUT_ENV = "MINIFAB_OUT"
MANIFEST = "manifest.json"
SCENARIO_KEYS = ("index", "repair", "pattern", "pa", "pb", "tw")


class CliError(Exception):
    """Reported on stderr; the process exits with status 1."""


def output_root() -> Path:
    return Path(os.environ.get(OUT_ENV) or "minifab_out")


def resolve_out(arg, default_name: str) -> Path:
    return Path(arg) if arg else output_root() / default_name


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- scenario files ---------------------------------------------------------


def parse_filters(items) -> dict[str, str]:
    filters = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliError(f"--filter expects key=value, got {item!r}")
        if key not in ScenarioConfig.__dataclass_fields__:
            raise CliError(f"--filter: unknown scenario key {key!r}")
        filters.setdefault(key, set()).add(value)
    return filters


def matches(config: ScenarioConfig, filters) -> bool:
    return all(str(getattr(config, key)) in values for key, values in filters.items())


def write_scenario_file(path: Path, scenarios, master_seed: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# master_seed={master_seed}", f"# scenarios={len(scenarios)}"]
    lines += [s.to_line() for s in scenarios]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scenario_file(path: Path) -> list[ScenarioConfig]:
    """Parse and validate every line before anything runs."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read scenario file: {exc}") from None
    scenarios, errors = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            scenarios.append(ScenarioConfig.from_line(line))
        except (ConstructionError, TypeError) as exc:
            errors.append(f"{path}:{lineno}: invalid scenario {line!r}: {exc}")
    if errors:
        raise CliError("\n".join(errors))
    if not scenarios:
        raise CliError(f"{path}: no scenarios")
    names = [s.name for s in scenarios]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise CliError(f"{path}: duplicate scenarios {dupes}")
    return scenarios


def scenario_digest(scenarios) -> str:
    return hashlib.sha256("".join(s.to_line() + "\n" for s in scenarios).encode()).hexdigest()


# -- commands ---------------------------------------------------------------


def cmd_enumerate(args) -> int:
    filters = parse_filters(args.filter)
    scenarios = enumerate_scenarios(args.seed, args.stages, args.horizon)
    selected = [s for s in scenarios if matches(s, filters)]
    out = resolve_out(args.out, "scenarios.txt")
    write_scenario_file(out, selected, args.seed)
    print(f"wrote {len(selected)} scenarios to {out}")
    return 0


def run_scenario(line: str, out_dir: str) -> tuple[str, dict[str, str]]:
    """Worker: simulate one scenario line and export it. Returns checksums."""
    config = ScenarioConfig.from_line(line)
    trace = simulate(build_cascade(config), config.horizon, seed=config.seed, record_outputs=False)
    target = Path(out_dir) / config.name
    files = export_scenario(trace, config, target)
    return config.name, {f.name: sha256_file(f) for f in sorted(files)}


def cmd_simulate(args) -> int:
    scenarios = read_scenario_file(args.scenarios)
    out = resolve_out(args.out, "dataset")
    fresh = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    lines = [s.to_line() for s in scenarios]
    results = {}
    started = time.perf_counter()
    try:
        if args.jobs > 1 and len(lines) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for name, sums in pool.map(run_scenario, lines, [str(out)] * len(lines)):
                    results[name] = sums
        else:
            for line in lines:
                name, sums = run_scenario(line, str(out))
                results[name] = sums
    except BaseException:
        if fresh:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for s in scenarios:
                shutil.rmtree(out / s.name, ignore_errors=True)
        raise
    manifest = {
        "tool_version": __version__,
        "scenario_digest": scenario_digest(scenarios),
        "master_seed": read_master_seed(args.scenarios),
        "scenarios": {
            s.name: {"path": s.name, "files": results[s.name]} for s in scenarios
        },
    }
    with open(out / MANIFEST, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    elapsed = time.perf_counter() - started
    print(f"simulated {len(scenarios)} scenarios into {out} in {elapsed:.1f} s")
    return 0


def read_master_seed(path) -> int | None:
    for line in Path(path).read_text().splitlines():
        if line.startswith("# master_seed="):
            return int(line.partition("=")[2])
    return None


def scenario_dirs(dataset: Path) -> list[Path]:
    if not dataset.is_dir():
        raise CliError(f"dataset directory {dataset} does not exist")
    dirs = sorted(p.parent for p in dataset.glob("*/scenario.meta"))
    if not dirs:
        raise CliError(f"{dataset}: no scenario directories (missing scenario.meta)")
    return dirs


def load_feature_table(dataset: Path, column: str = "throughput"):
    rows, matrix, series = [], [], {}
    for d in scenario_dirs(dataset):
        path = d / f"{CASCADE}_series.csv"
        if not path.is_file():
            raise CliError(f"missing series file {path}")
        meta = read_meta(d / "scenario.meta")
        x = read_series_column(path, column)
        try:
            fv = extract_features(x)
        except (DegenerateInputError, ContractError) as exc:
            raise CliError(f"{path}: {exc}") from None
        rows.append({"scenario": d.name, **{k: meta.get(k, "") for k in SCENARIO_KEYS}})
        matrix.append(fv.as_tuple())
        series[d.name] = x
    return rows, np.array(matrix), series


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_analyze(args) -> int:
    from minifab_bench import plotting

    dataset = Path(args.dataset)
    out = resolve_out(args.out, "analysis")
    rows, matrix, series = load_feature_table(dataset, args.column)
    n_features = len(FEATURE_NAMES)
    if not 1 <= args.components <= n_features:
        raise CliError(f"--components must be between 1 and {n_features}")
    out.mkdir(parents=True, exist_ok=True)
    keys = ("scenario", *SCENARIO_KEYS)
    write_csv(
        out / "features.csv",
        (*keys, *FEATURE_NAMES),
        [[r[k] for k in keys] + list(f) for r, f in zip(rows, matrix)],
    )
    try:
        pca = pca_on_features(matrix, FEATURE_NAMES)
    except DegenerateInputError as exc:
        raise CliError(f"PCA on features: {exc}") from None
    except ContractError as exc:
        raise CliError(f"PCA on features: {exc}") from None
    k = args.components
    pcs = [f"PC{i + 1}" for i in range(k)]
    write_csv(
        out / "pca_eigenvalues.csv",
        ("component", "eigenvalue", "explained_ratio"),
        [[f"PC{i + 1}", ev, r] for i, (ev, r) in enumerate(zip(pca.eigenvalues, pca.explained_ratio))],
    )
    write_csv(out / "pca_loadings.csv", ("feature", *pcs), [[n, *pca.loadings[j, :k]] for j, n in enumerate(FEATURE_NAMES)])
    write_csv(out / "pca_scores.csv", ("scenario", *pcs), [[r["scenario"], *pca.scores[i, :k]] for i, r in enumerate(rows)])

    groups = [f"{r['repair']} / {r['pattern']}" for r in rows]
    if k >= 2:
        plotting.plot_pca_loadings(pca.scores, pca.loadings, FEATURE_NAMES, groups, out / "pca_biplot.png", pca.explained_ratio)
    plotting.plot_stage_series(
        {name: series[name] for name in list(series)[: args.max_curves]},
        out / "cascade_throughput.png",
        ylabel=args.column,
    )
    print(f"analyzed {len(rows)} scenarios; wrote features and PCA tables to {out}")
    return 0


def cmd_evaluate(args) -> int:
    from minifab_bench import plotting

    path = Path(args.series)
    if not path.is_file():
        raise CliError(f"missing series file {path}")
    x = read_series_column(path, args.column)
    if args.model == "persistence":
        predicted = persistence_forecast(x, args.split)
    else:
        predicted = autoregressive_forecast(x, args.lookback, args.split)
    cut = split_index(x.size, args.split)
    actual = x[cut:]
    report = evaluate_forecast(actual, predicted)
    out = resolve_out(args.out, f"evaluate_{path.parent.name}_{path.stem}_{args.model}")
    out.mkdir(parents=True, exist_ok=True)
    metrics = {
        "model": args.model,
        "series": str(path),
        "column": args.column,
        "lookback": args.lookback if args.model == "ar" else None,
        "split": args.split,
        **{k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in report.as_dict().items()},
    }
    with open(out / "metrics.json", "w", newline="\n") as fh:
        json.dump(metrics, fh, indent=1)
        fh.write("\n")
    time_axis = np.arange(cut, x.size)
    write_csv(out / "predictions.csv", ("time", "actual", "predicted"), zip(time_axis, actual, predicted))
    plotting.plot_forecast(time_axis, actual, predicted, out / "forecast.png", title=f"{args.model} on {path.name}")
    for key in ("mse", "r2", "mfe", "mape", "n", "n_nonzero"):
        print(f"{key}={format_number(getattr(report, key))}")
    return 0


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minifab", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="write the benchmark scenario file")
    p.add_argument("--out", help="scenario file to write")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--filter", action="append", metavar="KEY=VALUE", help="keep matching scenarios; repeatable")
    p.add_argument("--stages", type=int, default=BENCHMARK_STAGES)
    p.add_argument("--horizon", type=int, default=BENCHMARK_HORIZON, help="minutes")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("simulate", help="run scenarios and export CSV series")
    p.add_argument("scenarios", help="scenario file from `enumerate`")
    p.add_argument("--out", help="dataset directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="feature extraction and PCA over a dataset")
    p.add_argument("dataset", help="dataset directory from `simulate`")
    p.add_argument("--out", help="analysis directory")
    p.add_argument("--components", type=int, default=2, help="principal components to tabulate")
    p.add_argument("--column", default="throughput", choices=SERIES_COLUMNS)
    p.add_argument("--max-curves", type=int, default=40, help="curves drawn in the throughput figure")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evaluate", help="one-step-ahead baseline forecast on a series CSV")
    p.add_argument("series", help="a *_series.csv file")
    p.add_argument("--model", choices=("persistence", "ar"), default="ar")
    p.add_argument("--lookback", type=int, default=10)
    p.add_argument("--split", type=float, default=0.8, help="training fraction")
    p.add_argument("--column", default="throughput", choices=SERIES_COLUMNS)
    p.add_argument("--out", help="directory for metrics, predictions and figure")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("minifab: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"minifab: error: {exc}", file=sys.stderr)
    except (ConstructionError, ContractError, DegenerateInputError, ModelError, LookupFailure, OSError) as exc:
        print(f"minifab: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
