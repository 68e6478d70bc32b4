"""
Turning simulation traces into benchmark files.

Sparse transducer observations are front-filled onto a uniform 1-minute grid
(value at minute ``k`` is the latest observation at or before ``k``) and
written as CSV, one events file and one series file per observed component.
Numbers are written in their shortest round-trip form (integral floats
without a fractional part), with a header row and LF line endings, so files
are byte-identical across reruns.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from minifab_bench import __version__
from minifab_bench.errors import ContractError, LookupFailure
from minifab_bench.factory import ScenarioConfig
from minifab_bench.pdevs import TraceRecord

SERIES_COLUMNS = ("throughput", "turnaround", "cumulative_completed", "wip")
INTEGER_COLUMNS = {"cumulative_completed", "wip"}
CASCADE = "cascade"


def extract_variable(trace: Sequence[TraceRecord], path: str, variable: str) -> list[tuple[float, object]]:
    """Time-sorted ``(time, value)`` pairs for one recorded variable.

    When several records share a time, the last one in trace order wins.
    """
    if not trace:
        return []
    seen_path = False
    out: list[tuple[float, object]] = []
    for rec in trace:
        if rec.path != path:
            continue
        seen_path = True
        if rec.variable != variable:
            continue
        if out and out[-1][0] == rec.time:
            out[-1] = (rec.time, rec.value)
        else:
            out.append((rec.time, rec.value))
    if not seen_path:
        raise LookupFailure(f"no records for component {path!r}")
    if not out:
        raise LookupFailure(f"component {path!r} never recorded {variable!r}")
    out.sort(key=lambda item: item[0])
    return out


def front_fill(sparse: Iterable[tuple[float, float]], horizon: int, step: int = 1, initial: float = 0.0) -> np.ndarray:
    """Piecewise-constant resampling of ``sparse`` onto ``0, step, ..., horizon``."""
    sparse = list(sparse)
    if step <= 0:
        raise ContractError("step must be positive")
    times = np.array([t for t, _ in sparse], dtype=float)
    values = np.array([v for _, v in sparse], dtype=float)
    if times.size and np.any(np.diff(times) < 0):
        raise ContractError("sparse series must be sorted by time")
    if times.size and (times[-1] > horizon or times[0] < 0):
        raise ContractError("sparse times must lie within [0, horizon]")
    grid = np.arange(0, horizon + 1, step, dtype=float)
    idx = np.searchsorted(times, grid, side="right") - 1
    out = np.full(grid.shape, float(initial))
    hit = idx >= 0
    out[hit] = values[idx[hit]]
    return out


def component_series(trace: Sequence[TraceRecord], path: str, horizon: int) -> dict[str, np.ndarray]:
    """Front-filled columns of :data:`SERIES_COLUMNS` for one transducer."""
    by_var: dict[str, list] = {name: [] for name in SERIES_COLUMNS}
    found = False
    for rec in trace:
        if rec.path == path:
            found = True
            sparse = by_var.get(rec.variable)
            if sparse is None:
                continue
            if sparse and sparse[-1][0] == rec.time:
                sparse[-1] = (rec.time, rec.value)
            else:
                sparse.append((rec.time, rec.value))
    if not found:
        raise LookupFailure(f"no records for component {path!r}")
    return {name: front_fill(sparse, horizon) for name, sparse in by_var.items()}


def observed_components(config: ScenarioConfig) -> dict[str, str]:
    """Export name -> transducer path for every stage and the cascade."""
    comps = {f"stage{i}": f"stage{i}.transducer" for i in range(1, config.stages + 1)}
    comps[CASCADE] = "transducer"
    return comps


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value) and value.is_integer():
            return str(int(value))
        return repr(value)
    return str(value)


def write_events_csv(path: Path, records: Iterable[TraceRecord]) -> None:
    lines = ["time_min,variable,value\n"]
    for rec in records:
        lines.append(f"{format_number(rec.time)},{rec.variable},{format_number(rec.value)}\n")
    with open(path, "w", newline="\n") as fh:
        fh.write("".join(lines))


def write_series_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    n = len(next(iter(columns.values())))
    stacked = np.column_stack([columns[c] for c in SERIES_COLUMNS])
    change = np.flatnonzero(np.any(stacked[1:] != stacked[:-1], axis=1)) + 1
    bounds = [0, *change.tolist(), n]
    lines = ["time_min," + ",".join(SERIES_COLUMNS) + "\n"]
    for start, stop in zip(bounds[:-1], bounds[1:]):
        row = stacked[start]
        cells = []
        for name, v in zip(SERIES_COLUMNS, row):
            cells.append(str(int(v)) if name in INTEGER_COLUMNS else format_number(v))
        suffix = "," + ",".join(cells) + "\n"
        lines.extend(f"{k}{suffix}" for k in range(start, stop))
    with open(path, "w", newline="\n") as fh:
        fh.write("".join(lines))


def write_meta(path: Path, config: ScenarioConfig) -> None:
    lines = [f"tool_version={__version__}"]
    lines += [f"{k}={v}" for k, v in config.as_dict().items()]
    lines.append(f"name={config.name}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_meta(path: Path) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key] = value
    return meta


def export_scenario(trace: Sequence[TraceRecord], config: ScenarioConfig, out_dir) -> list[Path]:
    """Write events/series CSVs per stage and for the cascade, plus ``scenario.meta``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    components = observed_components(config)
    by_path: dict[str, list[TraceRecord]] = {p: [] for p in components.values()}
    for rec in trace:
        bucket = by_path.get(rec.path)
        if bucket is not None and rec.kind == "state":
            bucket.append(rec)
    written = []
    for name, path in components.items():
        records = by_path[path]
        events = out_dir / f"{name}_events.csv"
        write_events_csv(events, records)
        series = out_dir / f"{name}_series.csv"
        write_series_csv(series, component_series(records, path, config.horizon))
        written += [events, series]
    meta = out_dir / "scenario.meta"
    write_meta(meta, config)
    written.append(meta)
    return written


def read_series_column(path, column: str = "throughput") -> np.ndarray:
    """Load one column of a series CSV written by :func:`write_series_csv`."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if column not in header:
        raise LookupFailure(f"{path}: no column {column!r}")
    return np.loadtxt(path, delimiter=",", skiprows=1, usecols=header.index(column), ndmin=1)
