import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minifab_bench.dataset import (
    SERIES_COLUMNS,
    export_scenario,
    extract_variable,
    format_number,
    front_fill,
    read_meta,
    read_series_column,
)
from minifab_bench.errors import ContractError, LookupFailure
from minifab_bench.factory import ScenarioConfig, build_cascade
from minifab_bench.pdevs import TraceRecord, simulate

FIFTY_FOUR = ScenarioConfig(36, 9, 9, "NoRepair", "Uniform", stages=8, horizon=25_000, seed=1)


@pytest.fixture(scope="module")
def fifty_four_trace():
    return simulate(build_cascade(FIFTY_FOUR), FIFTY_FOUR.horizon, seed=FIFTY_FOUR.seed, record_outputs=False)


@pytest.fixture(scope="module")
def exported(fifty_four_trace, tmp_path_factory):
    out = tmp_path_factory.mktemp("export")
    return out, export_scenario(fifty_four_trace, FIFTY_FOUR, out)


def rec(t, value, var="x", path="p"):
    return TraceRecord(t, path, "state", var, value)


def test_extract_empty_trace():
    assert extract_variable([], "p", "x") == []


def test_extract_last_writer_wins():
    trace = [rec(0, 1), rec(5, 2), rec(5, 3), rec(7, 4)]
    assert extract_variable(trace, "p", "x") == [(0, 1), (5, 3), (7, 4)]


def test_extract_unknown_names():
    trace = [rec(0, 1)]
    with pytest.raises(LookupFailure):
        extract_variable(trace, "q", "x")
    with pytest.raises(LookupFailure):
        extract_variable(trace, "p", "y")


def test_extract_final_completion_count(fifty_four_trace):
    assert extract_variable(fifty_four_trace, "transducer", "cumulative_completed")[-1] == (25_000, 54)


@pytest.mark.parametrize(
    "sparse, horizon, expected",
    [
        ([(0, 5.0)], 3, [5, 5, 5, 5]),
        ([(2.5, 1.0), (4, 2.0)], 5, [0, 0, 0, 1, 2, 2]),
        ([], 2, [0, 0, 0]),
    ],
)
def test_front_fill_examples(sparse, horizon, expected):
    assert front_fill(sparse, horizon).tolist() == expected


def test_front_fill_contract():
    with pytest.raises(ContractError):
        front_fill([(3, 1.0), (2, 1.0)], 5)
    with pytest.raises(ContractError):
        front_fill([(6, 1.0)], 5)
    with pytest.raises(ContractError):
        front_fill([(-1, 1.0)], 5)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(-1e6, 1e6)), max_size=30))
def test_front_fill_matches_step_rule(events):
    events = sorted(events, key=lambda e: e[0])
    filled = front_fill(events, 100)
    assert filled.size == 101
    for k in range(101):
        seen = [v for t, v in events if t <= k]
        assert filled[k] == (seen[-1] if seen else 0.0)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_number_round_trips(x):
    assert float(format_number(x)) == x
    assert format_number(np.float64(x)) == format_number(x)


def test_format_integral_float():
    assert format_number(54.0) == "54"
    assert format_number(0.00216) == "0.00216"


def test_export_file_set(exported):
    out, files = exported
    series = sorted(p.name for p in files if p.name.endswith("_series.csv"))
    assert series == sorted([f"stage{i}_series.csv" for i in range(1, 9)] + ["cascade_series.csv"])
    assert len([p for p in files if p.name.endswith("_events.csv")]) == 9
    meta = read_meta(out / "scenario.meta")
    assert meta["pa"] == "36" and meta["horizon"] == "25000"


def test_series_shape_and_format(exported):
    out, files = exported
    for p in files:
        if not p.name.endswith("_series.csv"):
            continue
        raw = p.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == "time_min," + ",".join(SERIES_COLUMNS)
        assert len(lines) == 25_002
        times = np.loadtxt(p, delimiter=",", skiprows=1, usecols=0)
        assert np.array_equal(times, np.arange(25_001))


def test_series_invariants(exported):
    out, _ = exported
    cascade = read_series_column(out / "cascade_series.csv", "cumulative_completed")
    assert np.array_equal(cascade, read_series_column(out / "stage8_series.csv", "cumulative_completed"))
    previous = None
    for i in range(1, 9):
        cum = read_series_column(out / f"stage{i}_series.csv", "cumulative_completed")
        assert np.all(np.diff(cum) >= 0)
        if previous is not None:
            assert np.all(cum <= previous)
        previous = cum
        for col in ("throughput", "turnaround"):
            assert np.all(read_series_column(out / f"stage{i}_series.csv", col) >= 0)


def test_fifty_four_lot_final_throughput(exported):
    out, _ = exported
    thr = read_series_column(out / "cascade_series.csv", "throughput")
    assert thr[-1] == 54 / 25_000 == 0.00216
    assert read_series_column(out / "cascade_series.csv", "wip")[-1] == 0


def test_series_round_trip_with_events(exported):
    out, _ = exported
    events = np.genfromtxt(out / "stage3_events.csv", delimiter=",", names=True, dtype=None, encoding=None)
    cum = read_series_column(out / "stage3_series.csv", "cumulative_completed")
    for t, var, value in events:
        if var == "cumulative_completed":
            assert cum[math.ceil(t)] == float(value)


def test_export_is_byte_identical(fifty_four_trace, exported, tmp_path):
    out, files = exported
    trace = simulate(build_cascade(FIFTY_FOUR), FIFTY_FOUR.horizon, seed=FIFTY_FOUR.seed, record_outputs=False)
    again = export_scenario(trace, FIFTY_FOUR, tmp_path)
    for a, b in zip(files, again):
        assert a.read_bytes() == b.read_bytes()


def test_read_unknown_column(exported):
    out, _ = exported
    with pytest.raises(LookupFailure):
        read_series_column(out / "cascade_series.csv", "yield")
