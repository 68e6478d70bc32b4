import hashlib
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from minifab_bench.errors import ConstructionError, ModelError
from minifab_bench.factory import ScenarioConfig, build_cascade, build_single_stage
from minifab_bench.models import Generator, GeneratorConfig, LotType, Pattern
from minifab_bench.pdevs import INFINITY, Atomic, Coupled, Simulator, derive_component_seed, flatten, simulate

from conftest import by_variable, outputs_of


class Ticker(Atomic):
    outputs = ("out",)

    def __init__(self, name, period, limit=None):
        super().__init__(name)
        self.period = period
        self.limit = limit
        self.count = 0

    def time_advance(self):
        if self.limit is not None and self.count >= self.limit:
            return INFINITY
        return self.period

    def output(self):
        return [("out", self.count)]

    def delta_int(self):
        self.count += 1
        self.record("count", self.count)


class Probe(Atomic):
    """Fires internally every ``period`` and logs which transition ran."""

    inputs = ("in",)

    def __init__(self, name, period):
        super().__init__(name)
        self.period = period
        self.calls = []

    def time_advance(self):
        return self.period

    def delta_int(self):
        self.calls.append(("int", self.now))

    def delta_ext(self, elapsed, bag):
        self.calls.append(("ext", self.now, elapsed, tuple(v for _, v in bag)))

    def delta_con(self, bag):
        self.calls.append(("con", self.now, tuple(v for _, v in bag)))


class Negative(Atomic):
    def time_advance(self):
        return -1.0


def test_passive_atomic_gives_empty_trace():
    root = Coupled("root")
    root.add(Atomic("idle"))
    assert simulate(root, 1000) == []


def test_empty_coupled_model_runs():
    assert simulate(Coupled("nothing"), 50) == []


def test_generator_period_480_emits_at_480_960_1440():
    root = Coupled("root")
    root.add(Generator("g", GeneratorConfig(LotType.PA, 3, Pattern.UNIFORM)))
    trace = simulate(root, 10_000)
    assert [t for t, _ in outputs_of(trace, "g")] == [480, 960, 1440]
    assert by_variable(trace, "g", "generated") == [(480, 1), (960, 2), (1440, 3)]


def test_stops_after_end_time():
    root = Coupled("root")
    root.add(Ticker("t", 10))
    trace = simulate(root, 35)
    assert [r.time for r in trace if r.kind == "state"] == [10, 20, 30]


def test_confluent_called_once_for_simultaneous_events():
    root = Coupled("root")
    root.add(Ticker("src", 10, limit=2))
    probe = root.add(Probe("probe", 10))
    root.connect("src", "out", "probe", "in")
    simulate(root, 25)
    assert probe.calls == [("con", 10.0, (0,)), ("con", 20.0, (1,))]


def test_external_event_reports_elapsed_time():
    root = Coupled("root")
    root.add(Ticker("src", 4, limit=1))
    probe = root.add(Probe("probe", 10))
    root.connect("src", "out", "probe", "in")
    simulate(root, 15)
    assert probe.calls[0] == ("ext", 4.0, 4.0, (0,))
    # The external transition reschedules the internal event from t=4.
    assert probe.calls[1] == ("int", 14.0)


def test_default_confluent_runs_internal_then_external():
    order = []

    class Both(Atomic):
        inputs = ("in",)

        def time_advance(self):
            return 5.0 if not order else INFINITY

        def delta_int(self):
            order.append("int")

        def delta_ext(self, elapsed, bag):
            order.append(("ext", elapsed))

    root = Coupled("root")
    root.add(Ticker("src", 5, limit=1))
    root.add(Both("b"))
    root.connect("src", "out", "b", "in")
    simulate(root, 10)
    assert order == ["int", ("ext", 0.0)]


def test_negative_time_advance_raises():
    root = Coupled("root")
    root.add(Negative("bad"))
    with pytest.raises(ModelError):
        simulate(root, 10)


def test_unknown_port_rejected():
    root = Coupled("root")
    root.add(Ticker("a", 1))
    root.add(Probe("b", 1))
    with pytest.raises(ConstructionError):
        root.connect("a", "nope", "b", "in")
    with pytest.raises(ConstructionError):
        root.connect("a", "out", "b", "nope")
    with pytest.raises(ConstructionError):
        root.connect("a", "out", "ghost", "in")


def test_self_loop_and_duplicate_rejected():
    root = Coupled("root")
    root.add(Probe("p", 1))
    with pytest.raises(ConstructionError):
        root.add(Probe("p", 2))
    with pytest.raises(ConstructionError):
        root.connect("p", "in", "p", "in")


def test_dangling_input_port_rejected():
    inner = Coupled("inner", inputs=("in",))
    inner.add(Probe("p", 100))  # no coupling from inner:in
    root = Coupled("root")
    root.add(Ticker("src", 1))
    root.add(inner)
    root.connect("src", "out", "inner", "in")
    with pytest.raises(ConstructionError, match="dangling"):
        Simulator(root)


def test_messages_cross_hierarchy_levels():
    left = Coupled("left", outputs=("o",))
    left.add(Ticker("src", 3, limit=2))
    left.connect("src", "out", None, "o")
    right = Coupled("right", inputs=("i",))
    probe = right.add(Probe("sink", 100))
    right.connect(None, "i", "sink", "in")
    root = Coupled("root")
    root.add(left)
    root.add(right)
    root.connect("left", "o", "right", "i")
    simulate(root, 10)
    assert [c[:2] for c in probe.calls] == [("ext", 3.0), ("ext", 6.0)]


def test_trace_ordered_by_time_then_path():
    root = Coupled("root")
    for name in ("b", "a", "c"):
        root.add(Ticker(name, 5, limit=2))
    trace = simulate(root, 20, record_outputs=False)
    assert [(r.time, r.path) for r in trace] == [(5, "a"), (5, "b"), (5, "c"), (10, "a"), (10, "b"), (10, "c")]


def test_flattened_single_stage_trace_identical():
    config = ScenarioConfig(12, 6, 3, "MTBF", "Sinusoidal", stages=1, horizon=20_000, seed=3)
    hier = build_single_stage(config)
    flat = flatten(build_single_stage(config))
    assert all(not isinstance(c, Coupled) for c in flat.components.values())
    assert simulate(hier, 20_000, seed=11) == simulate(flat, 20_000, seed=11)


def test_flattened_cascade_trace_identical():
    config = ScenarioConfig(9, 6, 3, "ProcessingSteps", "Uniform", stages=3, horizon=15_000)
    a = simulate(build_cascade(config), 15_000, seed=5)
    b = simulate(flatten(build_cascade(config)), 15_000, seed=5)
    assert a == b and len(a) > 100


def test_flatten_leaves_original_untouched():
    config = ScenarioConfig(3, 0, 0, stages=1, horizon=5000)
    stage = build_single_stage(config)
    before = sorted(stage.components)
    flatten(stage)
    assert sorted(stage.components) == before


def test_replay_is_deterministic():
    config = ScenarioConfig(12, 12, 6, "MTBF", "Uniform", stages=2, horizon=12_000)
    runs = [simulate(build_cascade(config), 12_000, seed=99) for _ in range(2)]
    assert runs[0] == runs[1]


def test_seed_matches_independent_digest():
    expected = int.from_bytes(hashlib.blake2b(b"42\x1fstage3.A", digest_size=8).digest(), "little")
    assert derive_component_seed(42, "stage3.A") == expected


def test_component_seeds_distinct_over_minifab_paths():
    from minifab_bench.pdevs import _collect_atomics

    atomics, _ = _collect_atomics(build_cascade(ScenarioConfig(3, 3, 3, stages=8)))
    paths = sorted(atomics)
    for a, b in itertools.islice(itertools.combinations(range(1000), 2), 1000):
        seeds_a = [derive_component_seed(a, p) for p in paths]
        seeds_b = [derive_component_seed(b, p) for p in paths]
        assert len(set(seeds_a)) == len(paths)
        assert set(seeds_a).isdisjoint(seeds_b)


@given(st.integers(0, 2**63), st.text(min_size=1, max_size=30))
def test_seed_is_64_bit_and_stable(master, path):
    s = derive_component_seed(master, path)
    assert 0 <= s < 2**64
    assert s == derive_component_seed(master, path)
