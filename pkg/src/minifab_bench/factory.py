"""
Assembly of MiniFab networks and the benchmark scenario list.

A single stage routes every batch through the six steps

    1 diffusion -> 2 implantation -> 3 lithography ->
    4 implantation -> 5 diffusion -> 6 lithography -> stage output

with the diffusion (A/B) and implantation (C/D) dispatchers choosing the
machine for both the forward and the feedback visits. Cascades chain stages
so that lots leaving stage ``i`` are re-batched at stage ``i + 1``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from importlib import resources

from minifab_bench.errors import ConstructionError
from minifab_bench.models import (
    MTBF,
    PA_PB_SIZES,
    TW_SIZES,
    AfterLots,
    Batcher,
    Dispatcher,
    Generator,
    GeneratorConfig,
    Jitter,
    LotType,
    Machine,
    MachineConfig,
    NoRepair,
    Pattern,
    PhaseDurations,
    Transducer,
)
from minifab_bench.pdevs import Coupled, derive_component_seed

REPAIR_KINDS = ("ProcessingSteps", "MTBF", "NoRepair")
PATTERNS = ("Uniform", "Sinusoidal")
# Rows of the benchmark design: (repair, generator pattern).
DESIGN_ROWS = (
    ("ProcessingSteps", "Uniform"),
    ("MTBF", "Uniform"),
    ("NoRepair", "Uniform"),
    ("NoRepair", "Sinusoidal"),
)
BENCHMARK_STAGES = 8
BENCHMARK_HORIZON = 25_000


@dataclass(frozen=True)
class ScenarioConfig:
    pa: int
    pb: int
    tw: int
    repair: str = "NoRepair"
    pattern: str = "Uniform"
    stages: int = BENCHMARK_STAGES
    horizon: int = BENCHMARK_HORIZON
    seed: int = 0
    index: int = -1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.pa not in PA_PB_SIZES or self.pb not in PA_PB_SIZES:
            raise ConstructionError(f"pa/pb must be in {PA_PB_SIZES}, got {self.pa}/{self.pb}")
        if self.tw not in TW_SIZES:
            raise ConstructionError(f"tw must be in {TW_SIZES}, got {self.tw}")
        if self.repair not in REPAIR_KINDS:
            raise ConstructionError(f"repair must be one of {REPAIR_KINDS}, got {self.repair!r}")
        if self.pattern not in PATTERNS:
            raise ConstructionError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if self.stages < 1:
            raise ConstructionError(f"stages must be >= 1, got {self.stages}")
        if self.horizon < 1:
            raise ConstructionError(f"horizon must be >= 1, got {self.horizon}")

    @property
    def total_lots(self) -> int:
        return self.pa + self.pb + self.tw

    @property
    def name(self) -> str:
        prefix = f"s{self.index:03d}_" if self.index >= 0 else ""
        return f"{prefix}{self.repair}_{self.pattern}_pa{self.pa}_pb{self.pb}_tw{self.tw}"

    def to_line(self) -> str:
        return " ".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))

    @classmethod
    def from_line(cls, line: str) -> ScenarioConfig:
        values = {}
        for token in line.split():
            key, sep, value = token.partition("=")
            if not sep:
                raise ConstructionError(f"malformed scenario token {token!r}")
            values[key] = value
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConstructionError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            kwargs = {k: (v if k in ("repair", "pattern") else int(v)) for k, v in values.items()}
        except ValueError as exc:
            raise ConstructionError(f"bad scenario value: {exc}") from None
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return asdict(self)


# -- defaults -----------------------------------------------------------------


@lru_cache(maxsize=None)
def load_defaults() -> dict:
    text = resources.files("minifab_bench.data").joinpath("defaults.json").read_text()
    return json.loads(text)


def machine_configs(repair: str = "NoRepair", defaults: dict | None = None) -> dict[str, MachineConfig]:
    """Machine configurations for one stage under the given repair row."""
    defaults = defaults or load_defaults()
    if repair == "ProcessingSteps":
        policy = AfterLots(**defaults["repair"]["ProcessingSteps"])
    elif repair == "MTBF":
        policy = MTBF(**defaults["repair"]["MTBF"])
    elif repair == "NoRepair":
        policy = NoRepair()
    else:
        raise ConstructionError(f"unknown repair kind {repair!r}")
    jitter = Jitter(**defaults["jitter"]) if defaults.get("jitter") else None
    configs = {}
    for machine_id, steps in defaults["machines"].items():
        durations = {int(s): PhaseDurations(*d) for s, d in steps.items()}
        configs[machine_id] = MachineConfig(machine_id, durations, jitter, policy)
    return configs


# -- builders -----------------------------------------------------------------


def build_single_stage(config: ScenarioConfig, stage_index: int = 1, defaults: dict | None = None) -> Coupled:
    """One MiniFab stage.

    Stage 1 owns the three lot generators and exposes the lots they emit on
    its ``generated`` port; later stages take lots on ``in``. Completed
    batches leave on ``out``.
    """
    config.validate()
    if stage_index < 1:
        raise ConstructionError("stage_index starts at 1")
    first = stage_index == 1
    stage = Coupled(
        f"stage{stage_index}",
        inputs=() if first else ("in",),
        outputs=("out", "generated") if first else ("out",),
    )
    batcher = stage.add(Batcher("batcher"))
    transducer = stage.add(Transducer("transducer", observe_until=config.horizon))
    if first:
        for lot_type, total in ((LotType.PA, config.pa), (LotType.PB, config.pb), (LotType.TW, config.tw)):
            gen = stage.add(Generator(f"gen_{lot_type.value}", GeneratorConfig(lot_type, total, config.pattern)))
            stage.connect(gen, "out", batcher, "in")
            stage.connect(gen, "out", transducer, "arrived")
            stage.connect(gen, "out", None, "generated")
    else:
        stage.connect(None, "in", batcher, "in")
        stage.connect(None, "in", transducer, "arrived")

    machines = {m: stage.add(Machine(m, cfg)) for m, cfg in machine_configs(config.repair, defaults).items()}
    diffusion = stage.add(Dispatcher("diffusion_dispatcher", ("A", "B")))
    implantation = stage.add(Dispatcher("implantation_dispatcher", ("C", "D")))
    for dispatcher in (diffusion, implantation):
        for m in dispatcher.targets:
            stage.connect(dispatcher, f"to_{m}", machines[m], "in")
            stage.connect(machines[m], "status", dispatcher, f"status_{m}")

    stage.connect(batcher, "out", diffusion, "in")
    for m in ("A", "B"):
        stage.connect(machines[m], "done1", implantation, "in")  # step 2
        stage.connect(machines[m], "done5", machines["E"], "in")  # step 6
    for m in ("C", "D"):
        stage.connect(machines[m], "done2", machines["E"], "in")  # step 3
        stage.connect(machines[m], "done4", diffusion, "in")  # step 5, feedback
    stage.connect(machines["E"], "done3", implantation, "in")  # step 4, feedback
    stage.connect(machines["E"], "done6", None, "out")
    stage.connect(machines["E"], "done6", transducer, "completed")
    return stage


def build_cascade(config: ScenarioConfig, defaults: dict | None = None) -> Coupled:
    """Chain ``config.stages`` stages with a cascade-level transducer."""
    config.validate()
    cascade = Coupled("cascade")
    stages = [cascade.add(build_single_stage(config, i, defaults)) for i in range(1, config.stages + 1)]
    for upstream, downstream in zip(stages, stages[1:]):
        cascade.connect(upstream, "out", downstream, "in")
    transducer = cascade.add(Transducer("transducer", observe_until=config.horizon))
    cascade.connect(stages[0], "generated", transducer, "arrived")
    cascade.connect(stages[-1], "out", transducer, "completed")
    return cascade


# -- scenario enumeration -----------------------------------------------------


def load_lot_configs(text: str | None = None) -> list[tuple[int, int, int]]:
    """Parse the canonical ``pa,pb,tw`` file (``#`` starts a comment)."""
    if text is None:
        text = resources.files("minifab_bench.data").joinpath("lot_configs.txt").read_text()
    tuples = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ConstructionError(f"lot config line {lineno}: expected pa,pb,tw")
        pa, pb, tw = (int(p) for p in parts)
        if pa not in PA_PB_SIZES or pb not in PA_PB_SIZES or tw not in TW_SIZES:
            raise ConstructionError(f"lot config line {lineno}: {pa},{pb},{tw} outside permitted sets")
        tuples.append((pa, pb, tw))
    return tuples


def scenario_seed(master_seed: int, index: int) -> int:
    return derive_component_seed(master_seed, f"scenario/{index}")


def enumerate_scenarios(
    master_seed: int = 0,
    stages: int = BENCHMARK_STAGES,
    horizon: int = BENCHMARK_HORIZON,
) -> list[ScenarioConfig]:
    """All 4 x 93 benchmark scenarios, row-major over the design rows."""
    lots = load_lot_configs()
    scenarios = []
    for repair, pattern in DESIGN_ROWS:
        for pa, pb, tw in lots:
            index = len(scenarios)
            scenarios.append(
                ScenarioConfig(pa, pb, tw, repair, pattern, stages, horizon, scenario_seed(master_seed, index), index)
            )
    return scenarios


__all__ = [
    "BENCHMARK_HORIZON",
    "BENCHMARK_STAGES",
    "Pattern",
    "ScenarioConfig",
    "DESIGN_ROWS",
    "build_cascade",
    "build_single_stage",
    "enumerate_scenarios",
    "load_defaults",
    "load_lot_configs",
    "machine_configs",
    "scenario_seed",
]
