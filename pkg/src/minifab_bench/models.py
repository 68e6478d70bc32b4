"""
Atomic MiniFab models: lot generators, the batcher, dispatch coordinators,
processing machines with repair, and observing transducers.

All models are driven by :mod:`minifab_bench.pdevs`. Batches travel between
machines as immutable :class:`Batch` values; ``Batch.step`` is the step the
batch is waiting for (or undergoing). A machine finishing step ``s`` emits
the batch on port ``done<s>`` with the step already advanced to ``s + 1``,
except after step 6 where the batch leaves unchanged.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping

from minifab_bench.errors import ConstructionError, ModelError
from minifab_bench.pdevs import INFINITY, Atomic

PA_PB_SIZES = (0, 2, 3, 6, 9, 12, 18, 24, 27, 30, 36, 45, 48, 54, 60, 72, 81, 90)
TW_SIZES = (0, 1, 3, 6, 9, 12, 15, 18, 27)
SINUSOID_PATTERN = (1, 2, 3, 2, 1)
BATCH_SIZE = 3
N_STEPS = 6

MACHINE_STEPS = {
    "A": (1, 5),
    "B": (1, 5),
    "C": (2, 4),
    "D": (2, 4),
    "E": (3, 6),
}


class LotType(str, enum.Enum):
    PA = "Pa"
    PB = "Pb"
    TW = "Tw"

    @property
    def period(self) -> float:
        return GENERATION_PERIOD[self]

    def __str__(self):
        return self.value


GENERATION_PERIOD = {LotType.PA: 480.0, LotType.PB: 960.0, LotType.TW: 1440.0}


class Pattern(str, enum.Enum):
    UNIFORM = "Uniform"
    SINUSOIDAL = "Sinusoidal"

    def __str__(self):
        return self.value


class MachinePhase(str, enum.Enum):
    IDLE = "Idle"
    LOADING = "Loading"
    PROCESSING = "Processing"
    UNLOADING = "Unloading"
    TRANSPORTING = "Transporting"
    REPAIR = "Repair"

    def __str__(self):
        return self.value


WORK_PHASES = (
    MachinePhase.LOADING,
    MachinePhase.PROCESSING,
    MachinePhase.UNLOADING,
    MachinePhase.TRANSPORTING,
)


@dataclass(frozen=True, slots=True)
class WaferLot:
    id: int
    lot_type: LotType
    created_at: float
    stage_entered_at: float
    completed_at: float | None = None
    step: int = 0

    def __str__(self):
        return f"{self.lot_type.value}#{self.id}"


@dataclass(frozen=True, slots=True)
class Batch:
    id: int
    lots: tuple[WaferLot, ...]
    step: int

    def __post_init__(self):
        if len(self.lots) != BATCH_SIZE:
            raise ModelError(f"batch {self.id} has {len(self.lots)} lots, expected {BATCH_SIZE}")
        if not 1 <= self.step <= N_STEPS:
            raise ModelError(f"batch {self.id} has invalid step {self.step}")
        if any(lot.step != self.step for lot in self.lots):
            raise ModelError(f"batch {self.id}: member lots disagree on step")

    def advance(self) -> Batch:
        step = self.step + 1
        return Batch(self.id, tuple(replace(lot, step=step) for lot in self.lots), step)

    def __str__(self):
        ids = ",".join(str(lot.id) for lot in self.lots)
        return f"B{self.id}/s{self.step}[{ids}]"


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class PhaseDurations:
    load: float
    process: float
    unload: float
    transport: float

    def __post_init__(self):
        for name in ("load", "process", "unload", "transport"):
            if not getattr(self, name) > 0:
                raise ConstructionError(f"phase duration {name} must be > 0")

    def of(self, phase: MachinePhase) -> float:
        return {
            MachinePhase.LOADING: self.load,
            MachinePhase.PROCESSING: self.process,
            MachinePhase.UNLOADING: self.unload,
            MachinePhase.TRANSPORTING: self.transport,
        }[phase]

    @property
    def total(self) -> float:
        return self.load + self.process + self.unload + self.transport


@dataclass(frozen=True)
class Jitter:
    """Multiplicative duration noise: each phase lasts ``d * (1 + sample)``.

    ``uniform`` draws the sample from U(-param, param) and needs param < 1;
    ``exponential`` draws it from an exponential with mean ``param``.
    """

    kind: str = "uniform"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "exponential"):
            raise ConstructionError(f"unknown jitter kind {self.kind!r}")
        if self.param < 0:
            raise ConstructionError("jitter parameter must be >= 0")
        if self.kind == "uniform" and self.param >= 1:
            raise ConstructionError("uniform jitter parameter must be < 1")

    def sample(self, rng) -> float:
        if self.param == 0:
            return 0.0
        if self.kind == "uniform":
            return float(rng.uniform(-self.param, self.param))
        return float(rng.exponential(self.param))


@dataclass(frozen=True)
class NoRepair:
    pass


@dataclass(frozen=True)
class AfterLots:
    """Repair for ``duration`` minutes after every ``count`` completed batches."""

    count: int
    duration: float

    def __post_init__(self):
        if self.count < 1 or self.duration <= 0:
            raise ConstructionError("AfterLots needs count >= 1 and duration > 0")


@dataclass(frozen=True)
class MTBF:
    """Exponential time-to-failure with mean ``mean_time``; repair lasts ``duration``."""

    mean_time: float
    duration: float

    def __post_init__(self):
        if self.mean_time <= 0 or self.duration <= 0:
            raise ConstructionError("MTBF needs mean_time > 0 and duration > 0")


RepairPolicy = NoRepair | AfterLots | MTBF


@dataclass(frozen=True)
class MachineConfig:
    machine_id: str
    durations: Mapping[int, PhaseDurations]
    jitter: Jitter | None = None
    repair: RepairPolicy = field(default_factory=NoRepair)

    def __post_init__(self):
        if self.machine_id not in MACHINE_STEPS:
            raise ConstructionError(f"unknown machine {self.machine_id!r}")
        served = set(MACHINE_STEPS[self.machine_id])
        if set(self.durations) != served:
            raise ConstructionError(
                f"machine {self.machine_id} serves steps {sorted(served)}, "
                f"got durations for {sorted(self.durations)}"
            )

    @property
    def steps(self) -> tuple[int, ...]:
        return MACHINE_STEPS[self.machine_id]


@dataclass(frozen=True)
class GeneratorConfig:
    lot_type: LotType
    total_lots: int
    pattern: Pattern = Pattern.UNIFORM
    period: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lot_type", LotType(self.lot_type))
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        expected = self.lot_type.period
        if self.period is None:
            object.__setattr__(self, "period", expected)
        elif self.period != expected:
            raise ConstructionError(f"{self.lot_type} lots are generated every {expected} minutes")
        allowed = TW_SIZES if self.lot_type is LotType.TW else PA_PB_SIZES
        if self.total_lots not in allowed:
            raise ConstructionError(f"{self.lot_type} total {self.total_lots} not in {allowed}")


# -- atomic models ------------------------------------------------------------


class Generator(Atomic):
    """Emits wafer lots every ``period`` minutes starting at ``t = period``.

    Uniform generators emit one lot per period; sinusoidal ones cycle
    through 1, 2, 3, 2, 1 lots, truncating the last emission so that exactly
    ``total_lots`` are produced.
    """

    outputs = ("out",)
    _ID_OFFSET = {LotType.PA: 0, LotType.PB: 1, LotType.TW: 2}

    def __init__(self, name: str, config: GeneratorConfig):
        super().__init__(name)
        self.config = config
        self.emitted = 0
        self.emissions = 0

    def _next_size(self) -> int:
        remaining = self.config.total_lots - self.emitted
        if self.config.pattern is Pattern.UNIFORM:
            size = 1
        else:
            size = SINUSOID_PATTERN[self.emissions % len(SINUSOID_PATTERN)]
        return min(size, remaining)

    def time_advance(self):
        if self.emitted >= self.config.total_lots:
            return INFINITY
        return self.config.period

    def output(self):
        offset = self._ID_OFFSET[self.config.lot_type]
        lots = []
        for k in range(self._next_size()):
            serial = self.emitted + k
            lots.append(
                ("out", WaferLot(3 * serial + offset, self.config.lot_type, self.now, self.now))
            )
        return lots

    def delta_int(self):
        self.emitted += self._next_size()
        self.emissions += 1
        self.record("generated", self.emitted)


class Batcher(Atomic):
    """FIFO collector releasing a batch of three as soon as three lots wait.

    Accepts single lots or whole batches (a completed batch from an upstream
    stage is dissolved into its lots, which restart at step 0).
    """

    inputs = ("in",)
    outputs = ("out",)

    def __init__(self, name: str):
        super().__init__(name)
        self.queue: deque[WaferLot] = deque()
        self.next_id = 0

    def time_advance(self):
        return 0.0 if len(self.queue) >= BATCH_SIZE else INFINITY

    def _batches(self):
        lots = list(self.queue)
        out = []
        for k in range(len(lots) // BATCH_SIZE):
            members = tuple(replace(lot, step=1) for lot in lots[k * BATCH_SIZE : (k + 1) * BATCH_SIZE])
            out.append(Batch(self.next_id + k, members, 1))
        return out

    def output(self):
        return [("out", batch) for batch in self._batches()]

    def delta_int(self):
        n = len(self.queue) // BATCH_SIZE
        for _ in range(n * BATCH_SIZE):
            self.queue.popleft()
        self.next_id += n
        self.record("lots_held", len(self.queue))

    def delta_ext(self, elapsed, bag):
        for _, value in bag:
            lots = value.lots if isinstance(value, Batch) else (value,)
            for lot in lots:
                self.queue.append(replace(lot, stage_entered_at=self.now, step=0, completed_at=None))
        self.record("lots_held", len(self.queue))


class Dispatcher(Atomic):
    """Zero-time relay sending each batch to the machine with the shorter queue.

    Queue lengths come from ``status_<machine>`` couplings; the dispatcher also
    bumps its own estimate when it dispatches so that several batches arriving
    in one instant are spread out. Ties go to the first target.
    """

    def __init__(self, name: str, targets: tuple[str, str]):
        super().__init__(name)
        if len(targets) != 2 or targets[0] == targets[1]:
            raise ConstructionError("a dispatcher needs two distinct targets")
        self.targets = tuple(targets)
        self.inputs = ("in",) + tuple(f"status_{m}" for m in targets)
        self.outputs = tuple(f"to_{m}" for m in targets)
        self.estimate = {m: 0 for m in targets}
        self.pending: list[tuple[str, Batch]] = []

    def time_advance(self):
        return 0.0 if self.pending else INFINITY

    def output(self):
        return [(f"to_{m}", batch) for m, batch in self.pending]

    def delta_int(self):
        self.pending = []

    def delta_ext(self, elapsed, bag):
        for port, value in bag:
            if port.startswith("status_"):
                self.estimate[port[len("status_") :]] = value
        for port, value in bag:
            if port != "in":
                continue
            first, second = self.targets
            target = first if self.estimate[first] <= self.estimate[second] else second
            self.estimate[target] += 1
            self.pending.append((target, value))


class Machine(Atomic):
    """A processing machine with a FIFO queue of batches.

    Each batch goes through loading, processing, unloading and transport;
    phases are never interrupted. Repairs happen only between batches (or
    while idle). The machine publishes the number of batches it holds on
    ``status`` whenever that number changes, via a zero-time internal event.
    """

    inputs = ("in",)

    def __init__(self, name: str, config: MachineConfig):
        super().__init__(name)
        self.config = config
        self.outputs = ("status",) + tuple(f"done{s}" for s in config.steps)
        self.queue: deque[Batch] = deque()
        self.current: Batch | None = None
        self.phase = MachinePhase.IDLE
        self.sigma = INFINITY
        self.time_to_failure: float | None = None
        self.completed = 0
        self.dirty = False
        self._last_ta = INFINITY
        self._recorded_phase = None

    @property
    def held(self) -> int:
        return len(self.queue) + (self.current is not None)

    def initialize(self):
        if isinstance(self.config.repair, MTBF):
            self.time_to_failure = self._sample_failure()

    def _sample_failure(self) -> float:
        return float(self.rng.exponential(self.config.repair.mean_time))

    def _duration(self, phase: MachinePhase) -> float:
        base = self.config.durations[self.current.step].of(phase)
        if self.config.jitter is None:
            return base
        return base * (1.0 + self.config.jitter.sample(self.rng))

    def time_advance(self):
        if self.dirty:
            ta = 0.0
        elif self.phase is MachinePhase.IDLE:
            ta = INFINITY if self.time_to_failure is None else self.time_to_failure
        else:
            ta = self.sigma
        self._last_ta = ta
        return ta

    def _elapse(self, elapsed: float) -> None:
        if elapsed == 0:
            return
        if self.phase is not MachinePhase.IDLE:
            self.sigma -= elapsed
        if self.time_to_failure is not None and self.phase is not MachinePhase.REPAIR:
            self.time_to_failure = max(self.time_to_failure - elapsed, 0.0)

    def _event_due(self) -> bool:
        """True when the pending internal event ends a phase or is a failure."""
        if not self.dirty:
            return True
        if self.phase is MachinePhase.IDLE:
            return self.time_to_failure is not None and self.time_to_failure <= 0
        return self.sigma <= 0

    def output(self):
        msgs = []
        if self.dirty:
            msgs.append(("status", self.held))
        if self.phase is MachinePhase.TRANSPORTING and self._event_due():
            batch = self.current
            port = f"done{batch.step}"
            msgs.append((port, batch.advance() if batch.step < N_STEPS else batch))
        return msgs

    def _set_phase(self, phase: MachinePhase) -> None:
        self.phase = phase
        if phase is not self._recorded_phase:
            self._recorded_phase = phase
            self.record("phase", phase.value)

    def _start_next(self) -> None:
        self._set_phase(MachinePhase.IDLE)
        self.sigma = INFINITY
        if self.queue:
            self.current = self.queue.popleft()
            self._set_phase(MachinePhase.LOADING)
            self.record("batch", str(self.current))
            self.sigma = self._duration(MachinePhase.LOADING)

    def _enter_repair(self) -> None:
        self._set_phase(MachinePhase.REPAIR)
        self.sigma = self.config.repair.duration

    def _repair_due(self) -> bool:
        repair = self.config.repair
        if isinstance(repair, AfterLots):
            return self.completed % repair.count == 0
        if isinstance(repair, MTBF):
            return self.time_to_failure <= 0
        return False

    def delta_int(self):
        self._elapse(self._last_ta)
        due = self._event_due()
        self.dirty = False
        if not due:
            return
        phase = self.phase
        if phase is MachinePhase.IDLE:
            self._enter_repair()
        elif phase is MachinePhase.REPAIR:
            if self.time_to_failure is not None:
                self.time_to_failure = self._sample_failure()
            self._start_next()
        elif phase is MachinePhase.TRANSPORTING:
            self.current = None
            self.completed += 1
            self.dirty = True
            self.record("lots_held", BATCH_SIZE * self.held)
            if self._repair_due():
                self._enter_repair()
            else:
                self._start_next()
        else:
            nxt = WORK_PHASES[WORK_PHASES.index(phase) + 1]
            self._set_phase(nxt)
            self.sigma = self._duration(nxt)

    def delta_ext(self, elapsed, bag):
        self._elapse(elapsed)
        for _, batch in bag:
            if not isinstance(batch, Batch) or batch.step not in self.config.steps:
                raise ModelError(
                    f"{self.name}: machine {self.config.machine_id} cannot serve {batch}"
                )
            self.queue.append(batch)
        self.dirty = True
        self.record("lots_held", BATCH_SIZE * self.held)
        if self.phase is MachinePhase.IDLE and self.current is None:
            self._start_next()


class Transducer(Atomic):
    """Passive observer of lot arrivals and completions.

    Records, after every observed change, ``cumulative_completed``,
    ``throughput`` (completed lots per elapsed minute), ``turnaround`` (mean
    creation-to-completion time of completed lots), ``wip`` and ``arrived``.
    If ``observe_until`` is given a final sample is taken at that time.
    """

    inputs = ("arrived", "completed")

    VARIABLES = ("cumulative_completed", "throughput", "turnaround", "wip", "arrived")

    def __init__(self, name: str, observe_until: float | None = None):
        super().__init__(name)
        self.observe_until = observe_until
        self.arrived = 0
        self.cumulative_completed = 0
        self.turnaround_sum = 0.0
        self.sampled = False

    def throughput(self) -> float:
        return self.cumulative_completed / self.now if self.now > 0 else 0.0

    def turnaround(self) -> float:
        if not self.cumulative_completed:
            return 0.0
        return self.turnaround_sum / self.cumulative_completed

    def time_advance(self):
        if self.observe_until is None or self.sampled:
            return INFINITY
        return time_until(self.now, self.observe_until)

    def delta_int(self):
        self.sampled = True
        self._sample()

    def delta_ext(self, elapsed, bag):
        for port, value in bag:
            lots = value.lots if isinstance(value, Batch) else (value,)
            if port == "arrived":
                self.arrived += len(lots)
            else:
                for lot in lots:
                    self.cumulative_completed += 1
                    self.turnaround_sum += self.now - lot.created_at
        self._sample()

    def _sample(self):
        self.record("cumulative_completed", self.cumulative_completed)
        self.record("throughput", self.throughput())
        self.record("turnaround", self.turnaround())
        self.record("wip", self.arrived - self.cumulative_completed)
        self.record("arrived", self.arrived)


def time_until(now: float, target: float) -> float:
    """Time advance ``ta >= 0`` such that ``now + ta == target`` exactly when possible."""
    if target <= now:
        return 0.0
    ta = target - now
    while now + ta > target:
        ta = math.nextafter(ta, 0.0)
    while now + ta < target:
        ta = math.nextafter(ta, math.inf)
    return ta
