"""
Parallel DEVS kernel.

Models are plain Python objects. An :class:`Atomic` owns its state and
implements the five PDEVS functions as methods (``time_advance``, ``output``,
``delta_int``, ``delta_ext`` and ``delta_con``). A :class:`Coupled` model is a
named set of components plus three kinds of couplings: external input
(parent input port -> child input port), external output (child output port ->
parent output port) and internal (child output port -> child input port).

The :class:`Simulator` executes a model with the classic PDEVS cycle:

1. the imminent set is every atomic whose next event time equals the global
   minimum ``tN``;
2. ``output`` is called on every imminent atomic;
3. outputs are routed through the couplings into input bags;
4. imminent atomics with an empty bag take ``delta_int``, imminent atomics
   with a non-empty bag take ``delta_con``, and all other atomics with a
   non-empty bag take ``delta_ext`` with ``elapsed = tN - tL``;
5. the next event time becomes ``tN + time_advance()``.

Time is a float in minutes and event-time equality is exact. Every atomic is
handed a reproducible seed derived from the master seed and its hierarchical
path (see :func:`derive_component_seed`), and its ``rng`` attribute is a
:class:`numpy.random.Generator` (PCG64) seeded from it.

Trace records produced at one instant are ordered by component path so that
replays are byte-identical regardless of the order in which zero-time
cascades were resolved.
"""

from __future__ import annotations

import copy
import hashlib
import heapq
import math
from typing import Any, Iterable, NamedTuple

import numpy as np

from minifab_bench.errors import ConstructionError, ModelError

INFINITY = math.inf
PATH_SEP = "."

__all__ = [
    "INFINITY",
    "Atomic",
    "Coupled",
    "Simulator",
    "TraceRecord",
    "derive_component_seed",
    "flatten",
    "simulate",
]


class TraceRecord(NamedTuple):
    time: float
    path: str
    kind: str  # "output" or "state"
    variable: str
    value: Any


def derive_component_seed(master_seed: int, path: str) -> int:
    """Stable 64-bit seed for the component at ``path``.

    BLAKE2b over the master seed and the path, so results do not depend on
    Python's randomized ``hash``.
    """
    digest = hashlib.blake2b(
        f"{int(master_seed)}\x1f{path}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


class Atomic:
    """Base class for atomic models.

    Subclasses declare their port names in ``inputs`` / ``outputs`` and
    override the PDEVS functions. The default model is passive.

    ``now`` is maintained by the simulator and holds the time of the
    transition or output currently being evaluated. Models use it for
    timestamps only; scheduling must go through ``time_advance``.
    """

    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    def __init__(self, name: str):
        self.name = name
        self.now = 0.0
        self.seed = 0
        self._rng = None
        self._sink = None

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)
        return self._rng

    def initialize(self) -> None:
        """Hook run once after the simulator assigned ``seed``."""

    def time_advance(self) -> float:
        return INFINITY

    def output(self) -> Iterable[tuple[str, Any]]:
        return ()

    def delta_int(self) -> None:
        pass

    def delta_ext(self, elapsed: float, bag: list[tuple[str, Any]]) -> None:
        pass

    def delta_con(self, bag: list[tuple[str, Any]]) -> None:
        # Default PDEVS confluent ordering: internal first, then external.
        self.delta_int()
        self.delta_ext(0.0, bag)

    def record(self, variable: str, value: Any) -> None:
        """Emit a state-change trace record (no-op outside a simulation)."""
        if self._sink is not None:
            self._sink(variable, value)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class Coupled:
    """A network of atomic and coupled components.

    Couplings name endpoints by component name; ``None`` stands for the
    coupled model itself (its own input ports as sources, its own output
    ports as destinations). Couplings are validated when added.
    """

    def __init__(self, name: str, inputs: Iterable[str] = (), outputs: Iterable[str] = ()):
        self.name = name
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.components: dict[str, Atomic | Coupled] = {}
        self.couplings: list[tuple[str | None, str, str | None, str]] = []

    def add(self, component):
        if component.name in self.components:
            raise ConstructionError(f"{self.name}: duplicate component {component.name!r}")
        self.components[component.name] = component
        return component

    def connect(self, src, src_port: str, dst, dst_port: str) -> None:
        src = _endpoint_name(src)
        dst = _endpoint_name(dst)
        if src is None and dst is None:
            raise ConstructionError(f"{self.name}: direct input-to-output feed-through is not supported")
        if src is not None and src == dst:
            raise ConstructionError(f"{self.name}: self-loop on component {src!r}")
        if src is None:
            if src_port not in self.inputs:
                raise ConstructionError(f"{self.name}: unknown input port {src_port!r}")
        else:
            comp = self._component(src)
            if src_port not in comp.outputs:
                raise ConstructionError(f"{self.name}: {src!r} has no output port {src_port!r}")
        if dst is None:
            if dst_port not in self.outputs:
                raise ConstructionError(f"{self.name}: unknown output port {dst_port!r}")
        else:
            comp = self._component(dst)
            if dst_port not in comp.inputs:
                raise ConstructionError(f"{self.name}: {dst!r} has no input port {dst_port!r}")
        self.couplings.append((src, src_port, dst, dst_port))

    def _component(self, name: str):
        try:
            return self.components[name]
        except KeyError:
            raise ConstructionError(f"{self.name}: unknown component {name!r}") from None

    def __repr__(self):
        return f"Coupled({self.name!r}, {len(self.components)} components)"


def _endpoint_name(endpoint):
    if endpoint is None or isinstance(endpoint, str):
        return endpoint
    return endpoint.name


def _join(prefix: str, name: str) -> str:
    return f"{prefix}{PATH_SEP}{name}" if prefix else name


# -- hierarchical routing ----------------------------------------------------


def _collect_atomics(root):
    """Walk the hierarchy; return atomics by path and, per node path, its
    (parent, parent path, local name)."""
    atomics: dict[str, Atomic] = {}
    parents: dict[str, tuple[Coupled, str, str]] = {}

    def walk(node, path):
        if isinstance(node, Atomic):
            atomics[path] = node
            return
        if not isinstance(node, Coupled):
            raise ConstructionError(f"not a model: {node!r}")
        for name, child in node.components.items():
            child_path = _join(path, name)
            parents[child_path] = (node, path, name)
            walk(child, child_path)

    if isinstance(root, Atomic):
        atomics[root.name] = root
    else:
        walk(root, "")
    return atomics, parents


class _Router:
    """Resolves an atomic output port to its atomic destinations by walking
    the coupling graph up and down the hierarchy."""

    def __init__(self, root, parents):
        self.root = root
        self.parents = parents

    def destinations(self, path: str, port: str) -> list[tuple[str, str]]:
        if path not in self.parents:  # atomic root has nowhere to send
            return []
        parent, parent_path, name = self.parents[path]
        return self._from(parent, parent_path, name, port, depth=0)

    def _from(self, coupled, coupled_path, src, port, depth):
        if depth > 10_000:
            raise ConstructionError("coupling chain does not terminate")
        out = []
        for s, sp, d, dp in coupled.couplings:
            if s != src or sp != port:
                continue
            if d is None:
                if coupled is self.root:
                    continue  # leaves the closed root model
                parent, parent_path, name = self.parents[coupled_path]
                out.extend(self._from(parent, parent_path, name, dp, depth + 1))
            else:
                child = coupled.components[d]
                child_path = _join(coupled_path, d)
                if isinstance(child, Atomic):
                    out.append((child_path, dp))
                else:
                    out.extend(self._into(child, child_path, dp, depth + 1))
        return out

    def _into(self, coupled, coupled_path, port, depth):
        targets = self._from(coupled, coupled_path, None, port, depth)
        if not any(s is None and sp == port for s, sp, _, _ in coupled.couplings):
            raise ConstructionError(
                f"dangling input port {coupled_path}:{port} (no external input coupling)"
            )
        return targets


# -- flattening --------------------------------------------------------------


def flatten(root: Coupled) -> Coupled:
    """Return an equivalent single-level network of atomic models.

    Atomics are deep copies of the originals, renamed to their full
    hierarchical path, so a simulation of the flat network produces the same
    trace as one of ``root``. Root input/output ports are preserved.
    """
    if isinstance(root, Atomic):
        return copy.deepcopy(root)
    root = copy.deepcopy(root)
    atomics, ic, eic, eoc = _splice(root, "")
    flat = Coupled(root.name, root.inputs, root.outputs)
    for path, model in atomics.items():
        model.name = path
        flat.add(model)
    for src, sp, dst, dp in eic:
        flat.couplings.append((None, sp, dst, dp))
    for src, sp, dst, dp in ic:
        flat.couplings.append((src, sp, dst, dp))
    for src, sp, dst, dp in eoc:
        flat.couplings.append((src, sp, None, dp))
    return flat


def _splice(coupled: Coupled, prefix: str):
    """Bottom-up splice of one coupled level.

    Returns (atomics by path, internal couplings, external-input couplings,
    external-output couplings), all expressed in atomic paths.
    """
    atomics: dict[str, Atomic] = {}
    ic: list = []
    child_eic: dict[str, dict[str, list[tuple[str, str]]]] = {}
    child_eoc: dict[str, dict[str, list[tuple[str, str]]]] = {}
    for name, child in coupled.components.items():
        path = _join(prefix, name)
        if isinstance(child, Atomic):
            atomics[path] = child
            continue
        sub_atomics, sub_ic, sub_eic, sub_eoc = _splice(child, path)
        atomics.update(sub_atomics)
        ic.extend(sub_ic)
        by_port: dict[str, list] = {}
        for _, sp, dst, dp in sub_eic:
            by_port.setdefault(sp, []).append((dst, dp))
        child_eic[name] = by_port
        by_out: dict[str, list] = {}
        for src, sp, _, dp in sub_eoc:
            by_out.setdefault(dp, []).append((src, sp))
        child_eoc[name] = by_out

    eic: list = []
    eoc: list = []
    for s, sp, d, dp in coupled.couplings:
        if s is None:
            sources = [(None, sp)]
        elif isinstance(coupled.components[s], Atomic):
            sources = [(_join(prefix, s), sp)]
        else:
            sources = child_eoc[s].get(sp, [])
        if d is None:
            targets = [(None, dp)]
        elif isinstance(coupled.components[d], Atomic):
            targets = [(_join(prefix, d), dp)]
        else:
            targets = child_eic[d].get(dp, [])
            if not targets:
                raise ConstructionError(
                    f"dangling input port {_join(prefix, d)}:{dp} (no external input coupling)"
                )
        for src, src_port in sources:
            for dst, dst_port in targets:
                if src is None:
                    eic.append((None, src_port, dst, dst_port))
                elif dst is None:
                    eoc.append((src, src_port, None, dst_port))
                else:
                    ic.append((src, src_port, dst, dst_port))
    return atomics, ic, eic, eoc


# -- simulation --------------------------------------------------------------


class Simulator:
    """Runs a closed PDEVS model.

    ``record_outputs`` controls whether every atomic output message is
    written to the trace (kind ``"output"``); state records emitted through
    :meth:`Atomic.record` are always kept.
    """

    def __init__(self, root, seed: int = 0, record_outputs: bool = True):
        self.root = root
        self.seed = int(seed)
        self.record_outputs = record_outputs
        atomics, parents = _collect_atomics(root)
        self.paths = sorted(atomics)
        self.models = [atomics[p] for p in self.paths]
        index = {p: i for i, p in enumerate(self.paths)}
        router = _Router(root, parents)
        self.routes: list[dict[str, list[tuple[int, str]]]] = []
        for path, model in zip(self.paths, self.models):
            table = {}
            for port in model.outputs:
                table[port] = [(index[d], dp) for d, dp in router.destinations(path, port)]
            self.routes.append(table)
        self.time = 0.0
        self.trace: list[TraceRecord] = []

    def run(self, end_time: float) -> list[TraceRecord]:
        if not math.isfinite(end_time):
            raise ValueError("end_time must be finite")
        models = self.models
        paths = self.paths
        routes = self.routes
        record_outputs = self.record_outputs
        n = len(models)
        last = [0.0] * n
        version = [0] * n
        heap: list[tuple[float, int, int]] = []
        instant: list[tuple[int, TraceRecord]] = []
        trace = self.trace

        for i, model in enumerate(models):
            model.seed = derive_component_seed(self.seed, paths[i])
            model._rng = None
            model.now = 0.0
            model._sink = _make_sink(instant, i, model, paths[i])
        for i, model in enumerate(models):
            model.initialize()
            ta = model.time_advance()
            if ta < 0:
                raise ModelError(f"{paths[i]}: negative time advance {ta}")
            if ta != INFINITY:
                heapq.heappush(heap, (ta, i, 0))
        current = 0.0

        while heap:
            t = heap[0][0]
            if t > end_time:
                break
            imminent = []
            while heap and heap[0][0] == t:
                _, i, ver = heapq.heappop(heap)
                if ver == version[i]:
                    imminent.append(i)
            if not imminent:
                continue
            if t != current:
                _flush(instant, trace)
                current = t
            imminent.sort()

            bags: dict[int, list] = {}
            for i in imminent:
                model = models[i]
                model.now = t
                for port, value in model.output():
                    if record_outputs:
                        instant.append((i, TraceRecord(t, paths[i], "output", port, _trace_value(value))))
                    for j, dport in routes[i].get(port, ()):
                        bag = bags.get(j)
                        if bag is None:
                            bags[j] = [(dport, value)]
                        else:
                            bag.append((dport, value))

            imminent_set = set(imminent)
            for i in sorted(imminent_set.union(bags)):
                model = models[i]
                model.now = t
                bag = bags.get(i)
                if i in imminent_set:
                    if bag:
                        model.delta_con(bag)
                    else:
                        model.delta_int()
                else:
                    model.delta_ext(t - last[i], bag)
                ta = model.time_advance()
                if ta < 0:
                    raise ModelError(f"{paths[i]}: negative time advance {ta} at t={t}")
                last[i] = t
                version[i] += 1
                if ta != INFINITY:
                    heapq.heappush(heap, (t + ta, i, version[i]))
            self.time = t

        _flush(instant, trace)
        for model in models:
            model._sink = None
        return trace


def _make_sink(buffer, index, model, path):
    def sink(variable, value):
        buffer.append((index, TraceRecord(model.now, path, "state", variable, value)))

    return sink


def _flush(instant, trace):
    if instant:
        instant.sort(key=lambda item: item[0])
        trace.extend(rec for _, rec in instant)
        instant.clear()


def _trace_value(value):
    if isinstance(value, (int, float, str)) or value is None:
        return value
    return str(value)


def simulate(root, end_time: float, seed: int = 0, record_outputs: bool = True) -> list[TraceRecord]:
    """Simulate ``root`` up to and including ``end_time``; return the trace."""
    return Simulator(root, seed=seed, record_outputs=record_outputs).run(end_time)
