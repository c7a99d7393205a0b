"""Co-execution of a specification model and an implementation model.

Both models are cooperative step functions driven by one clock. Each tick
the harness hands them the inputs stamped at that tick, collects what they
send, pushes specification outputs through the incremental abstraction and
steps the monitor.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .abstraction import (
    AbstractionConfig,
    DependencyDecl,
    ExtendedTimeIntervalTrace,
    IncrementalAbstraction,
    SlackPolicy,
)
from .monitor import FailureReport, Monitor, MonitorConfig, Verdict
from .traces import EventLabel, PortAssignment, TimedEvent, TimedWord


class HarnessError(RuntimeError):
    pass


class ModelContractError(HarnessError):
    pass


class FaultError(HarnessError):
    pass


@dataclass(frozen=True)
class ModelOutput:
    id: int
    label: EventLabel
    port: int
    tick: int
    optional: bool = False
    deps: tuple[int, ...] = ()


class Outbox:
    """What a model may do during one tick: ``send`` and ``depends``."""

    def __init__(self, t: int, first_id: int):
        self.t = t
        self._next = first_id
        self.outputs: list[ModelOutput] = []
        self._deps: dict[int, list[int]] = defaultdict(list)

    def send(self, port: int, label: EventLabel, opt: bool = False, tick: int | None = None) -> int:
        if tick is not None and tick != self.t:
            raise ModelContractError(f"output stamped {tick} sent at tick {self.t}")
        ident = self._next
        self._next += 1
        self.outputs.append(ModelOutput(ident, label, port, self.t, bool(opt)))
        return ident

    def depends(self, later: int, earlier: int) -> None:
        self._deps[later].append(earlier)

    def collect(self) -> list[ModelOutput]:
        return [replace(o, deps=tuple(self._deps.get(o.id, ()))) for o in self.outputs]


class BehaviorModel:
    """Base class for executable models.

    Subclasses implement ``step``; ``quiescent`` must become true once no
    output is scheduled. Randomness, if any, comes from ``seed``.
    """

    name = "model"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.reset()

    def reset(self) -> None:
        self.rng = random.Random(self.seed)

    def step(self, t: int, inputs: Sequence[EventLabel], out: Outbox) -> None:
        raise NotImplementedError

    def quiescent(self) -> bool:
        return True


class ReplayModel(BehaviorModel):
    """Replays a recorded output word, ignoring inputs."""

    name = "replay"

    def __init__(self, word: TimedWord, ports: PortAssignment):
        self.word = word
        self.ports = ports
        super().__init__()

    def reset(self) -> None:
        super().reset()
        self._pos = 0

    def step(self, t, inputs, out):
        events = self.word.events
        while self._pos < len(events) and events[self._pos].tick <= t:
            e = events[self._pos]
            out.send(self.ports(e.label), e.label, tick=e.tick)
            self._pos += 1

    def quiescent(self) -> bool:
        return self._pos >= len(self.word)


@dataclass(frozen=True)
class StabilizationDetector:
    window: int

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("stabilization window must be positive")


def detect_stabilization(output_ticks: Iterable[int], last_input_tick: int,
                         det: StabilizationDetector, now: int | None = None) -> int | None:
    """Estimated stabilization time, or ``None`` while the silence window is still open."""
    anchor = max([last_input_tick, *(t for t in output_ticks if t >= last_input_tick)])
    T = anchor + det.window
    if now is not None and now < T:
        return None
    return T


@dataclass(frozen=True)
class HarnessConfig:
    abstraction: AbstractionConfig
    monitor: MonitorConfig
    horizon: int = 10_000


@dataclass
class CoExecution:
    spec_word: TimedWord
    deps: DependencyDecl
    opts: frozenset[int]
    spec_ports: dict[int, int]
    impl_word: TimedWord
    impl_ports: dict[int, int]
    spec_trace: ExtendedTimeIntervalTrace
    monitor: Monitor
    stabilization_time: int | None = None

    @property
    def verdict(self) -> Verdict:
        return self.monitor.verdict

    @property
    def failure(self) -> FailureReport | None:
        return self.monitor.failure


def co_execute(spec_model: BehaviorModel, impl_model: BehaviorModel, stimuli: TimedWord,
               cfg: HarnessConfig, listener=None) -> CoExecution:
    """Drive both models with the same stimuli and monitor them on the fly."""
    spec_model.reset()
    impl_model.reset()
    inputs_at: dict[int, list[EventLabel]] = defaultdict(list)
    for e in stimuli:
        inputs_at[e.tick].append(e.label)
    last_input = stimuli.end() or 0
    absn = IncrementalAbstraction(cfg.abstraction)
    mon = Monitor(cfg.monitor, listener)
    convergent = cfg.monitor.termination == "convergent"
    det = StabilizationDetector(cfg.monitor.stabilization_window) if convergent else None
    spec_events: list[TimedEvent] = []
    impl_events: list[TimedEvent] = []
    spec_ports: dict[int, int] = {}
    impl_ports: dict[int, int] = {}
    edges: set[tuple[int, int]] = set()
    opts: set[int] = set()
    impl_ticks: list[int] = []
    t = 0
    while True:
        ins = inputs_at.get(t, [])
        s_box = Outbox(t, len(spec_events))
        spec_model.step(t, ins, s_box)
        i_box = Outbox(t, len(impl_events))
        impl_model.step(t, ins, i_box)
        verts = []
        for o in s_box.collect():
            verts.append(absn.add(o.id, o.label, o.tick, o.deps, o.optional, o.port))
            spec_events.append(TimedEvent(o.label, o.tick, o.id))
            spec_ports[o.id] = o.port
            edges.update((d, o.id) for d in o.deps)
            if o.optional:
                opts.add(o.id)
        impls = []
        for o in i_box.collect():
            e = TimedEvent(o.label, o.tick, o.id)
            impls.append(e)
            impl_events.append(e)
            impl_ports[o.id] = o.port
            impl_ticks.append(t)
        if convergent and mon.stabilization_time is None and t >= last_input:
            T = detect_stabilization(impl_ticks, last_input, det, now=t)
            if T is not None:
                mon.set_stabilization_time(T)
        mon.step(t, verts, impls)
        if mon.done:
            break
        if (not convergent and t >= last_input
                and spec_model.quiescent() and impl_model.quiescent()):
            mon.finish()
            break
        t += 1
        if t > cfg.horizon:
            raise HarnessError(f"no verdict within horizon {cfg.horizon}")
    return CoExecution(
        TimedWord(tuple(spec_events)), DependencyDecl(frozenset(edges)), frozenset(opts), spec_ports,
        TimedWord(tuple(impl_events)), impl_ports, absn.trace(), mon, mon.stabilization_time)


def record(model: BehaviorModel, stimuli: TimedWord, horizon: int = 10_000) -> tuple[TimedWord, dict[int, int]]:
    """Run one model alone and return its output word and per-event ports."""
    model.reset()
    inputs_at: dict[int, list[EventLabel]] = defaultdict(list)
    for e in stimuli:
        inputs_at[e.tick].append(e.label)
    last_input = stimuli.end() or 0
    events: list[TimedEvent] = []
    ports: dict[int, int] = {}
    t = 0
    while t <= last_input or not model.quiescent():
        box = Outbox(t, len(events))
        model.step(t, inputs_at.get(t, []), box)
        for o in box.collect():
            events.append(TimedEvent(o.label, o.tick, o.id))
            ports[o.id] = o.port
        t += 1
        if t > horizon:
            raise HarnessError(f"model still active at horizon {horizon}")
    return TimedWord(tuple(events)), ports


# -- fault injection -------------------------------------------------------

FAULT_KINDS = (
    "DropOutput",
    "DelayBeyondSlack",
    "ReorderWithinSlack",
    "ReorderBeyondOrder",
    "RelabelPayload",
    "DuplicateOutput",
)

EXPECTED_VERDICT = {k: Verdict.FALSE for k in FAULT_KINDS}
EXPECTED_VERDICT["ReorderWithinSlack"] = Verdict.TRUE


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    target: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise FaultError(f"unknown fault kind {self.kind!r}")

    @property
    def expected_verdict(self) -> Verdict:
        return EXPECTED_VERDICT[self.kind]


def _resorted(events: list[TimedEvent]) -> TimedWord:
    return TimedWord(tuple(sorted(events, key=lambda e: e.tick)))


def inject(fault: FaultSpec, word: TimedWord, slack: SlackPolicy, ports: PortAssignment) -> TimedWord:
    """Mutate an implementation word according to ``fault``.

    Stamps of the input word are taken as the stamps of the matching
    specification vertices, which holds when the word was recorded from the
    specification model itself.
    """
    events = list(word)
    if not events:
        raise FaultError("fault selector matches no event")
    rng = random.Random(fault.seed)
    if fault.target is not None:
        if not 0 <= fault.target < len(events):
            raise FaultError(f"fault target {fault.target} out of range")
        candidates = [fault.target]
    else:
        candidates = list(range(len(events)))
        rng.shuffle(candidates)
    i = candidates[0]
    e = events[i]
    kind = fault.kind
    if kind == "DropOutput":
        del events[i]
        return TimedWord(tuple(events))
    if kind == "DuplicateOutput":
        copy = TimedEvent(e.label, e.tick, max(x.seq for x in events) + 1)
        events.insert(i + 1, copy)
        return TimedWord(tuple(events))
    if kind == "RelabelPayload":
        payload = bytes([e.label.payload[0] ^ 0xFF]) + e.label.payload[1:] if e.label.payload else b"\xff"
        events[i] = TimedEvent(EventLabel(e.label.name, payload), e.tick, e.seq)
        return TimedWord(tuple(events))
    if kind == "DelayBeyondSlack":
        shift = slack.plus(e.label) + 1 + rng.randint(0, 2)
        events[i] = TimedEvent(e.label, e.tick + shift, e.seq)
        return _resorted(events)
    if kind == "ReorderBeyondOrder":
        for i in candidates:
            e = events[i]
            nxt = [j for j in range(i + 1, len(events))
                   if ports(events[j].label) == ports(e.label) and events[j].tick > e.tick]
            if nxt:
                j = nxt[0]
                f = events[j]
                events[i] = TimedEvent(e.label, f.tick, e.seq)
                events[j] = TimedEvent(f.label, e.tick, f.seq)
                return _resorted(events)
        raise FaultError("no two events on one port to swap")
    # ReorderWithinSlack: move one event inside its own interval, keeping
    # its place among events of the same port, preferably past another port
    for i in candidates:
        e = events[i]
        port = ports(e.label)
        same = sorted(x.tick for j, x in enumerate(events) if j != i and ports(x.label) == port)
        prev = max((x for x in same if x < e.tick), default=None)
        nxt = min((x for x in same if x > e.tick), default=None)
        lo = max(0, e.tick - slack.minus(e.label), prev + 1 if prev is not None else 0)
        hi = e.tick + slack.plus(e.label)
        if nxt is not None:
            hi = min(hi, nxt - 1)
        choices = [t for t in range(lo, hi + 1) if t != e.tick]
        if not choices:
            continue
        others = [x.tick for j, x in enumerate(events) if ports(x.label) != port]
        crossing = [t for t in choices
                    if any((t < o) != (e.tick < o) or (t > o) != (e.tick > o) for o in others)]
        events[i] = TimedEvent(e.label, rng.choice(crossing or choices), e.seq)
        return _resorted(events)
    raise FaultError("no event can move within its slack")
