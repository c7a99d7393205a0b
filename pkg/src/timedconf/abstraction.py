"""Generalising a concrete specification word into an interval-timed partial order.

Each specification event becomes a vertex carrying its stamp, a closed
interval ``[max(0, t - dt_minus), t + dt_plus]`` and an optional mark. The
order is the transitive closure of the declared dependencies plus an edge
between successive occurrences of an equal label.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .traces import (
    ConcurrentAlphabet,
    EventLabel,
    Pomset,
    PortAssignment,
    TimedTrace,
    TimedWord,
    TraceError,
    validate_timed_word,
)


class AbstractionError(TraceError):
    pass


class DependencyCycleError(AbstractionError):
    pass


class CausalityError(AbstractionError):
    pass


class DependencyWindowError(AbstractionError):
    pass


@dataclass(frozen=True)
class SlackPolicy:
    """Per-label time slack with mandatory defaults and global bounds."""

    default_minus: int = 0
    default_plus: int = 0
    dt_minus: Mapping[str, int] = field(default_factory=dict)
    dt_plus: Mapping[str, int] = field(default_factory=dict)
    bound_minus: int | None = None
    bound_plus: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "dt_minus", dict(self.dt_minus))
        object.__setattr__(self, "dt_plus", dict(self.dt_plus))
        minus = [self.default_minus, *self.dt_minus.values()]
        plus = [self.default_plus, *self.dt_plus.values()]
        if min(minus + plus) < 0:
            raise AbstractionError("slack values must be non-negative")
        if self.bound_minus is None:
            object.__setattr__(self, "bound_minus", max(minus))
        if self.bound_plus is None:
            object.__setattr__(self, "bound_plus", max(plus))
        if max(minus) > self.bound_minus:
            raise AbstractionError(f"a dt_minus exceeds bound {self.bound_minus}")
        if max(plus) > self.bound_plus:
            raise AbstractionError(f"a dt_plus exceeds bound {self.bound_plus}")

    def minus(self, label) -> int:
        name = label.name if isinstance(label, EventLabel) else label
        return self.dt_minus.get(name, self.default_minus)

    def plus(self, label) -> int:
        name = label.name if isinstance(label, EventLabel) else label
        return self.dt_plus.get(name, self.default_plus)


def widen(t: int, label, slack: SlackPolicy) -> tuple[int, int]:
    return max(0, t - slack.minus(label)), t + slack.plus(label)


@dataclass(frozen=True)
class DependencyDecl:
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))

    @classmethod
    def of(cls, *edges: tuple[int, int]) -> "DependencyDecl":
        return cls(frozenset(edges))


@dataclass(frozen=True)
class AbstractionConfig:
    slack: SlackPolicy = field(default_factory=SlackPolicy)
    ports: PortAssignment | None = None
    alphabet: ConcurrentAlphabet | None = None
    dep_window: int | None = None
    optional_mode: bool = False


@dataclass(frozen=True)
class SpecVertex:
    """One specification output as seen by the monitor."""

    id: int
    label: EventLabel
    tick: int
    lo: int
    hi: int
    optional: bool = False
    port: int | None = None
    ancestors: frozenset[int] = frozenset()
    seq: int = 0

    def matches(self, label: EventLabel, tick: int) -> bool:
        return label == self.label and self.lo <= tick <= self.hi


@dataclass(frozen=True)
class ExtendedTimeIntervalTrace:
    vertices: tuple[SpecVertex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "_by_id", {v.id: v for v in self.vertices})

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, vid: int) -> SpecVertex:
        return self._by_id[vid]

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.vertices)

    @property
    def order(self) -> frozenset[tuple[int, int]]:
        return frozenset((a, v.id) for v in self.vertices for a in v.ancestors)

    @property
    def theta(self) -> dict[int, int]:
        return {v.id: v.tick for v in self.vertices}

    @property
    def delta(self) -> dict[int, tuple[int, int]]:
        return {v.id: (v.lo, v.hi) for v in self.vertices}

    @property
    def optional(self) -> frozenset[int]:
        return frozenset(v.id for v in self.vertices if v.optional)

    def precedes(self, a: int, b: int) -> bool:
        return a in self[b].ancestors

    def pomset(self) -> Pomset:
        return Pomset(self.ids, self.order, {v.id: v.label for v in self.vertices})

    def timed_trace(self) -> TimedTrace:
        return TimedTrace(self.pomset(), self.theta)

    def end(self) -> int | None:
        return max((v.tick for v in self.vertices), default=None)

    def check_invariants(self, dep_window: int | None = None) -> None:
        for v in self.vertices:
            if not v.lo <= v.tick <= v.hi:
                raise AbstractionError(f"vertex {v.id}: stamp {v.tick} outside [{v.lo}, {v.hi}]")
            for a in v.ancestors:
                if self[a].tick >= v.tick:
                    raise CausalityError(f"{a} precedes {v.id} with ticks {self[a].tick} >= {v.tick}")
        if dep_window is not None:
            _check_window(self, dep_window)


def covering_predecessors(trace: ExtendedTimeIntervalTrace, vid: int) -> frozenset[int]:
    anc = trace[vid].ancestors
    return frozenset(a for a in anc if not any(a in trace[b].ancestors for b in anc))


def _check_window(trace: ExtendedTimeIntervalTrace, dep_window: int) -> None:
    # only covering pairs: a long chain of equal labels is allowed to span more
    for v in trace.vertices:
        for a in covering_predecessors(trace, v.id):
            if v.tick - trace[a].tick > dep_window:
                raise DependencyWindowError(
                    f"dependency {a} -> {v.id} spans {v.tick - trace[a].tick} ticks, "
                    f"window is {dep_window}")


class IncrementalAbstraction:
    """Builds specification vertices one output at a time.

    Dependencies may only point at vertices added earlier. Used directly by
    the streaming front end and the co-execution harness.
    """

    def __init__(self, cfg: AbstractionConfig):
        self.cfg = cfg
        self.vertices: dict[int, SpecVertex] = {}
        self._last_of_label: dict[EventLabel, int] = {}
        self._slots: set[tuple[int, int]] = set()
        self._last_tick = 0
        self._count = 0

    def add(self, event_id: int, label: EventLabel, tick: int,
            deps: Iterable[int] = (), optional: bool = False, port: int | None = None) -> SpecVertex:
        cfg = self.cfg
        if event_id in self.vertices:
            raise AbstractionError(f"duplicate specification id {event_id}")
        if tick < self._last_tick:
            raise AbstractionError(f"specification event {event_id} at {tick} after tick {self._last_tick}")
        if cfg.alphabet is not None:
            cfg.alphabet.check(label)
        if port is None and cfg.ports is not None:
            port = cfg.ports(label)
        elif port is not None and cfg.ports is not None and label.name in cfg.ports:
            if cfg.ports(label) != port:
                raise AbstractionError(f"event {event_id}: port {port} disagrees with configured port")
        if port is not None:
            if (tick, port) in self._slots:
                raise AbstractionError(f"event {event_id}: second event on port {port} at tick {tick}")
            self._slots.add((tick, port))

        direct = set()
        for d in deps:
            if d not in self.vertices:
                raise AbstractionError(f"event {event_id} depends on unknown or later id {d}")
            direct.add(d)
        prev = self._last_of_label.get(label)
        if prev is not None:
            direct.add(prev)
        ancestors = set()
        for d in direct:
            pv = self.vertices[d]
            if pv.tick >= tick:
                raise CausalityError(
                    f"event {event_id} at {tick} depends on {d} at {pv.tick}; causality needs a strict increase")
            ancestors.add(d)
            ancestors |= pv.ancestors
        lo, hi = widen(tick, label, cfg.slack)
        v = SpecVertex(event_id, label, tick, lo, hi, bool(optional), port, frozenset(ancestors), self._count)
        if cfg.optional_mode and cfg.dep_window is not None:
            covering = [a for a in ancestors
                        if not any(a in self.vertices[b].ancestors for b in ancestors)]
            for a in covering:
                if tick - self.vertices[a].tick > cfg.dep_window:
                    raise DependencyWindowError(
                        f"dependency {a} -> {event_id} spans {tick - self.vertices[a].tick} ticks, "
                        f"window is {cfg.dep_window}")
        self._count += 1
        self.vertices[event_id] = v
        self._last_of_label[label] = event_id
        self._last_tick = tick
        return v

    def trace(self) -> ExtendedTimeIntervalTrace:
        return ExtendedTimeIntervalTrace(tuple(self.vertices.values()))


def abstract(spec: TimedWord, deps: DependencyDecl = DependencyDecl(),
             opts: Iterable[int] = (), cfg: AbstractionConfig = AbstractionConfig()) -> ExtendedTimeIntervalTrace:
    """Map a specification timed word to its extended time interval trace.

    Vertex ids are the events' ``seq`` values. Raises on a dependency cycle,
    on a dependency between events that are not strictly increasing in time,
    and (optional mode) on a covering dependency wider than the window.
    """
    check = validate_timed_word(spec)
    if not check.ok:
        raise AbstractionError(check.violations[0].message)
    ids = [e.seq for e in spec]
    if len(set(ids)) != len(ids):
        raise AbstractionError("specification event ids are not unique")
    known = set(ids)
    for a, b in deps.edges:
        if a not in known or b not in known:
            raise AbstractionError(f"dependency ({a}, {b}) mentions an unknown event")
    sorter = graphlib.TopologicalSorter({i: set() for i in ids})
    for a, b in deps.edges:
        sorter.add(b, a)
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        raise DependencyCycleError(f"dependency cycle through {exc.args[1]}") from None

    preds: dict[int, list[int]] = {i: [] for i in ids}
    for a, b in deps.edges:
        preds[b].append(a)
    tick_of = {e.seq: e.tick for e in spec}
    for b, ps in preds.items():
        for a in ps:
            if tick_of[a] >= tick_of[b]:
                raise CausalityError(
                    f"dependency {a} -> {b} between ticks {tick_of[a]} and {tick_of[b]}")

    opts = set(opts)
    unknown = opts - known
    if unknown:
        raise AbstractionError(f"optional marks on unknown events {sorted(unknown)}")
    builder = IncrementalAbstraction(cfg)
    # word order is kept within a tick; dependencies always point to smaller ticks
    for e in sorted(spec, key=lambda e: e.tick):
        builder.add(e.seq, e.label, e.tick, sorted(preds[e.seq]), e.seq in opts)
    return builder.trace()


def language_member(tt: TimedTrace, itrace: ExtendedTimeIntervalTrace) -> bool:
    """Whether a timed trace over the same structure hits every interval."""
    p = itrace.pomset()
    if set(tt.pomset.vertices) != set(p.vertices):
        raise AbstractionError("vertex sets differ")
    if any(tt.pomset.labels[v] != p.labels[v] for v in p.vertices):
        raise AbstractionError("labels differ")
    if tt.pomset.order != p.order:
        return False
    return all(v.lo <= tt.theta[v.id] <= v.hi for v in itrace)
