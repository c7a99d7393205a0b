"""On-the-fly matcher between specification vertices and implementation outputs.

The monitor is a set of guarded actions run slot by slot. Within a slot the
phases are: output receptions (specification first, then implementation in
arrival order), timeouts (specification first, then implementation), purge
of cancelled vertices, and the finalisation check. A failure terminates the
monitor; so does a ``true`` verdict.

Beyond the textbook actions the matcher keeps two extra pieces of state:

* a *floor* per specification vertex, the latest implementation stamp
  matched to any of its predecessors, so that recorded pairs always keep
  the specification order;
* a cascade: whenever a match makes another pending vertex minimal, that
  vertex rescans the pending implementation outputs.

In optional mode cancelling a vertex also cancels every pending descendant,
and an obligatory vertex that ends up cancelled fails at its deadline.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .abstraction import ExtendedTimeIntervalTrace, SlackPolicy, SpecVertex
from .traces import TimedEvent, TimedWord


class MonitorError(RuntimeError):
    pass


class Verdict(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value


class FailureKind(enum.Enum):
    MISSING = "missing"
    UNEXPECTED = "unexpected"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class MatchRecord:
    spec_id: int
    impl_id: int
    ts: int
    ti: int
    time: int

    def line(self) -> str:
        return f"MATCH s={self.spec_id} i={self.impl_id} ts={self.ts} ti={self.ti}"


@dataclass(frozen=True)
class FailureReport:
    kind: FailureKind
    id: int
    time: int
    matched_log: tuple[MatchRecord, ...] = ()

    def line(self) -> str:
        return f"FAIL kind={self.kind} id={self.id} t={self.time}"


@dataclass(frozen=True)
class VerdictRecord:
    verdict: Verdict
    time: int

    def line(self) -> str:
        return f"VERDICT {self.verdict} t={self.time}"


@dataclass(frozen=True)
class MonitorConfig:
    slack: SlackPolicy = field(default_factory=SlackPolicy)
    dep_window: int | None = None
    optional_mode: bool = False
    termination: str = "explicit"
    stabilization_window: int | None = None

    def __post_init__(self):
        if self.termination not in ("explicit", "convergent"):
            raise ValueError(f"unknown termination mode {self.termination!r}")
        if self.termination == "convergent" and not (self.stabilization_window or 0) > 0:
            raise ValueError("convergent termination needs a positive stabilization window")


def arbiter_primary(pending: Iterable[SpecVertex], term: Iterable[int] = ()) -> frozenset[int]:
    """Ids of the order-minimal vertices among ``pending`` minus ``term``.

    An empty result stands for "no candidate".
    """
    term = set(term)
    live = {x.id: x for x in pending if x.id not in term}
    return frozenset(i for i, x in live.items() if not any(a in live for a in x.ancestors))


def arbiter_secondary(y: TimedEvent, candidates: Iterable[SpecVertex]) -> SpecVertex | None:
    """The matching candidate with the earliest stamp, ties by insertion order."""
    best = None
    for x in candidates:
        if x.matches(y.label, y.tick):
            if best is None or (x.tick, x.seq) < (best.tick, best.seq):
                best = x
    return best


Listener = Callable[[object], None]


class Monitor:
    def __init__(self, cfg: MonitorConfig, listener: Listener | None = None):
        self.cfg = cfg
        self.listener = listener
        self.clock: int | None = None
        self.past_s: dict[int, SpecVertex] = {}
        self.past_i: dict[int, TimedEvent] = {}
        self.term: set[int] = set()
        self.vertices: dict[int, SpecVertex] = {}
        self.matched_tick: dict[int, int] = {}
        self.matches: list[MatchRecord] = []
        self.verdict = Verdict.INCONCLUSIVE
        self.failure: FailureReport | None = None
        self.final_time: int | None = None
        self.end_s: int | None = None
        self.end_i: int | None = None
        self.closed = False
        self.stabilization_time: int | None = None
        self._impl_ticks: list[int] = []
        self._impl_ids: set[int] = set()

    # -- public driving interface -------------------------------------

    @property
    def done(self) -> bool:
        return self.verdict is not Verdict.INCONCLUSIVE

    def step(self, t: int, spec: Iterable[SpecVertex] = (), impl: Iterable[TimedEvent] = ()) -> Verdict:
        """Process slot ``t`` with the outputs stamped ``t``.

        Slots with no outputs between the previous one and ``t`` are run
        implicitly wherever a guard can fire.
        """
        if self.done:
            return self.verdict
        if self.clock is not None and t <= self.clock:
            raise MonitorError(f"slot {t} is not after the current slot {self.clock}")
        if self.closed:
            raise MonitorError("streams are closed")
        spec = list(spec)
        impl = list(impl)
        for x in spec:
            if x.tick != t:
                raise MonitorError(f"specification vertex {x.id} stamped {x.tick} delivered at {t}")
        for y in impl:
            if y.tick != t:
                raise MonitorError(f"implementation event {y.seq} stamped {y.tick} delivered at {t}")
        self._idle_until(t)
        if not self.done:
            self._slot(t, spec, impl)
        return self.verdict

    def advance(self, t: int) -> Verdict:
        """Run every slot up to and including ``t`` with no new outputs."""
        if self.done:
            return self.verdict
        if self.clock is not None and t < self.clock:
            raise MonitorError(f"cannot go back from {self.clock} to {t}")
        self._idle_until(t)
        if not self.done and self.clock != t:
            self._slot(t, [], [])
        return self.verdict

    def close(self) -> None:
        """Both output streams have ended (explicit termination)."""
        self.closed = True

    def set_stabilization_time(self, t: int) -> None:
        self.stabilization_time = t

    def finish(self) -> Verdict:
        """Close the streams and run until the verdict is settled."""
        if self.cfg.termination == "explicit":
            self.close()
        target = self._finalize_time()
        if target is None:
            return self.verdict
        if self.clock is None or target > self.clock:
            self.advance(target)
        elif not self.done:
            self._finalize(self.clock)
        return self.verdict

    def matched_pairs(self) -> set[tuple[int, int]]:
        return {(m.spec_id, m.impl_id) for m in self.matches}

    # -- slot machinery -------------------------------------------------

    def _emit(self, record) -> None:
        if self.listener is not None:
            self.listener(record)

    def _next_guard_time(self) -> int | None:
        times = []
        for x in self.past_s.values():
            if x.id in self.term:
                if not x.optional:
                    times.append(x.hi)
                elif self.cfg.dep_window is not None:
                    times.append(x.tick + self.cfg.dep_window)
            else:
                times.append(x.hi)
        minus = self.cfg.slack.minus
        times.extend(y.tick + minus(y.label) for y in self.past_i.values())
        final = self._finalize_time()
        if final is not None:
            times.append(final)
        return min(times, default=None)

    def _idle_until(self, t: int) -> None:
        while not self.done:
            nxt = self._next_guard_time()
            if nxt is None or nxt >= t:
                return
            if self.clock is not None and nxt <= self.clock:
                nxt = self.clock + 1
                if nxt >= t:
                    return
            self._slot(nxt, [], [])

    def _slot(self, t: int, spec: list[SpecVertex], impl: list[TimedEvent]) -> None:
        self.clock = t
        for x in sorted(spec, key=lambda v: (len(v.ancestors), v.seq)):
            self.on_spec_output(x)
        for y in impl:
            self.on_impl_output(y)
        self._timeouts(t)
        if self.done:
            return
        self._term_timeouts(t)
        self._finalize(t)

    # -- reception actions --------------------------------------------

    def on_spec_output(self, x: SpecVertex) -> None:
        if x.id in self.vertices:
            raise MonitorError(f"specification vertex {x.id} delivered twice")
        self.vertices[x.id] = x
        self.past_s[x.id] = x
        self.end_s = x.tick if self.end_s is None else max(self.end_s, x.tick)
        if self.cfg.optional_mode and any(a in self.term for a in x.ancestors):
            self.term.add(x.id)
            return
        if self._is_minimal(x) and self._scan_impl(x):
            self._cascade()

    def on_impl_output(self, y: TimedEvent) -> None:
        if y.seq in self._impl_ids:
            raise MonitorError(f"implementation event {y.seq} delivered twice")
        self._impl_ids.add(y.seq)
        self.past_i[y.seq] = y
        self._impl_ticks.append(y.tick)
        self.end_i = y.tick if self.end_i is None else max(self.end_i, y.tick)
        minimal = arbiter_primary(self.past_s.values(), self.term)
        candidates = [self.past_s[i] for i in minimal if y.tick >= self._floor(self.past_s[i])]
        x = arbiter_secondary(y, candidates)
        if x is not None:
            self._record(x, y)
            self._cascade()

    def _is_minimal(self, x: SpecVertex) -> bool:
        return x.id not in self.term and not any(a in self.past_s for a in x.ancestors)

    def _floor(self, x: SpecVertex) -> int:
        return max((self.matched_tick[a] for a in x.ancestors if a in self.matched_tick), default=0)

    def _scan_impl(self, x: SpecVertex) -> bool:
        floor = self._floor(x)
        for y in sorted(self.past_i.values(), key=lambda e: (e.tick, e.seq)):
            if y.tick >= floor and x.matches(y.label, y.tick):
                self._record(x, y)
                return True
        return False

    def _cascade(self) -> None:
        progress = True
        while progress and self.past_i:
            progress = False
            for x in sorted(self.past_s.values(), key=lambda v: (v.tick, v.seq)):
                if self._is_minimal(x) and self._scan_impl(x):
                    progress = True
                    break

    def _record(self, x: SpecVertex, y: TimedEvent) -> None:
        del self.past_s[x.id]
        del self.past_i[y.seq]
        self.matched_tick[x.id] = y.tick
        rec = MatchRecord(x.id, y.seq, x.tick, y.tick, self.clock)
        self.matches.append(rec)
        self._emit(rec)

    # -- timeouts --------------------------------------------------------

    def _timeouts(self, t: int) -> None:
        optional_mode = self.cfg.optional_mode
        while True:
            due = [x for x in self.past_s.values()
                   if x.hi <= t and (x.id not in self.term or not x.optional)]
            if not due:
                break
            x = min(due, key=lambda v: (v.hi, v.tick, v.seq))
            if optional_mode and x.optional:
                self.on_spec_timeout_optional(x)
            else:
                self._fail(FailureKind.MISSING, x.id, t)
                return
        minus = self.cfg.slack.minus
        due = [y for y in self.past_i.values() if y.tick + minus(y.label) <= t]
        if due:
            y = min(due, key=lambda e: (e.tick + minus(e.label), e.tick, e.seq))
            self._fail(FailureKind.UNEXPECTED, y.seq, t)

    def on_spec_timeout_optional(self, x: SpecVertex) -> None:
        """An optional vertex ran out of time: cancel it and everything after it."""
        self.term.add(x.id)
        for z in self.past_s.values():
            if x.id in z.ancestors:
                self.term.add(z.id)

    def _term_timeouts(self, t: int) -> None:
        window = self.cfg.dep_window
        if window is None:
            return
        for i in sorted(self.term):
            x = self.past_s.get(i)
            if x is None:
                self.term.discard(i)
            elif x.optional and x.tick + window <= t:
                del self.past_s[i]
                self.term.discard(i)

    def _fail(self, kind: FailureKind, ident: int, t: int) -> None:
        self.failure = FailureReport(kind, ident, t, tuple(self.matches))
        self.verdict = Verdict.FALSE
        self.final_time = t
        self._emit(self.failure)
        self._emit(VerdictRecord(self.verdict, t))

    # -- finalisation ----------------------------------------------------

    def _finalize_time(self) -> int | None:
        slack = self.cfg.slack
        spec_end = 0 if self.end_s is None else self.end_s + slack.bound_plus
        if self.cfg.termination == "explicit":
            if not self.closed:
                return None
            impl_end = 0 if self.end_i is None else self.end_i + slack.bound_minus
            return max(spec_end, impl_end, self.clock or 0)
        T = self.stabilization_time
        if T is None:
            return None
        seen = [tick for tick in self._impl_ticks if tick <= T]
        impl_end = max(seen) + slack.bound_minus if seen else 0
        return max(T, spec_end, impl_end)

    def _finalize(self, t: int) -> None:
        target = self._finalize_time()
        if target is not None and target <= t and not self.done:
            self.verdict = Verdict.TRUE
            self.final_time = t
            self._emit(VerdictRecord(self.verdict, t))


def replay(trace: ExtendedTimeIntervalTrace, impl: TimedWord, cfg: MonitorConfig,
           listener: Listener | None = None, finish: bool = True) -> Monitor:
    """Drive a monitor over two complete streams, slot by slot."""
    mon = Monitor(cfg, listener)
    spec_at: dict[int, list[SpecVertex]] = defaultdict(list)
    impl_at: dict[int, list[TimedEvent]] = defaultdict(list)
    for x in trace:
        spec_at[x.tick].append(x)
    for y in impl:
        impl_at[y.tick].append(y)
    for t in sorted(set(spec_at) | set(impl_at)):
        mon.step(t, spec_at[t], impl_at[t])
        if mon.done:
            return mon
    if finish:
        mon.finish()
    return mon


def replay_per_port(trace: ExtendedTimeIntervalTrace, impl: TimedWord, cfg: MonitorConfig,
                    port_of: Callable[[object], int]) -> tuple[Verdict, dict[int, Monitor]]:
    """Run one independent sub-monitor per port and combine their verdicts.

    Only meaningful when the specification order never crosses ports.
    """
    ports = sorted({x.port for x in trace} | {port_of(y.label) for y in impl})
    monitors = {}
    for p in ports:
        sub_trace = ExtendedTimeIntervalTrace(tuple(x for x in trace if x.port == p))
        for x in sub_trace:
            if any(trace[a].port != p for a in x.ancestors):
                raise MonitorError(f"vertex {x.id} has a predecessor on another port")
        sub_impl = TimedWord(tuple(y for y in impl if port_of(y.label) == p))
        monitors[p] = replay(sub_trace, sub_impl, cfg)
    verdicts = [m.verdict for m in monitors.values()]
    if Verdict.FALSE in verdicts:
        return Verdict.FALSE, monitors
    if all(v is Verdict.TRUE for v in verdicts):
        return Verdict.TRUE, monitors
    return Verdict.INCONCLUSIVE, monitors
