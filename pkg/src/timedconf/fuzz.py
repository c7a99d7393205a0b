"""Random small instances for monitor/oracle agreement runs."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .abstraction import (
    AbstractionConfig,
    DependencyDecl,
    ExtendedTimeIntervalTrace,
    SlackPolicy,
    abstract,
    covering_predecessors,
)
from .monitor import MonitorConfig
from .oracle import Instance, compare_with_monitor
from .traces import EventLabel, PortAssignment, TimedEvent, TimedWord

NAMES = ("a", "b", "c")
PAYLOADS = (b"", b"\x01")


@dataclass(frozen=True)
class FuzzCaps:
    max_spec: int = 6
    max_impl: int = 6
    max_tick: int = 16


@dataclass(frozen=True)
class GeneratedInstance:
    spec_word: TimedWord
    deps: DependencyDecl
    opts: frozenset[int]
    ports: PortAssignment
    instance: Instance

    @property
    def monitor_config(self) -> MonitorConfig:
        inst = self.instance
        return MonitorConfig(inst.slack, inst.dep_window, inst.optional_mode)


def _slack(rng: random.Random) -> SlackPolicy:
    minus = {n: rng.randint(0, 3) for n in NAMES}
    plus = {n: rng.randint(0, 3) for n in NAMES}
    return SlackPolicy(0, 0, minus, plus)


def _spec_word(rng: random.Random, caps: FuzzCaps, ports: PortAssignment) -> TimedWord:
    n = rng.randint(0, caps.max_spec)
    top = max(0, caps.max_tick - 6)
    taken = set()
    raw = []
    for _ in range(n):
        for _attempt in range(8):
            name = rng.choice(NAMES)
            tick = rng.randint(0, top)
            if (tick, ports(name)) not in taken:
                taken.add((tick, ports(name)))
                raw.append((tick, EventLabel(name, rng.choice(PAYLOADS))))
                break
    raw.sort(key=lambda p: p[0])
    return TimedWord(tuple(TimedEvent(label, tick, i) for i, (tick, label) in enumerate(raw)))


def _impl_word(rng: random.Random, trace: ExtendedTimeIntervalTrace, caps: FuzzCaps) -> TimedWord:
    out: list[tuple[int, EventLabel]] = []
    faulty = rng.random() < 0.5
    for x in trace:
        r = rng.random() if faulty else 0.0
        if r < 0.6:
            tick = x.tick if rng.random() < 0.4 else rng.randint(x.lo, x.hi)
            out.append((tick, x.label))
        elif r < 0.7:
            continue
        elif r < 0.8:
            other = PAYLOADS[1 - PAYLOADS.index(x.label.payload)]
            out.append((rng.randint(x.lo, x.hi), EventLabel(x.label.name, other)))
        elif r < 0.9:
            tick = x.hi + rng.randint(1, 2) if rng.random() < 0.5 or x.lo == 0 else x.lo - 1
            out.append((tick, x.label))
        else:
            out.append((x.tick, x.label))
            out.append((rng.randint(x.lo, x.hi), x.label))
    if faulty and rng.random() < 0.3:
        out.append((rng.randint(0, caps.max_tick), EventLabel(rng.choice(NAMES), rng.choice(PAYLOADS))))
    out = [(min(max(t, 0), caps.max_tick), lab) for t, lab in out]
    while len(out) > caps.max_impl:
        out.pop(rng.randrange(len(out)))
    keyed = sorted(out, key=lambda p: (p[0], rng.random()))
    return TimedWord(tuple(TimedEvent(lab, t, i) for i, (t, lab) in enumerate(keyed)))


def generate(rng: random.Random, caps: FuzzCaps = FuzzCaps(), optional_mode: bool = False) -> GeneratedInstance:
    ports = PortAssignment({n: rng.randint(0, 2) for n in NAMES})
    slack = _slack(rng)
    word = _spec_word(rng, caps, ports)
    edges = set()
    for i in range(len(word)):
        for j in range(i + 1, len(word)):
            if word[i].tick < word[j].tick and rng.random() < 0.3:
                edges.add((i, j))
    deps = DependencyDecl(frozenset(edges))
    opts = frozenset(e.seq for e in word if optional_mode and rng.random() < 0.4)
    cfg = AbstractionConfig(slack, ports, optional_mode=optional_mode)
    trace = abstract(word, deps, opts, cfg)
    window = None
    if optional_mode:
        spans = [x.tick - trace[a].tick for x in trace for a in covering_predecessors(trace, x.id)]
        window = max(spans, default=0) + rng.randint(0, 3)
        trace = abstract(word, deps, opts, AbstractionConfig(slack, ports, dep_window=window,
                                                             optional_mode=True))
    impl = _impl_word(rng, trace, caps)
    return GeneratedInstance(word, deps, opts, ports, Instance(trace, impl, slack, optional_mode, window))


@dataclass
class FuzzSummary:
    count: int = 0
    agree: int = 0
    plain: list = None
    optional: list = None
    conforming: int = 0
    disagreements: list = None

    def __post_init__(self):
        self.plain = [0, 0]
        self.optional = [0, 0]
        self.disagreements = []

    def lines(self) -> list[str]:
        return [
            f"agreement {self.agree}/{self.count}",
            f"plain {self.plain[0]}/{self.plain[1]}",
            f"optional {self.optional[0]}/{self.optional[1]}",
            f"conforming {self.conforming} nonconforming {self.count - self.conforming}",
        ]


def run_fuzz(seed: int, count: int, caps: FuzzCaps = FuzzCaps(), modes: str = "both") -> FuzzSummary:
    """Generate ``count`` instances and compare monitor and oracle verdicts.

    With ``modes="both"`` even-numbered instances use plain semantics and
    odd-numbered ones optional outputs.
    """
    rng = random.Random(seed)
    summary = FuzzSummary()
    for k in range(count):
        if modes == "both":
            optional = k % 2 == 1
        else:
            optional = modes == "optional"
        gen = generate(rng, caps, optional)
        cmp = compare_with_monitor(gen.instance, gen.monitor_config)
        summary.count += 1
        bucket = summary.optional if optional else summary.plain
        bucket[1] += 1
        if cmp.oracle.conforming:
            summary.conforming += 1
        if cmp.agree:
            summary.agree += 1
            bucket[0] += 1
        else:
            summary.disagreements.append((k, cmp))
    return summary
