"""Timed words, Mazurkiewicz traces, pomsets and timed traces.

Everything here is immutable. Vertex ids are plain integers; labels are
any hashable value (a bare symbol string for untimed words, an
:class:`EventLabel` for timed events). Dependence between labels is decided
on the symbol *name*, see :func:`symbol_of`.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

DEFAULT_LINEARIZATION_CAP = 12


class TraceError(ValueError):
    pass


class UnknownSymbolError(TraceError):
    pass


class EnumerationCapError(TraceError):
    pass


@dataclass(frozen=True, order=True)
class EventLabel:
    name: str
    payload: bytes = b""

    def __str__(self) -> str:
        if self.payload:
            return f"{self.name}[{self.payload.hex()}]"
        return self.name


def symbol_of(label: Hashable) -> str:
    """Symbol name used for independence lookups."""
    if isinstance(label, EventLabel):
        return label.name
    return label  # type: ignore[return-value]


@dataclass(frozen=True)
class PortAssignment:
    ports: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "ports", dict(self.ports))
        for name, port in self.ports.items():
            if port < 0:
                raise TraceError(f"negative port for {name!r}")

    def __call__(self, label: Hashable) -> int:
        name = symbol_of(label)
        try:
            return self.ports[name]
        except KeyError:
            raise UnknownSymbolError(f"no port assigned to symbol {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.ports


@dataclass(frozen=True)
class TimedEvent:
    label: EventLabel
    tick: int
    seq: int = 0

    def __post_init__(self):
        if self.tick < 0:
            raise TraceError(f"negative tick {self.tick}")


@dataclass(frozen=True)
class TimedWord:
    events: tuple[TimedEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    @classmethod
    def of(cls, *pairs: tuple[str | EventLabel, int]) -> "TimedWord":
        """Build from ``(label, tick)`` pairs; seq is the position."""
        events = []
        for i, (label, tick) in enumerate(pairs):
            if not isinstance(label, EventLabel):
                label = EventLabel(label)
            events.append(TimedEvent(label, tick, i))
        return cls(tuple(events))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def __add__(self, other: "TimedWord") -> "TimedWord":
        return TimedWord(self.events + other.events)

    def untimed(self) -> tuple[EventLabel, ...]:
        return tuple(e.label for e in self.events)

    def begin(self) -> int | None:
        return min((e.tick for e in self.events), default=None)

    def end(self) -> int | None:
        return max((e.tick for e in self.events), default=None)


@dataclass(frozen=True)
class Violation:
    kind: str  # "monotonicity" | "sequentiality" | "causality"
    where: tuple
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_timed_word(w: TimedWord, ports: PortAssignment | None = None) -> ValidationResult:
    """Report monotonicity breaks and, with ports, same-tick same-port collisions."""
    found = []
    for i in range(1, len(w)):
        if w[i].tick < w[i - 1].tick:
            found.append(Violation(
                "monotonicity", (i,),
                f"tick decreases at index {i}: {w[i - 1].tick} -> {w[i].tick}"))
    if ports is not None:
        by_slot: dict[tuple[int, int], int] = {}
        for i, e in enumerate(w):
            key = (e.tick, ports(e.label))
            if key in by_slot:
                found.append(Violation(
                    "sequentiality", (by_slot[key], i),
                    f"events {by_slot[key]} and {i} share tick {key[0]} and port {key[1]}"))
            else:
                by_slot[key] = i
    return ValidationResult(tuple(found))


@dataclass(frozen=True)
class ConcurrentAlphabet:
    symbols: frozenset[str]
    independent: frozenset[frozenset[str]] = frozenset()

    def __post_init__(self):
        symbols = frozenset(self.symbols)
        pairs = set()
        for pair in self.independent:
            pair = frozenset(pair)
            if len(pair) != 2:
                raise TraceError("independence must be irreflexive")
            if not pair <= symbols:
                raise UnknownSymbolError(f"independent pair {sorted(pair)} outside alphabet")
            pairs.add(pair)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "independent", frozenset(pairs))

    @classmethod
    def of(cls, symbols: Iterable[str], independent: Iterable[tuple[str, str]] = ()) -> "ConcurrentAlphabet":
        return cls(frozenset(symbols), frozenset(frozenset(p) for p in independent))

    @classmethod
    def from_ports(cls, ports: PortAssignment) -> "ConcurrentAlphabet":
        """Symbols on different ports are independent, same port dependent."""
        names = sorted(ports.ports)
        pairs = [(a, b) for a, b in itertools.combinations(names, 2)
                 if ports.ports[a] != ports.ports[b]]
        return cls.of(names, pairs)

    def is_independent(self, a: Hashable, b: Hashable) -> bool:
        return frozenset((symbol_of(a), symbol_of(b))) in self.independent

    def is_dependent(self, a: Hashable, b: Hashable) -> bool:
        return not self.is_independent(a, b)

    def check(self, label: Hashable) -> None:
        if symbol_of(label) not in self.symbols:
            raise UnknownSymbolError(f"symbol {symbol_of(label)!r} not in alphabet")


def transitive_closure(vertices: Iterable[int], edges: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    succ: dict[int, set[int]] = {v: set() for v in vertices}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
        succ.setdefault(b, set())
    closed = set()
    for start in succ:
        stack = list(succ[start])
        seen = set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(succ[v])
        closed.update((start, v) for v in seen)
    return frozenset(closed)


@dataclass(frozen=True)
class Pomset:
    """A labelled strict partial order; ``order`` is kept transitively closed."""

    vertices: tuple[int, ...] = ()
    order: frozenset[tuple[int, int]] = frozenset()
    labels: Mapping[int, Hashable] = field(default_factory=dict)

    def __post_init__(self):
        vertices = tuple(self.vertices)
        vs = set(vertices)
        if len(vs) != len(vertices):
            raise TraceError("duplicate vertex ids")
        labels = dict(self.labels)
        if set(labels) != vs:
            raise TraceError("label map must be total on the vertices")
        order = transitive_closure(vertices, self.order)
        for a, b in order:
            if a not in vs or b not in vs:
                raise TraceError(f"order pair ({a}, {b}) mentions unknown vertex")
            if a == b:
                raise TraceError(f"order has a cycle through vertex {a}")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "order", order)

    def __len__(self) -> int:
        return len(self.vertices)

    def precedes(self, x: int, y: int) -> bool:
        return (x, y) in self.order

    def concurrent(self, x: int, y: int) -> bool:
        return x != y and (x, y) not in self.order and (y, x) not in self.order

    def history(self, x: int) -> frozenset[int]:
        return frozenset({x} | {a for a, b in self.order if b == x})

    def immediate(self) -> frozenset[tuple[int, int]]:
        """Covering pairs (transitive reduction)."""
        succ: dict[int, set[int]] = {v: set() for v in self.vertices}
        for a, b in self.order:
            succ[a].add(b)
        return frozenset(
            (a, b) for a, b in self.order
            if not any(b in succ[z] for z in succ[a]))

    def minimal(self, among: Iterable[int] | None = None) -> frozenset[int]:
        pool = set(self.vertices if among is None else among)
        return frozenset(x for x in pool if not any((y, x) in self.order for y in pool))

    def restrict(self, keep: Iterable[int]) -> "Pomset":
        keep = set(keep)
        return Pomset(
            tuple(v for v in self.vertices if v in keep),
            frozenset((a, b) for a, b in self.order if a in keep and b in keep),
            {v: self.labels[v] for v in self.vertices if v in keep},
        )

    def relabel_vertices(self, mapping: Mapping[int, int]) -> "Pomset":
        return Pomset(
            tuple(mapping[v] for v in self.vertices),
            frozenset((mapping[a], mapping[b]) for a, b in self.order),
            {mapping[v]: lab for v, lab in self.labels.items()},
        )


def pomset_of_word(word: Sequence[Hashable], alph: ConcurrentAlphabet) -> Pomset:
    """Represent ``[word]`` as a pomset: occurrences ordered iff linked by dependence."""
    for label in word:
        alph.check(label)
    n = len(word)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if alph.is_dependent(word[i], word[j])]
    return Pomset(tuple(range(n)), frozenset(edges), dict(enumerate(word)))


def linearizations(p: Pomset, cap: int = DEFAULT_LINEARIZATION_CAP) -> set[tuple]:
    """Label sequences of all linear extensions of ``p``."""
    if len(p) > cap:
        raise EnumerationCapError(f"{len(p)} vertices exceeds enumeration cap {cap}")
    preds = {v: {a for a, b in p.order if b == v} for v in p.vertices}
    words: set[tuple] = set()

    def extend(placed: list[int], remaining: set[int]):
        if not remaining:
            words.add(tuple(p.labels[v] for v in placed))
            return
        done = set(placed)
        for v in sorted(remaining):
            if preds[v] <= done:
                placed.append(v)
                remaining.remove(v)
                extend(placed, remaining)
                remaining.add(v)
                placed.pop()

    extend([], set(p.vertices))
    return words


def count_linear_extensions(p: Pomset, cap: int = DEFAULT_LINEARIZATION_CAP) -> int:
    """Number of total orders extending ``p`` (vertex-wise, not word-wise)."""
    if len(p) > cap:
        raise EnumerationCapError(f"{len(p)} vertices exceeds enumeration cap {cap}")
    index = {v: i for i, v in enumerate(p.vertices)}
    pred_mask = [0] * len(p)
    for a, b in p.order:
        pred_mask[index[b]] |= 1 << index[a]
    full = (1 << len(p)) - 1
    counts = {0: 1}
    for mask in range(full + 1):
        c = counts.get(mask)
        if not c:
            continue
        for i in range(len(p)):
            bit = 1 << i
            if not mask & bit and pred_mask[i] & mask == pred_mask[i]:
                counts[mask | bit] = counts.get(mask | bit, 0) + c
    return counts.get(full, 0)


def mazurkiewicz_equivalent(u: Sequence[Hashable], v: Sequence[Hashable], alph: ConcurrentAlphabet) -> bool:
    """Decide ``u ~ v`` by projection onto every pair of dependent symbols."""
    for label in itertools.chain(u, v):
        alph.check(label)
    if sorted(map(repr, u)) != sorted(map(repr, v)):
        return False
    names = sorted({symbol_of(x) for x in u})
    for a, b in itertools.combinations_with_replacement(names, 2):
        if alph.is_independent(a, b):
            continue
        keep = {a, b}
        if [x for x in u if symbol_of(x) in keep] != [x for x in v if symbol_of(x) in keep]:
            return False
    return True


def swap_closure(word: Sequence[Hashable], alph: ConcurrentAlphabet) -> set[tuple]:
    """All words reachable by swapping adjacent independent events (BFS)."""
    start = tuple(word)
    seen = {start}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        for i in range(len(w) - 1):
            if alph.is_independent(w[i], w[i + 1]):
                nxt = w[:i] + (w[i + 1], w[i]) + w[i + 2:]
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return seen


def _disjoint(p: Pomset, q: Pomset) -> Pomset:
    if not set(p.vertices) & set(q.vertices):
        return q
    base = max(p.vertices, default=-1) + 1
    return q.relabel_vertices({v: base + i for i, v in enumerate(q.vertices)})


def compose_parallel(p: Pomset, q: Pomset) -> Pomset:
    q = _disjoint(p, q)
    return Pomset(p.vertices + q.vertices, p.order | q.order, {**p.labels, **q.labels})


def compose_sequential(p: Pomset, q: Pomset) -> Pomset:
    q = _disjoint(p, q)
    cross = frozenset(itertools.product(p.vertices, q.vertices))
    return Pomset(p.vertices + q.vertices, p.order | q.order | cross, {**p.labels, **q.labels})


def is_prefix(s: Pomset, t: Pomset, alph: ConcurrentAlphabet | None = None) -> bool:
    """True iff ``s`` embeds into ``t`` as a downward-closed, order-isomorphic part.

    ``alph`` is only used to reject labels outside the alphabet.
    """
    if alph is not None:
        for lab in itertools.chain(s.labels.values(), t.labels.values()):
            alph.check(lab)
    if len(s) > len(t):
        return False
    # topological order of s so every predecessor is placed first
    s_order = sorted(s.vertices, key=lambda v: len(s.history(v)))
    t_preds = {v: {a for a, b in t.order if b == v} for v in t.vertices}

    def place(i: int, image: dict[int, int], used: set[int]) -> bool:
        if i == len(s_order):
            return all(t_preds[img] <= used for img in used)
        x = s_order[i]
        for cand in t.vertices:
            if cand in used or t.labels[cand] != s.labels[x]:
                continue
            ok = True
            for y, img in image.items():
                if s.precedes(y, x) != t.precedes(img, cand) or s.precedes(x, y) != t.precedes(cand, img):
                    ok = False
                    break
            if not ok:
                continue
            image[x] = cand
            used.add(cand)
            if place(i + 1, image, used):
                return True
            del image[x]
            used.discard(cand)
        return False

    return place(0, {}, set())


def trace_conditions_hold(p: Pomset, alph: ConcurrentAlphabet) -> bool:
    """Concurrent vertices carry independent labels; covering pairs dependent ones."""
    for x, y in itertools.combinations(p.vertices, 2):
        if p.concurrent(x, y) and not alph.is_independent(p.labels[x], p.labels[y]):
            return False
    return all(alph.is_dependent(p.labels[a], p.labels[b]) for a, b in p.immediate())


@dataclass(frozen=True)
class TimedTrace:
    pomset: Pomset
    theta: Mapping[int, int]

    def __post_init__(self):
        theta = dict(self.theta)
        if set(theta) != set(self.pomset.vertices):
            raise TraceError("time function must be total on the vertices")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def of_word(cls, w: TimedWord) -> "TimedTrace":
        """Execution trace of a timed word: empty order, one vertex per event."""
        return cls(Pomset(tuple(e.seq for e in w), frozenset(), {e.seq: e.label for e in w}),
                   {e.seq: e.tick for e in w})

    def begin(self) -> int | None:
        return min(self.theta.values(), default=None)

    def end(self) -> int | None:
        return max(self.theta.values(), default=None)


def validate_timed_trace(tt: TimedTrace) -> ValidationResult:
    found = [
        Violation("causality", (a, b),
                  f"{a} precedes {b} but theta {tt.theta[a]} >= {tt.theta[b]}")
        for a, b in sorted(tt.pomset.order)
        if tt.theta[a] >= tt.theta[b]
    ]
    return ValidationResult(tuple(found))


def window(tt: TimedTrace, t: int, dt: int) -> TimedTrace:
    keep = [v for v in tt.pomset.vertices if t <= tt.theta[v] <= t + dt]
    return TimedTrace(tt.pomset.restrict(keep), {v: tt.theta[v] for v in keep})
