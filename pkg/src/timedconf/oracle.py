"""Offline brute-force conformance decision.

At every critical time the oracle searches for a one-to-one relation between
the specification vertices and implementation events seen so far such that

* every pair matches (equal labels, implementation stamp inside the interval),
* every expired obligatory specification vertex is paired,
* every expired optional one is paired, or none of its descendants is,
* every expired implementation event is paired,
* paired events keep the specification order.

Those five requirements are named ``match``, ``missing``,
``cancelled-descendant``, ``unexpected`` and ``order`` in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .abstraction import ExtendedTimeIntervalTrace, SlackPolicy, SpecVertex
from .monitor import FailureKind, MonitorConfig, Verdict, replay
from .traces import TimedEvent, TimedWord

DEFAULT_SEARCH_CAP = 12

CLAUSES = ("one-to-one", "match", "missing", "cancelled-descendant", "unexpected", "order")


class OracleCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class Instance:
    """Everything the oracle needs besides the time point."""

    spec: ExtendedTimeIntervalTrace
    impl: TimedWord
    slack: SlackPolicy
    optional_mode: bool = False
    dep_window: int | None = None

    def impl_deadline(self, y: TimedEvent) -> int:
        return y.tick + self.slack.minus(y.label)

    def past_spec(self, t: int) -> list[SpecVertex]:
        return [x for x in self.spec if x.tick <= t]

    def past_impl(self, t: int) -> list[TimedEvent]:
        return [y for y in self.impl if y.tick <= t]

    def obligatory(self, x: SpecVertex) -> bool:
        return not (self.optional_mode and x.optional)


@dataclass(frozen=True)
class MatchingRelation:
    pairs: frozenset[tuple[int, int]] = frozenset()

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Counterexample:
    time: int
    clause: str
    id: int | None

    @property
    def kind(self) -> FailureKind:
        return FailureKind.UNEXPECTED if self.clause == "unexpected" else FailureKind.MISSING


@dataclass(frozen=True)
class ConformanceResult:
    conforming: bool
    witnesses: Mapping[int, MatchingRelation] = field(default_factory=dict)
    counterexample: Counterexample | None = None


def critical_times(inst: Instance) -> list[int]:
    """Times at which some past set or expiry set can change, plus one beyond."""
    times = {0}
    for x in inst.spec:
        times.update((x.tick, x.lo, x.hi))
        if inst.optional_mode and inst.dep_window is not None:
            times.add(x.tick + inst.dep_window)
    for y in inst.impl:
        times.update((y.tick, inst.impl_deadline(y)))
    if len(inst.spec) or len(inst.impl):
        times.add(max(times) + 1)
    return sorted(times)


def check_matching(inst: Instance, t: int, pairs: Iterable[tuple[int, int]]) -> list[str]:
    """Clauses a candidate relation violates at time ``t`` (empty list = valid)."""
    pairs = list(pairs)
    spec = {x.id: x for x in inst.past_spec(t)}
    impl = {y.seq: y for y in inst.past_impl(t)}
    bad = []
    xs = [x for x, _ in pairs]
    ys = [y for _, y in pairs]
    if len(set(xs)) != len(xs) or len(set(ys)) != len(ys):
        bad.append("one-to-one")
    if any(x not in spec or y not in impl or not spec[x].matches(impl[y].label, impl[y].tick)
           for x, y in pairs):
        bad.append("match")
        return bad
    partner = dict(pairs)
    for x in spec.values():
        if x.hi > t or x.id in partner:
            continue
        if inst.obligatory(x):
            bad.append("missing")
            break
        if any(x.id in d.ancestors and d.id in partner for d in spec.values()):
            bad.append("cancelled-descendant")
            break
    used = set(ys)
    if any(inst.impl_deadline(y) <= t and y.seq not in used for y in impl.values()):
        bad.append("unexpected")
    for x, y in pairs:
        for x2, y2 in pairs:
            if x in spec[x2].ancestors and impl[y].tick > impl[y2].tick:
                bad.append("order")
                return bad
    return bad


def _search(inst: Instance, t: int, spec_rules: set[int] | None, impl_rules: set[int] | None,
            cap: int) -> dict[int, int | None] | None:
    """Backtracking search; ``None`` rule sets mean "every expired element"."""
    spec = inst.past_spec(t)
    impl = inst.past_impl(t)
    if len(spec) > cap or len(impl) > cap:
        raise OracleCapError(f"{len(spec)} specification / {len(impl)} implementation events "
                             f"at t={t} exceed the search cap {cap}")
    expired_spec = {x.id for x in spec if x.hi <= t}
    if spec_rules is None:
        spec_rules = expired_spec
    else:
        spec_rules = spec_rules & expired_spec
    must_impl = {y.seq for y in impl if inst.impl_deadline(y) <= t}
    if impl_rules is not None:
        must_impl &= impl_rules
    by_id = {x.id: x for x in spec}

    def hard(x: SpecVertex) -> bool:
        return x.id in spec_rules and inst.obligatory(x)

    order = sorted(spec, key=lambda x: (not hard(x), x.tick, x.id))
    domains = {
        x.id: [y for y in sorted(impl, key=lambda e: (e.tick, e.seq)) if x.matches(y.label, y.tick)]
        for x in spec
    }
    # vertices whose "paired or no descendant paired" rule is enforced
    soft = {x.id for x in spec if x.id in spec_rules and not inst.obligatory(x)}
    assign: dict[int, int | None] = {}
    tick_of: dict[int, int] = {}
    used: set[int] = set()

    def consistent(x: SpecVertex, y: TimedEvent | None) -> bool:
        for other_id, other_y in assign.items():
            other = by_id[other_id]
            if y is not None and other_y is not None:
                if other_id in x.ancestors and tick_of[other_id] > y.tick:
                    return False
                if x.id in other.ancestors and y.tick > tick_of[other_id]:
                    return False
            if y is not None and other_y is None and other_id in soft and other_id in x.ancestors:
                return False
            if y is None and other_y is not None and x.id in soft and x.id in other.ancestors:
                return False
        return True

    def extend(i: int) -> bool:
        if i == len(order):
            return must_impl <= used
        x = order[i]
        options: list[TimedEvent | None] = [y for y in domains[x.id] if y.seq not in used]
        if not hard(x):
            options.append(None)
        for y in options:
            if not consistent(x, y):
                continue
            assign[x.id] = None if y is None else y.seq
            if y is not None:
                used.add(y.seq)
                tick_of[x.id] = y.tick
            if extend(i + 1):
                return True
            del assign[x.id]
            if y is not None:
                used.discard(y.seq)
                del tick_of[x.id]
        return False

    if extend(0):
        return dict(assign)
    return None


def _relation(assign: dict[int, int | None]) -> MatchingRelation:
    return MatchingRelation(frozenset((x, y) for x, y in assign.items() if y is not None))


def find_matching(inst: Instance, t: int, cap: int = DEFAULT_SEARCH_CAP) -> MatchingRelation | None:
    """A witness relation at ``t`` under the plain rules (every vertex obligatory)."""
    plain = Instance(inst.spec, inst.impl, inst.slack, False, inst.dep_window)
    assign = _search(plain, t, None, None, cap)
    return None if assign is None else _relation(assign)


def find_matching_optional(inst: Instance, t: int, cap: int = DEFAULT_SEARCH_CAP) -> MatchingRelation | None:
    """A witness relation at ``t`` where optional vertices may stay unpaired."""
    opt = Instance(inst.spec, inst.impl, inst.slack, True, inst.dep_window)
    assign = _search(opt, t, None, None, cap)
    return None if assign is None else _relation(assign)


def _diagnose(inst: Instance, t: int, cap: int) -> Counterexample:
    spec_expired = sorted((x for x in inst.past_spec(t) if x.hi <= t),
                          key=lambda x: (x.hi, x.tick, x.id))
    impl_expired = sorted((y for y in inst.past_impl(t) if inst.impl_deadline(y) <= t),
                          key=lambda y: (inst.impl_deadline(y), y.tick, y.seq))

    def first_spec_breaker(impl_rules):
        rules: set[int] = set()
        for x in spec_expired:
            rules.add(x.id)
            if _search(inst, t, rules, impl_rules, cap) is None:
                return x
        return None

    if _search(inst, t, set(), None, cap) is not None:
        x = first_spec_breaker(None)
        clause = "missing" if inst.obligatory(x) else "cancelled-descendant"
        return Counterexample(t, clause, x.id)
    if _search(inst, t, None, set(), cap) is not None:
        rules: set[int] = set()
        for y in impl_expired:
            rules.add(y.seq)
            if _search(inst, t, None, rules, cap) is None:
                return Counterexample(t, "unexpected", y.seq)
    # neither side alone can be satisfied: blame the specification side first
    x = first_spec_breaker(set())
    if x is None:
        return Counterexample(t, "order", None)
    clause = "missing" if inst.obligatory(x) else "cancelled-descendant"
    return Counterexample(t, clause, x.id)


def conforms_at(inst: Instance, t: int, cap: int = DEFAULT_SEARCH_CAP) -> MatchingRelation | None:
    assign = _search(inst, t, None, None, cap)
    return None if assign is None else _relation(assign)


def conforms(inst: Instance, cap: int = DEFAULT_SEARCH_CAP) -> ConformanceResult:
    """Check every critical time; report the first one with no matching."""
    witnesses = {}
    for t in critical_times(inst):
        rel = conforms_at(inst, t, cap)
        if rel is None:
            return ConformanceResult(False, witnesses, _diagnose(inst, t, cap))
        witnesses[t] = rel
    return ConformanceResult(True, witnesses)


@dataclass(frozen=True)
class Comparison:
    agree: bool
    monitor_verdict: Verdict
    monitor_failure: object
    oracle: ConformanceResult
    log: tuple[str, ...] = ()

    @property
    def kinds_agree(self) -> bool:
        if self.oracle.conforming or self.monitor_failure is None:
            return self.agree
        return self.monitor_failure.kind is self.oracle.counterexample.kind


def compare_with_monitor(inst: Instance, cfg: MonitorConfig | None = None,
                         cap: int = DEFAULT_SEARCH_CAP) -> Comparison:
    """Run the monitor to completion and the oracle on the same instance."""
    if cfg is None:
        cfg = MonitorConfig(inst.slack, inst.dep_window, inst.optional_mode)
    log: list[str] = []
    mon = replay(inst.spec, inst.impl, cfg, listener=lambda r: log.append(r.line()))
    result = conforms(inst, cap)
    agree = (mon.verdict is Verdict.FALSE) == (not result.conforming)
    if agree:
        return Comparison(True, mon.verdict, mon.failure, result, tuple(log))
    dump = [f"SPEC id={x.id} label={x.label} t={x.tick} lo={x.lo} hi={x.hi} "
            f"opt={int(x.optional)} anc={sorted(x.ancestors)}" for x in inst.spec]
    dump += [f"IMPL id={y.seq} label={y.label} t={y.tick}" for y in inst.impl]
    return Comparison(False, mon.verdict, mon.failure, result, tuple(dump + log))
