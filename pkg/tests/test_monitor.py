import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timedconf.abstraction import (
    AbstractionConfig,
    DependencyDecl,
    ExtendedTimeIntervalTrace,
    SlackPolicy,
    SpecVertex,
    abstract,
)
from timedconf.fuzz import FuzzCaps, generate
from timedconf.monitor import (
    FailureKind,
    Monitor,
    MonitorConfig,
    MonitorError,
    Verdict,
    arbiter_primary,
    arbiter_secondary,
    replay,
    replay_per_port,
)
from timedconf.oracle import Instance, compare_with_monitor, conforms
from timedconf.traces import EventLabel, TimedEvent, TimedWord

from test_abstraction import DIAMOND_SLACK, diamond_trace

A = EventLabel("a")
B = EventLabel("b")


def vertex(vid, name, tick, lo, hi, ancestors=(), optional=False):
    return SpecVertex(vid, EventLabel(name), tick, lo, hi, optional, None, frozenset(ancestors), vid)


def impl(*pairs):
    return TimedWord.of(*pairs)


def by_name(trace, name):
    return next(v for v in trace if v.label.name == name)


class TestArbiters:
    def test_primary_diamond(self):
        tr = diamond_trace()
        assert arbiter_primary(tr) == {by_name(tr, "a").id, by_name(tr, "b").id}

    def test_primary_empty_and_chain(self):
        assert arbiter_primary([]) == frozenset()
        chain = [vertex(0, "a", 1, 1, 1), vertex(1, "b", 2, 2, 2, {0}), vertex(2, "c", 3, 3, 3, {0, 1})]
        assert arbiter_primary(chain) == {0}

    def test_primary_skips_cancelled(self):
        chain = [vertex(0, "a", 1, 1, 1), vertex(1, "b", 2, 2, 2, {0})]
        assert arbiter_primary(chain, term={0}) == {1}

    def test_secondary(self):
        xa = vertex(0, "a", 2, 0, 2)
        assert arbiter_secondary(TimedEvent(A, 2), [xa]) == xa
        assert arbiter_secondary(TimedEvent(A, 3), [xa]) is None
        early, late = vertex(0, "a", 0, 0, 3), vertex(1, "a", 2, 0, 3)
        assert arbiter_secondary(TimedEvent(A, 1), [late, early]) == early

    def test_secondary_tie_by_seq(self):
        x0 = SpecVertex(5, A, 2, 0, 4, seq=1)
        x1 = SpecVertex(3, A, 2, 0, 4, seq=0)
        assert arbiter_secondary(TimedEvent(A, 2), [x0, x1]) == x1


def run(trace, word, cfg, finish=True):
    log = []
    mon = replay(trace, word, cfg, listener=lambda r: log.append(r.line()), finish=finish)
    return mon, log


class TestDiamond:
    cfg = MonitorConfig(DIAMOND_SLACK)

    def test_inconclusive_at_four(self):
        tr = diamond_trace()
        mon = Monitor(self.cfg)
        word = impl(("b", 1), ("a", 2), ("c", 3))
        for t in range(0, 5):
            mon.step(t, [x for x in tr if x.tick == t], [y for y in word if y.tick == t])
        ids = {v.label.name: v.id for v in tr}
        assert mon.matched_pairs() == {(ids["a"], 1), (ids["b"], 0), (ids["c"], 2)}
        assert mon.verdict is Verdict.INCONCLUSIVE

    def test_true_after_d(self):
        mon, log = run(diamond_trace(), impl(("b", 1), ("a", 2), ("c", 3), ("d", 4)), self.cfg)
        assert mon.verdict is Verdict.TRUE
        assert log[-1] == "VERDICT true t=7"

    def test_match_on_arrival_of_a(self):
        tr = diamond_trace()
        mon = Monitor(self.cfg)
        mon.step(1, [by_name(tr, "b")], [])
        mon.step(2, [by_name(tr, "a")], [TimedEvent(A, 2, 0)])
        assert (by_name(tr, "a").id, 0) in mon.matched_pairs()


class TestReceptions:
    cfg = MonitorConfig(SlackPolicy(2, 2))

    def test_spec_pends_without_impl(self):
        mon = Monitor(self.cfg)
        mon.step(1, [vertex(0, "a", 1, 0, 3)])
        assert set(mon.past_s) == {0}

    def test_impl_pends_without_spec(self):
        mon = Monitor(self.cfg)
        mon.step(1, [], [TimedEvent(A, 1, 0)])
        assert set(mon.past_i) == {0}

    def test_non_minimal_candidate_waits(self):
        word = TimedWord.of(("a", 2), ("b", 3))
        tr = abstract(word, DependencyDecl.of((0, 1)), (), AbstractionConfig(SlackPolicy(2, 2)))
        mon = Monitor(self.cfg)
        mon.step(1, [], [TimedEvent(B, 1, 0)])
        mon.step(2, [tr[0]], [])
        mon.step(3, [tr[1]], [])
        assert mon.matched_pairs() == set()
        mon.step(4, [], [TimedEvent(A, 4, 1)])
        # b was emitted before a: order is violated, the oracle agrees
        inst = Instance(tr, TimedWord((TimedEvent(B, 1, 0), TimedEvent(A, 4, 1))), SlackPolicy(2, 2))
        assert not conforms(inst).conforming
        assert mon.finish() is Verdict.FALSE

    def test_non_minimal_then_predecessor_in_time(self):
        word = TimedWord.of(("a", 2), ("b", 3))
        tr = abstract(word, DependencyDecl.of((0, 1)), (), AbstractionConfig(SlackPolicy(2, 2)))
        impl_word = TimedWord((TimedEvent(A, 1, 0), TimedEvent(B, 1, 1)))
        inst = Instance(tr, impl_word, SlackPolicy(2, 2))
        assert conforms(inst).conforming
        mon, _ = run(tr, impl_word, self.cfg)
        assert mon.verdict is Verdict.TRUE

    def test_equal_time_specs_in_order(self):
        x = vertex(0, "a", 3, 3, 3)
        x2 = vertex(1, "a", 3, 3, 3)
        dep = vertex(2, "b", 3, 3, 3, {0})
        mon = Monitor(MonitorConfig(SlackPolicy()))
        mon.step(3, [dep, x, x2], [TimedEvent(A, 3, 0), TimedEvent(B, 3, 1)])
        assert mon.matched_pairs() == {(0, 0), (2, 1)}

    def test_rescan_after_match(self):
        # b pends until a is matched, then matches straight away
        word = TimedWord.of(("a", 2), ("b", 3))
        tr = abstract(word, DependencyDecl.of((0, 1)), (), AbstractionConfig(SlackPolicy(2, 2)))
        mon = Monitor(self.cfg)
        mon.step(2, [tr[0]], [])
        mon.step(3, [tr[1]], [TimedEvent(B, 3, 0)])
        assert mon.matched_pairs() == set()
        mon.step(4, [], [TimedEvent(A, 4, 1)])
        assert mon.matched_pairs() == {(0, 1)}
        mon.finish()
        # y_b@3 came before y_a@4 so the order is broken anyway
        assert mon.verdict is Verdict.FALSE


class TestTimeouts:
    def test_missing(self):
        mon, log = run(ExtendedTimeIntervalTrace((vertex(0, "a", 0, 0, 2),)), TimedWord(),
                       MonitorConfig(SlackPolicy(0, 2)))
        assert mon.failure.kind is FailureKind.MISSING and mon.failure.time == 2
        assert log == ["FAIL kind=missing id=0 t=2", "VERDICT false t=2"]

    def test_missing_when_matched_late(self):
        mon, _ = run(ExtendedTimeIntervalTrace((vertex(0, "a", 0, 0, 2),)), impl(("a", 3)),
                     MonitorConfig(SlackPolicy(0, 2)))
        assert (mon.failure.kind, mon.failure.time) == (FailureKind.MISSING, 2)

    def test_optional_cancelled(self):
        cfg = MonitorConfig(SlackPolicy(0, 2), dep_window=3, optional_mode=True)
        mon, _ = run(ExtendedTimeIntervalTrace((vertex(0, "a", 0, 0, 2, optional=True),)), TimedWord(), cfg)
        assert mon.verdict is Verdict.TRUE

    def test_no_timeout_after_match(self):
        mon, _ = run(ExtendedTimeIntervalTrace((vertex(0, "a", 0, 0, 2),)), impl(("a", 2)),
                     MonitorConfig(SlackPolicy(0, 2)))
        assert mon.verdict is Verdict.TRUE and mon.failure is None

    def test_unexpected(self):
        slack = SlackPolicy(0, 0, {"d": 2})
        mon, _ = run(ExtendedTimeIntervalTrace(), impl(("d", 1)), MonitorConfig(slack))
        assert (mon.failure.kind, mon.failure.id, mon.failure.time) == (FailureKind.UNEXPECTED, 0, 3)

    def test_unexpected_same_slot(self):
        mon = Monitor(MonitorConfig(SlackPolicy()))
        mon.step(5, [], [TimedEvent(A, 5, 0)])
        assert (mon.failure.kind, mon.failure.time) == (FailureKind.UNEXPECTED, 5)

    def test_boundary_match_before_timeout(self):
        tr = ExtendedTimeIntervalTrace((vertex(0, "a", 0, 0, 2),))
        mon, _ = run(tr, impl(("a", 2)), MonitorConfig(SlackPolicy(0, 2)))
        assert mon.verdict is Verdict.TRUE


class TestOptional:
    cfg = MonitorConfig(SlackPolicy(0, 0, {}, {"a": 3, "b": 3}), dep_window=4, optional_mode=True)

    def chain(self, b_optional=True):
        return ExtendedTimeIntervalTrace((vertex(0, "a", 1, 1, 2, optional=True),
                                          vertex(1, "b", 2, 2, 5, {0}, optional=b_optional)))

    def test_descendant_arriving_after_cancel(self):
        tr = ExtendedTimeIntervalTrace((vertex(0, "a", 1, 1, 2, optional=True),
                                        vertex(1, "b", 4, 4, 7, {0}, optional=True)))
        mon = Monitor(self.cfg)
        mon.step(1, [tr[0]])
        mon.step(3)
        assert mon.term == {0}
        mon.step(4, [tr[1]])
        assert mon.term == {0, 1}

    def test_pending_descendant_cancelled_with_ancestor(self):
        # b is already pending when a times out; its late impl copy stays unexpected
        tr = self.chain()
        word = TimedWord((TimedEvent(B, 3, 0),))
        mon, log = run(tr, word, self.cfg)
        assert mon.failure is not None and mon.failure.kind is FailureKind.UNEXPECTED
        assert not conforms(Instance(tr, word, self.cfg.slack, True, 4)).conforming

    def test_cancelled_obligatory_descendant_is_missing(self):
        tr = self.chain(b_optional=False)
        mon, _ = run(tr, TimedWord(), self.cfg)
        assert (mon.failure.kind, mon.failure.id, mon.failure.time) == (FailureKind.MISSING, 1, 5)
        assert not conforms(Instance(tr, TimedWord(), self.cfg.slack, True, 4)).conforming

    def test_term_purge(self):
        tr = ExtendedTimeIntervalTrace((vertex(0, "a", 1, 1, 1, optional=True),))
        mon = Monitor(self.cfg)
        mon.step(1, [tr[0]])
        mon.step(4)
        assert 0 in mon.term
        mon.step(5)
        assert 0 not in mon.term and 0 not in mon.past_s

    def test_all_cancelled_conforms(self):
        tr = self.chain()
        mon, _ = run(tr, TimedWord(), self.cfg)
        assert mon.verdict is Verdict.TRUE


class TestStep:
    def test_out_of_order_slot(self):
        mon = Monitor(MonitorConfig())
        mon.step(3)
        with pytest.raises(MonitorError):
            mon.step(3)

    def test_wrong_stamp(self):
        with pytest.raises(MonitorError):
            Monitor(MonitorConfig()).step(1, [], [TimedEvent(A, 2)])

    def test_empty_slot(self):
        mon = Monitor(MonitorConfig())
        mon.step(4)
        assert mon.clock == 4 and not mon.past_s and mon.verdict is Verdict.INCONCLUSIVE

    def test_empty_streams(self):
        mon, log = run(ExtendedTimeIntervalTrace(), TimedWord(), MonitorConfig())
        assert log == ["VERDICT true t=0"]


class TestFinalize:
    def test_pending_spec_inconclusive(self):
        tr = ExtendedTimeIntervalTrace((vertex(0, "a", 1, 0, 9),))
        mon, _ = run(tr, TimedWord(), MonitorConfig(SlackPolicy(1, 8)), finish=False)
        assert mon.verdict is Verdict.INCONCLUSIVE

    def test_convergent(self):
        cfg = MonitorConfig(SlackPolicy(1, 1), termination="convergent", stabilization_window=3)
        tr = abstract(TimedWord.of(("a", 1)), cfg=AbstractionConfig(SlackPolicy(1, 1)))
        mon = Monitor(cfg)
        mon.step(1, list(tr), [TimedEvent(A, 1, 0)])
        mon.advance(10)
        assert mon.verdict is Verdict.INCONCLUSIVE
        mon.set_stabilization_time(4)
        assert mon.finish() is Verdict.TRUE

    def test_convergent_needs_window(self):
        with pytest.raises(ValueError):
            MonitorConfig(termination="convergent")


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=300, deadline=None)
@given(seeds, st.booleans())
def test_match_log_is_valid_matching(seed, optional):
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    mon, _ = run(gen.instance.spec, gen.instance.impl, gen.monitor_config)
    pairs = mon.matched_pairs()
    assert len({x for x, _ in pairs}) == len(pairs) == len({y for _, y in pairs})
    spec = gen.instance.spec
    events = {y.seq: y for y in gen.instance.impl}
    tick = {k: y.tick for k, y in events.items()}
    for x, y in pairs:
        assert spec[x].matches(events[y].label, tick[y])
        for x2, y2 in pairs:
            if spec.precedes(x, x2):
                assert tick[y] <= tick[y2]


@settings(max_examples=300, deadline=None)
@given(seeds, st.booleans())
def test_verdict_is_final(seed, optional):
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    mon, log = run(gen.instance.spec, gen.instance.impl, gen.monitor_config)
    verdict, before = mon.verdict, list(log)
    assert verdict is not Verdict.INCONCLUSIVE
    mon.advance((mon.clock or 0) + 50)
    assert mon.verdict is verdict and log == before


@settings(max_examples=300, deadline=None)
@given(seeds, st.booleans())
def test_agrees_with_oracle(seed, optional):
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    assert compare_with_monitor(gen.instance, gen.monitor_config).agree


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_per_port_decomposition(seed):
    rng = random.Random(seed)
    gen = generate(rng, FuzzCaps(), False)
    spec = gen.instance.spec
    # drop cross-port order by re-abstracting with same-port dependencies only
    same_port = DependencyDecl(frozenset(
        (a, b) for a, b in gen.deps.edges if gen.ports(spec[a].label) == gen.ports(spec[b].label)))
    tr = abstract(gen.spec_word, same_port, (), AbstractionConfig(gen.instance.slack, gen.ports))
    cfg = MonitorConfig(gen.instance.slack)
    whole = replay(tr, gen.instance.impl, cfg).verdict
    split, _ = replay_per_port(tr, gen.instance.impl, cfg, gen.ports)
    assert whole is split


@settings(max_examples=200, deadline=None)
@given(seeds, st.booleans())
def test_boundary_arrival_never_fails(seed, optional):
    # every impl event sits exactly on the upper end of its vertex interval
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    spec = gen.instance.spec
    word = TimedWord(tuple(TimedEvent(x.label, x.hi, i) for i, x in
                           enumerate(sorted(spec, key=lambda v: (v.hi, v.seq)))))
    inst = Instance(spec, word, gen.instance.slack, optional, gen.instance.dep_window)
    mon, _ = run(spec, word, gen.monitor_config)
    if conforms(inst).conforming:
        assert mon.verdict is Verdict.TRUE
