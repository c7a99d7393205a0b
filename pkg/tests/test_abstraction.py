import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timedconf.abstraction import (
    AbstractionConfig,
    AbstractionError,
    CausalityError,
    DependencyCycleError,
    DependencyDecl,
    DependencyWindowError,
    IncrementalAbstraction,
    SlackPolicy,
    abstract,
    language_member,
    widen,
)
from timedconf.fuzz import FuzzCaps, generate
from timedconf.oracle import Instance, conforms
from timedconf.traces import EventLabel, PortAssignment, TimedTrace, TimedWord

DIAMOND_SLACK = SlackPolicy(0, 0, {"a": 2, "b": 0, "c": 3, "d": 3}, {"a": 0, "b": 2, "c": 1, "d": 1}, 3, 2)
DIAMOND_PORTS = PortAssignment({"a": 0, "b": 1, "c": 2, "d": 3})


def diamond_trace():
    word = TimedWord.of(("b", 1), ("a", 2), ("c", 3), ("d", 4))
    deps = DependencyDecl.of((0, 2), (1, 2), (0, 3), (1, 3))
    return abstract(word, deps, (), AbstractionConfig(DIAMOND_SLACK, DIAMOND_PORTS))


class TestWiden:
    def test_examples(self):
        assert widen(2, "a", SlackPolicy(2, 0)) == (0, 2)
        assert widen(1, "a", SlackPolicy(5, 1)) == (0, 2)
        assert widen(7, "a", SlackPolicy()) == (7, 7)

    def test_slack_above_bound(self):
        with pytest.raises(AbstractionError):
            SlackPolicy(0, 0, {"a": 4}, {}, bound_minus=3)

    def test_bounds_default_to_largest_slack(self):
        p = SlackPolicy(1, 0, {"a": 4}, {"b": 2})
        assert (p.bound_minus, p.bound_plus) == (4, 2)


class TestAbstract:
    def test_diamond_intervals(self):
        tr = diamond_trace()
        by_name = {v.label.name: v for v in tr}
        assert {n: (v.lo, v.hi) for n, v in by_name.items()} == {
            "a": (0, 2), "b": (1, 3), "c": (0, 4), "d": (1, 5)}
        assert tr.order == {(0, 2), (1, 2), (0, 3), (1, 3)}
        tr.check_invariants()

    def test_untimed_style(self):
        word = TimedWord.of(("a", 1), ("b", 2), ("c", 3))
        tr = abstract(word, cfg=AbstractionConfig(SlackPolicy(64, 64)))
        assert tr.order == frozenset()
        assert all(v.lo == 0 and v.hi == v.tick + 64 for v in tr)

    def test_single_event_exact(self):
        tr = abstract(TimedWord.of(("a", 5)))
        assert [(v.lo, v.hi) for v in tr] == [(5, 5)]
        for t, expected in ((4, False), (5, True), (6, False)):
            tt = TimedTrace(tr.pomset(), {0: t})
            assert language_member(tt, tr) is expected

    def test_equal_labels_chain(self):
        word = TimedWord.of(("a", 1), ("b", 2), ("a", 3), (EventLabel("a", b"\x01"), 4))
        tr = abstract(word)
        assert tr.order == {(0, 2)}

    def test_cycle(self):
        word = TimedWord.of(("a", 1), ("b", 2))
        with pytest.raises(DependencyCycleError):
            abstract(word, DependencyDecl.of((0, 1), (1, 0)))

    def test_equal_tick_dependency(self):
        word = TimedWord.of(("a", 1), ("b", 1))
        with pytest.raises(CausalityError):
            abstract(word, DependencyDecl.of((0, 1)))

    def test_equal_tick_equal_label(self):
        with pytest.raises(CausalityError):
            abstract(TimedWord.of(("a", 1), ("a", 1)))

    def test_dependency_window(self):
        word = TimedWord.of(("a", 1), ("b", 6))
        cfg = AbstractionConfig(SlackPolicy(), dep_window=4, optional_mode=True)
        with pytest.raises(DependencyWindowError):
            abstract(word, DependencyDecl.of((0, 1)), (), cfg)
        abstract(word, DependencyDecl.of((0, 1)), (), AbstractionConfig(SlackPolicy(), dep_window=5,
                                                                        optional_mode=True))

    def test_optional_marks(self):
        tr = abstract(TimedWord.of(("a", 1), ("b", 2)), opts=[1])
        assert tr.optional == {1}
        with pytest.raises(AbstractionError):
            abstract(TimedWord.of(("a", 1)), opts=[3])

    def test_invalid_word(self):
        with pytest.raises(AbstractionError):
            abstract(TimedWord.of(("a", 2), ("b", 1)))

    def test_incremental_rejects_forward_dependency(self):
        inc = IncrementalAbstraction(AbstractionConfig())
        inc.add(0, EventLabel("a"), 1)
        with pytest.raises(AbstractionError):
            inc.add(1, EventLabel("b"), 2, deps=[5])
        with pytest.raises(AbstractionError):
            inc.add(0, EventLabel("b"), 2)

    def test_port_collision(self):
        inc = IncrementalAbstraction(AbstractionConfig(ports=PortAssignment({"a": 0, "b": 0})))
        inc.add(0, EventLabel("a"), 1)
        with pytest.raises(AbstractionError):
            inc.add(1, EventLabel("b"), 1)


class TestLanguage:
    def test_membership(self):
        tr = abstract(TimedWord.of(("x", 1)), cfg=AbstractionConfig(SlackPolicy(1, 1)))
        assert language_member(TimedTrace(tr.pomset(), {0: 1}), tr)
        tr2 = abstract(TimedWord.of(("x", 1)), cfg=AbstractionConfig(SlackPolicy(1, 1)))
        assert not language_member(TimedTrace(tr2.pomset(), {0: 3}), tr2)

    def test_diamond_midpoints(self):
        tr = diamond_trace()
        mid = {v.id: (v.lo + v.hi) // 2 for v in tr}
        assert language_member(TimedTrace(tr.pomset(), mid), tr)

    def test_structure_mismatch(self):
        tr = diamond_trace()
        with pytest.raises(AbstractionError):
            language_member(TimedTrace.of_word(TimedWord.of(("a", 1))), tr)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=200, deadline=None)
@given(seeds, st.booleans())
def test_spec_conforms_to_own_abstraction(seed, optional):
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    inst = gen.instance
    own = TimedWord(tuple(sorted(gen.spec_word, key=lambda e: e.tick)))
    assert conforms(Instance(inst.spec, own, inst.slack, inst.optional_mode, inst.dep_window)).conforming


def _wider(slack: SlackPolicy, extra: dict[str, tuple[int, int]]) -> SlackPolicy:
    minus = {n: slack.minus(n) + extra.get(n, (0, 0))[0] for n in "abc"}
    plus = {n: slack.plus(n) + extra.get(n, (0, 0))[1] for n in "abc"}
    return SlackPolicy(slack.default_minus, slack.default_plus, minus, plus)


@settings(max_examples=200, deadline=None)
@given(seeds, st.booleans(), st.dictionaries(st.sampled_from("abc"), st.tuples(st.integers(0, 2), st.integers(0, 2))))
def test_widening_is_monotone(seed, optional, extra):
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    inst = gen.instance
    wide = _wider(inst.slack, extra)
    cfg = AbstractionConfig(wide, gen.ports, dep_window=inst.dep_window, optional_mode=optional)
    tr = abstract(gen.spec_word, gen.deps, gen.opts, cfg)
    for old, new in zip(inst.spec, tr):
        assert new.lo <= old.lo and old.hi <= new.hi
    if conforms(inst).conforming:
        assert conforms(Instance(tr, inst.impl, wide, optional, inst.dep_window)).conforming


@settings(max_examples=50, deadline=None)
@given(seeds, st.booleans())
def test_abstract_is_deterministic(seed, optional):
    gen = generate(random.Random(seed), FuzzCaps(), optional)
    cfg = AbstractionConfig(gen.instance.slack, gen.ports, dep_window=gen.instance.dep_window,
                            optional_mode=optional)
    one = abstract(gen.spec_word, gen.deps, gen.opts, cfg)
    two = abstract(gen.spec_word, gen.deps, gen.opts, cfg)
    assert one == two and repr(one) == repr(two)
