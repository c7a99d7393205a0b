"""Reference behaviour models with their default abstraction settings."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .abstraction import AbstractionConfig, SlackPolicy
from .harness import BehaviorModel, HarnessConfig, Outbox
from .monitor import MonitorConfig
from .traces import EventLabel, PortAssignment, TimedEvent, TimedWord


class FifoBuffer(BehaviorModel):
    """Per-channel FIFO with a fixed latency.

    Input ``push`` with payload ``[channel, value]``; output ``out<channel>``
    with payload ``[value]`` on port ``channel``. Each output depends on the
    previous one of its channel. ``jitter`` perturbs each stamp by at most that
    many ticks while keeping channel order.
    """

    name = "fifo_buffer"

    def __init__(self, channels: int = 2, latency: int = 3, jitter: int = 0, seed: int = 0):
        self.channels = channels
        self.latency = latency
        self.jitter = jitter
        super().__init__(seed)

    def reset(self) -> None:
        super().reset()
        self.queues = [deque() for _ in range(self.channels)]
        self.last_out: list[tuple[int, int] | None] = [None] * self.channels

    def step(self, t, inputs, out: Outbox):
        for label in inputs:
            if label.name != "push":
                continue
            ch, value = label.payload[0] % self.channels, label.payload[1:]
            due = t + self.latency
            if self.jitter:
                due += self.rng.randint(-self.jitter, self.jitter)
            due = max(due, t + 1)
            q = self.queues[ch]
            if q:
                due = max(due, q[-1][0] + 1)
            elif self.last_out[ch] is not None:
                due = max(due, self.last_out[ch][0] + 1)
            q.append((due, value))
        for ch, q in enumerate(self.queues):
            if q and q[0][0] == t:
                _, value = q.popleft()
                ident = out.send(ch, EventLabel(f"out{ch}", value))
                if self.last_out[ch] is not None:
                    out.depends(ident, self.last_out[ch][1])
                self.last_out[ch] = (t, ident)

    def quiescent(self) -> bool:
        return not any(self.queues)


class CancellableStore(BehaviorModel):
    """Key/value store acknowledging each write after a pipeline delay.

    Input ``write`` with payload ``[location, value]``. The acknowledgement
    ``ack<location>`` carries ``[value, write number]``. An acknowledgement
    overtaken by a later write to the same location before it is due is
    optional; with ``cancels=True`` such acknowledgements are not sent at all.
    """

    name = "cancellable_store"

    def __init__(self, locations: int = 2, pipeline: int = 2, cancels: bool = False, seed: int = 0):
        self.locations = locations
        self.pipeline = pipeline
        self.cancels = cancels
        super().__init__(seed)

    def reset(self) -> None:
        super().reset()
        self.pending = [deque() for _ in range(self.locations)]
        self.writes = 0
        self.store: dict[int, bytes] = {}

    def step(self, t, inputs, out: Outbox):
        for label in inputs:
            if label.name != "write":
                continue
            loc, value = label.payload[0] % self.locations, label.payload[1:]
            self.store[loc] = value
            self.pending[loc].append((t + self.pipeline, value, self.writes % 256))
            self.writes += 1
        for loc, q in enumerate(self.pending):
            while q and q[0][0] == t:
                _, value, n = q.popleft()
                overtaken = bool(q)
                if overtaken and self.cancels:
                    continue
                out.send(loc, EventLabel(f"ack{loc}", value + bytes([n])), opt=overtaken)

    def quiescent(self) -> bool:
        return not any(self.pending)


class UntimedEcho(BehaviorModel):
    """Echoes every ``msg`` as ``echo`` on port 0.

    The specification variant answers after ``delay`` ticks; with
    ``spread`` the delay is drawn from ``[1, spread]`` so answers may come
    back in any order.
    """

    name = "untimed_echo"

    def __init__(self, delay: int = 1, spread: int = 0, seed: int = 0):
        self.delay = delay
        self.spread = spread
        super().__init__(seed)

    def reset(self) -> None:
        super().reset()
        self.due: dict[int, bytes] = {}

    def step(self, t, inputs, out: Outbox):
        for label in inputs:
            if label.name != "msg":
                continue
            when = t + (self.rng.randint(1, self.spread) if self.spread else self.delay)
            while when in self.due:
                when += 1
            self.due[when] = label.payload
        if t in self.due:
            out.send(0, EventLabel("echo", self.due.pop(t)))

    def quiescent(self) -> bool:
        return not self.due


# -- configurations and stimuli --------------------------------------------

ECHO_SLACK = 64


def fifo_config(channels: int = 2, slack: int = 2) -> HarnessConfig:
    ports = PortAssignment({f"out{c}": c for c in range(channels)})
    policy = SlackPolicy(slack, slack)
    return HarnessConfig(AbstractionConfig(policy, ports), MonitorConfig(policy))


def store_config(locations: int = 2, pipeline: int = 2) -> HarnessConfig:
    ports = PortAssignment({f"ack{c}": c for c in range(locations)})
    policy = SlackPolicy(1, 1)
    return HarnessConfig(AbstractionConfig(policy, ports, dep_window=pipeline, optional_mode=True),
                         MonitorConfig(policy, dep_window=pipeline, optional_mode=True))


def echo_config() -> HarnessConfig:
    policy = SlackPolicy(ECHO_SLACK, ECHO_SLACK)
    ports = PortAssignment({"echo": 0})
    return HarnessConfig(AbstractionConfig(policy, ports), MonitorConfig(policy))


def fifo_stimuli(rng: random.Random, n: int, channels: int = 2) -> TimedWord:
    """``n`` pushes with distinct values, at most one per tick."""
    ticks = sorted(rng.sample(range(2 * n + 2), n))
    return TimedWord(tuple(
        TimedEvent(EventLabel("push", bytes([rng.randrange(channels), k])), t, k)
        for k, t in enumerate(ticks)))


def store_stimuli(rng: random.Random, n: int, locations: int = 2) -> TimedWord:
    ticks = sorted(rng.sample(range(2 * n + 2), n))
    return TimedWord(tuple(
        TimedEvent(EventLabel("write", bytes([rng.randrange(locations), rng.randrange(256)])), t, k)
        for k, t in enumerate(ticks)))


def echo_stimuli(rng: random.Random, n: int) -> TimedWord:
    ticks = sorted(rng.sample(range(2 * n + 2), n))
    return TimedWord(tuple(TimedEvent(EventLabel("msg", bytes([k])), t, k) for k, t in enumerate(ticks)))


@dataclass(frozen=True)
class ModelEntry:
    """A named model with its matching configuration and stimulus generator."""

    spec: Callable[..., BehaviorModel]
    impl: Callable[..., BehaviorModel]
    config: Callable[[], HarnessConfig]
    stimuli: Callable[[random.Random, int], TimedWord]


def builtin_models() -> dict[str, ModelEntry]:
    return {
        "fifo_buffer": ModelEntry(
            lambda seed=0: FifoBuffer(seed=seed),
            lambda seed=0: FifoBuffer(jitter=2, seed=seed),
            fifo_config, fifo_stimuli),
        "cancellable_store": ModelEntry(
            lambda seed=0: CancellableStore(seed=seed),
            lambda seed=0: CancellableStore(cancels=True, seed=seed),
            store_config, store_stimuli),
        "untimed_echo": ModelEntry(
            lambda seed=0: UntimedEcho(seed=seed),
            lambda seed=0: UntimedEcho(spread=8, seed=seed),
            echo_config, echo_stimuli),
    }
