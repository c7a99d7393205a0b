"""Seeded fault-injection campaigns over the built-in models."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .harness import FaultSpec, HarnessConfig, ReplayModel, co_execute, inject, record
from .models import builtin_models
from .monitor import FailureKind, Verdict
from .oracle import Instance, conforms


@dataclass(frozen=True)
class FaultRun:
    kind: str
    seed: int
    monitor_verdict: Verdict
    monitor_kind: FailureKind | None
    oracle_conforming: bool
    oracle_kind: FailureKind | None
    oracle_clause: str | None

    @property
    def agrees(self) -> bool:
        """Expected verdict class reached, and the failure kind is the oracle's."""
        expected = FaultSpec(self.kind).expected_verdict
        if self.monitor_verdict is not expected:
            return False
        if (expected is Verdict.TRUE) != self.oracle_conforming:
            return False
        if expected is Verdict.FALSE:
            if self.kind == "DropOutput" and self.monitor_kind is not FailureKind.MISSING:
                return False
            # a swapped pair can be blamed on either side; only the verdict is fixed
            if self.kind == "ReorderBeyondOrder":
                return True
            return self.monitor_kind is self.oracle_kind
        return True

    def line(self) -> str:
        return (f"{self.kind} seed={self.seed} monitor={self.monitor_verdict}"
                f"/{self.monitor_kind or '-'} oracle={'conforming' if self.oracle_conforming else 'violated'}"
                f"/{self.oracle_clause or '-'}")


@dataclass
class FaultTable:
    runs: list[FaultRun] = field(default_factory=list)

    def by_kind(self) -> dict[str, list[FaultRun]]:
        out: dict[str, list[FaultRun]] = {}
        for r in self.runs:
            out.setdefault(r.kind, []).append(r)
        return out

    def lines(self) -> list[str]:
        return [f"{kind} {sum(r.agrees for r in rs)}/{len(rs)}" for kind, rs in self.by_kind().items()]


def fault_run(model: str, kind: str, seed: int, events: tuple[int, int] = (3, 6)) -> FaultRun:
    """One harness run: record the specification model, corrupt it, replay it."""
    entry = builtin_models()[model]
    cfg: HarnessConfig = entry.config()
    rng = random.Random(seed)
    stimuli = entry.stimuli(rng, rng.randint(*events))
    spec = entry.spec(seed)
    word, _ = record(spec, stimuli)
    ports = cfg.abstraction.ports
    slack = cfg.abstraction.slack
    bad = inject(FaultSpec(kind, seed=seed), word, slack, ports)
    co = co_execute(spec, ReplayModel(bad, ports), stimuli, cfg)
    inst = Instance(co.spec_trace, co.impl_word, slack, cfg.monitor.optional_mode, cfg.monitor.dep_window)
    res = conforms(inst)
    cex = res.counterexample
    return FaultRun(kind, seed, co.verdict, co.failure.kind if co.failure else None,
                    res.conforming, cex.kind if cex else None, cex.clause if cex else None)


def fault_table(model: str = "fifo_buffer", runs: int = 100, seed: int = 0,
                kinds: tuple[str, ...] | None = None) -> FaultTable:
    from .harness import FAULT_KINDS

    table = FaultTable()
    for kind in kinds or FAULT_KINDS:
        for k in range(runs):
            table.runs.append(fault_run(model, kind, seed * 100_003 + k))
    return table
