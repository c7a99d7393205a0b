"""Command-line entry point.

Exit codes: 0 verdict true, 1 false (or an oracle disagreement),
2 inconclusive, 3 parse or usage error.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import Callable, Iterable, TextIO

from .abstraction import AbstractionError, IncrementalAbstraction
from .fileformat import Config, ParseError, TraceFile, TraceRecord, parse_record
from .fuzz import FuzzCaps, run_fuzz
from .harness import FAULT_KINDS, FaultSpec, HarnessError, ReplayModel, co_execute, inject, record
from .models import builtin_models
from .monitor import Monitor, MonitorError, Verdict, VerdictRecord
from .oracle import Instance, OracleCapError, compare_with_monitor, conforms
from .traces import TimedEvent, TimedWord, TraceError

EXIT = {Verdict.TRUE: 0, Verdict.FALSE: 1, Verdict.INCONCLUSIVE: 2}
USAGE_ERROR = 3


class UsageError(Exception):
    pass


class StreamDriver:
    """Feeds interleaved trace records to the abstraction and the monitor.

    Records must come in nondecreasing ``t``; a slot is handed to the monitor
    once a later record (or the end of input) shows it is complete.
    """

    def __init__(self, cfg: Config, emit: Callable[[str], None]):
        self.cfg = cfg
        self.emit = emit
        self.absn = IncrementalAbstraction(cfg.abstraction_config())
        self.monitor = Monitor(cfg.monitor_config(), listener=lambda r: emit(r.line()))
        self.slot: int | None = None
        self.spec: list = []
        self.impl: list[TimedEvent] = []
        self.impl_ids: set[int] = set()
        self.impl_ticks: list[int] = []

    def feed(self, rec: TraceRecord, lineno: int) -> None:
        if self.monitor.done:
            return
        if self.slot is not None and rec.t < self.slot:
            raise ParseError(lineno, f"record at t={rec.t} after t={self.slot}")
        if self.slot is not None and rec.t > self.slot:
            self._flush()
            if self.monitor.done:
                return
        self.slot = rec.t
        if rec.side == "S":
            try:
                self.spec.append(self.absn.add(rec.id, rec.event_label, rec.t, rec.deps, rec.opt, rec.port))
            except AbstractionError as exc:
                raise ParseError(lineno, str(exc)) from None
        else:
            if rec.id in self.impl_ids:
                raise ParseError(lineno, f"duplicate I id {rec.id}")
            self.impl_ids.add(rec.id)
            self.impl_ticks.append(rec.t)
            self.impl.append(TimedEvent(rec.event_label, rec.t, rec.id))

    def _flush(self) -> None:
        if self.slot is None:
            return
        self.monitor.step(self.slot, self.spec, self.impl)
        self.spec, self.impl = [], []

    def finish(self, until: int | None = None) -> Verdict:
        """End of input: settle the verdict, or stop at ``until`` without closing."""
        self._flush()
        mon = self.monitor
        if mon.done:
            return mon.verdict
        if until is not None:
            mon.advance(max(until, mon.clock or 0))
            if not mon.done:
                self.emit(VerdictRecord(mon.verdict, mon.clock).line())
            return mon.verdict
        if self.cfg.term == "convergent":
            # no input markers in a trace file: the last output anchors the window
            last = max(self.impl_ticks, default=0)
            mon.set_stabilization_time(last + self.cfg.stabilization_window)
        mon.finish()
        return mon.verdict


def run_records(records: Iterable[tuple[int, TraceRecord]], cfg: Config, out: TextIO,
                until: int | None = None) -> Verdict:
    def emit(line: str) -> None:
        out.write(line + "\n")
        out.flush()

    driver = StreamDriver(cfg, emit)
    for lineno, rec in records:
        if until is not None and rec.t > until:
            break
        driver.feed(rec, lineno)
        if driver.monitor.done:
            break
    return driver.finish(until)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def load_config(path: str | None) -> Config:
    if path is None:
        return Config.parse("dtminus.default=0\ndtplus.default=0\n")
    try:
        return Config.parse(_read(path))
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def load_trace(path: str, side: str | None = None) -> TraceFile:
    try:
        tf = TraceFile.parse(_read(path))
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if side is not None:
        for n, r in tf.numbered():
            if r.side != side:
                raise UsageError(f"{path}: line {n}: expected side={side}")
    return tf


def merged(spec: TraceFile, impl: TraceFile | None) -> list[tuple[int, TraceRecord]]:
    """One stream ordered by ``t``; at equal ``t`` specification lines come first."""
    items = [(r.t, 0, n, r) for n, r in spec.numbered()]
    if impl is not None:
        items += [(r.t, 1, n, r) for n, r in impl.numbered()]
    items.sort(key=lambda it: it[:3])
    return [(n, r) for _, _, n, r in items]


def instance_of(spec: TraceFile, impl: TraceFile | None, cfg: Config) -> Instance:
    absn = IncrementalAbstraction(cfg.abstraction_config())
    for n, r in spec.numbered():
        if r.side == "S":
            try:
                absn.add(r.id, r.event_label, r.t, r.deps, r.opt, r.port)
            except AbstractionError as exc:
                raise UsageError(f"line {n}: {exc}") from None
    words = [tf.word("I") for tf in (spec, impl) if tf is not None]
    impl_events = sorted((e for w in words for e in w), key=lambda e: e.tick)
    return Instance(absn.trace(), TimedWord(tuple(impl_events)), cfg.slack(),
                    cfg.optional_mode, cfg.dep_window)


# -- commands ---------------------------------------------------------------

def cmd_check(args, out: TextIO) -> int:
    cfg = load_config(args.config)
    spec = load_trace(args.spec)
    impl = load_trace(args.impl, "I") if args.impl else None
    try:
        verdict = run_records(merged(spec, impl), cfg, out, args.until)
    except ParseError as exc:
        raise UsageError(str(exc)) from None
    return EXIT[verdict]


def cmd_monitor(args, out: TextIO, stdin: TextIO) -> int:
    cfg = load_config(args.config)

    def records():
        for n, line in enumerate(stdin, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield n, parse_record(line, n)

    try:
        verdict = run_records(records(), cfg, out)
    except ParseError as exc:
        raise UsageError(str(exc)) from None
    return EXIT[verdict]


def _trace_file(word, ports, side: str, co=None) -> TraceFile:
    records = []
    for e in word:
        deps, opt = (), False
        if co is not None:
            v = co.spec_trace[e.seq]
            deps = tuple(sorted(a for a, b in co.deps.edges if b == e.seq))
            opt = v.optional
        records.append(TraceRecord(e.seq, side, e.tick, e.label.name, ports[e.seq],
                                   e.label.payload, opt, deps))
    return TraceFile.from_records(records)


def cmd_simulate(args, out: TextIO) -> int:
    models = builtin_models()
    if args.model not in models:
        raise UsageError(f"unknown model {args.model!r}; known: {', '.join(sorted(models))}")
    entry = models[args.model]
    hcfg = entry.config()
    rng = random.Random(args.seed)
    stimuli = entry.stimuli(rng, args.events)
    spec = entry.spec(args.seed)
    if args.fault:
        word, _ = record(spec, stimuli)
        try:
            word = inject(FaultSpec(args.fault, seed=args.seed), word, hcfg.abstraction.slack,
                          hcfg.abstraction.ports)
        except HarnessError as exc:
            raise UsageError(str(exc)) from None
        impl = ReplayModel(word, hcfg.abstraction.ports)
    else:
        impl = entry.impl(args.seed)
    lines: list[str] = []
    co = co_execute(spec, impl, stimuli, hcfg, listener=lambda r: lines.append(r.line()))
    impl_ports = {e.seq: hcfg.abstraction.ports(e.label) for e in co.impl_word}
    spec_tf = _trace_file(co.spec_word, co.spec_ports, "S", co)
    impl_tf = _trace_file(co.impl_word, impl_ports, "I")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "spec.trace").write_text(spec_tf.serialize(), encoding="utf-8")
        (outdir / "impl.trace").write_text(impl_tf.serialize(), encoding="utf-8")
        (outdir / "report.txt").write_text("".join(x + "\n" for x in lines), encoding="utf-8")
    else:
        out.write("# specification\n" + spec_tf.serialize())
        out.write("# implementation\n" + impl_tf.serialize())
    for line in lines:
        out.write(line + "\n")
    return EXIT[co.verdict]


def cmd_oracle(args, out: TextIO) -> int:
    cfg = load_config(args.config)
    spec = load_trace(args.spec)
    impl = load_trace(args.impl, "I") if args.impl else None
    inst = instance_of(spec, impl, cfg)
    try:
        if args.compare:
            cmp = compare_with_monitor(inst, cfg.monitor_config(), args.cap)
            result = cmp.oracle
        else:
            result = conforms(inst, args.cap)
    except OracleCapError as exc:
        raise UsageError(str(exc)) from None
    if result.conforming:
        final = max(result.witnesses) if result.witnesses else 0
        for s, i in sorted(result.witnesses.get(final, ()).pairs if result.witnesses else ()):
            out.write(f"WITNESS s={s} i={i}\n")
        out.write(f"ORACLE conforming t={final}\n")
    else:
        cex = result.counterexample
        ident = "-" if cex.id is None else cex.id
        out.write(f"ORACLE violated t={cex.time} clause={cex.clause} id={ident} kind={cex.kind}\n")
    if args.compare:
        if not cmp.agree:
            out.write("DISAGREE monitor=" + str(cmp.monitor_verdict) + "\n")
            for line in cmp.log:
                out.write(line + "\n")
            return 1
        out.write(f"AGREE monitor={cmp.monitor_verdict}\n")
        return 0
    return 0 if result.conforming else 1


def cmd_fuzz(args, out: TextIO) -> int:
    caps = FuzzCaps(args.max_spec, args.max_impl, args.max_tick)
    if max(caps.max_spec, caps.max_impl) > args.cap:
        raise UsageError(f"caps exceed the oracle search cap {args.cap}")
    summary = run_fuzz(args.seed, args.count, caps, args.modes)
    for line in summary.lines():
        out.write(line + "\n")
    for k, cmp in summary.disagreements[:5]:
        out.write(f"# disagreement at instance {k}\n")
        for line in cmp.log:
            out.write("# " + line + "\n")
    return 0 if summary.agree == summary.count else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="timedconf", description="Timed partial-order conformance monitor")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="replay a specification and an implementation trace")
    c.add_argument("spec")
    c.add_argument("impl", nargs="?")
    c.add_argument("-c", "--config")
    c.add_argument("--until", type=int, help="stop at this tick without closing the streams")

    m = sub.add_parser("monitor", help="monitor an interleaved record stream from standard input")
    m.add_argument("-c", "--config")

    s = sub.add_parser("simulate", help="co-execute a built-in model pair")
    s.add_argument("model")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--events", type=int, default=5)
    s.add_argument("--fault", choices=FAULT_KINDS)
    s.add_argument("--out", help="directory for spec.trace, impl.trace and report.txt")

    o = sub.add_parser("oracle", help="brute-force conformance decision")
    o.add_argument("spec")
    o.add_argument("impl", nargs="?")
    o.add_argument("-c", "--config")
    o.add_argument("--compare", action="store_true")
    o.add_argument("--cap", type=int, default=12)

    f = sub.add_parser("fuzz", help="random monitor/oracle agreement run")
    f.add_argument("--seed", type=int, default=1)
    f.add_argument("--count", type=int, default=1000)
    f.add_argument("--max-spec", type=int, default=6)
    f.add_argument("--max-impl", type=int, default=6)
    f.add_argument("--max-tick", type=int, default=16)
    f.add_argument("--modes", choices=("both", "plain", "optional"), default="both")
    f.add_argument("--cap", type=int, default=12)
    return p


def main(argv: list[str] | None = None, out: TextIO | None = None, stdin: TextIO | None = None) -> int:
    out = out or sys.stdout
    stdin = stdin or sys.stdin
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        if args.command == "check":
            return cmd_check(args, out)
        if args.command == "monitor":
            return cmd_monitor(args, out, stdin)
        if args.command == "simulate":
            return cmd_simulate(args, out)
        if args.command == "oracle":
            return cmd_oracle(args, out)
        return cmd_fuzz(args, out)
    except (UsageError, TraceError, MonitorError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
