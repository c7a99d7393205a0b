"""Line-oriented trace and configuration files.

Trace records look like::

    EVT id=3 side=S t=4 label=d port=3 payload=0aff opt=1 deps=0,1

Field order is fixed, so parsing and serialising are exact inverses;
comment and blank lines are kept verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .abstraction import AbstractionConfig, AbstractionError, SlackPolicy
from .monitor import MonitorConfig
from .traces import ConcurrentAlphabet, EventLabel, PortAssignment, TimedEvent, TimedWord


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


_EVT = re.compile(
    r"EVT id=(0|[1-9]\d*) side=([SI]) t=(0|[1-9]\d*) label=([A-Za-z_][A-Za-z0-9_.\-]*)"
    r" port=(0|[1-9]\d*)(?: payload=((?:[0-9a-f]{2})+))?( opt=1)?(?: deps=((?:0|[1-9]\d*)(?:,(?:0|[1-9]\d*))*))?")


@dataclass(frozen=True)
class TraceRecord:
    id: int
    side: str
    t: int
    label: str
    port: int
    payload: bytes = b""
    opt: bool = False
    deps: tuple[int, ...] = ()

    @property
    def event_label(self) -> EventLabel:
        return EventLabel(self.label, self.payload)

    def line(self) -> str:
        parts = [f"EVT id={self.id} side={self.side} t={self.t} label={self.label} port={self.port}"]
        if self.payload:
            parts.append(f"payload={self.payload.hex()}")
        if self.opt:
            parts.append("opt=1")
        if self.deps:
            parts.append("deps=" + ",".join(map(str, self.deps)))
        return " ".join(parts)


def parse_record(text: str, lineno: int = 1) -> TraceRecord:
    m = _EVT.fullmatch(text)
    if m is None:
        raise ParseError(lineno, f"malformed record: {text!r}")
    ident, side, t, label, port, payload, opt, deps = m.groups()
    rec = TraceRecord(int(ident), side, int(t), label, int(port),
                      bytes.fromhex(payload) if payload else b"", bool(opt),
                      tuple(int(d) for d in deps.split(",")) if deps else ())
    if side == "I" and (rec.opt or rec.deps):
        raise ParseError(lineno, "implementation records carry no opt or deps")
    return rec


@dataclass
class TraceFile:
    """Parsed trace file; ``lines`` holds records and verbatim comment lines."""

    lines: list[TraceRecord | str] = field(default_factory=list)
    final_newline: bool = True

    @property
    def records(self) -> list[TraceRecord]:
        return [r for r in self.lines if isinstance(r, TraceRecord)]

    def numbered(self) -> list[tuple[int, TraceRecord]]:
        return [(n, r) for n, r in enumerate(self.lines, 1) if isinstance(r, TraceRecord)]

    @classmethod
    def parse(cls, text: str, validate: bool = True) -> "TraceFile":
        final_newline = text.endswith("\n")
        raw = text.split("\n")
        if final_newline:
            raw.pop()
        lines: list[TraceRecord | str] = []
        for n, line in enumerate(raw, 1):
            if line.strip() == "" or line.startswith("#"):
                lines.append(line)
            else:
                lines.append(parse_record(line, n))
        tf = cls(lines, final_newline)
        if validate:
            tf.validate()
        return tf

    def serialize(self) -> str:
        body = "\n".join(r.line() if isinstance(r, TraceRecord) else r for r in self.lines)
        return body + "\n" if self.final_newline and self.lines else body

    def validate(self) -> None:
        seen: dict[str, set[int]] = {"S": set(), "I": set()}
        last_t = 0
        for n, r in self.numbered():
            if r.t < last_t:
                raise ParseError(n, f"record at t={r.t} after t={last_t}")
            last_t = r.t
            if r.id in seen[r.side]:
                raise ParseError(n, f"duplicate {r.side} id {r.id}")
            for d in r.deps:
                if d not in seen["S"]:
                    raise ParseError(n, f"dependency on unknown or later specification id {d}")
            seen[r.side].add(r.id)

    def word(self, side: str) -> TimedWord:
        return TimedWord(tuple(TimedEvent(r.event_label, r.t, r.id) for r in self.records if r.side == side))

    @classmethod
    def from_records(cls, records, comments: tuple[str, ...] = ()) -> "TraceFile":
        return cls([*comments, *records])


@dataclass
class Config:
    default_minus: int
    default_plus: int
    dt_minus: dict[str, int] = field(default_factory=dict)
    dt_plus: dict[str, int] = field(default_factory=dict)
    bound_minus: int | None = None
    bound_plus: int | None = None
    dep_window: int | None = None
    mode: str = "plain"
    independent: list[tuple[str, str]] = field(default_factory=list)
    ports: dict[str, int] = field(default_factory=dict)
    term: str = "explicit"
    stabilization_window: int | None = None
    source: str = ""

    @property
    def optional_mode(self) -> bool:
        return self.mode == "optional"

    def slack(self) -> SlackPolicy:
        return SlackPolicy(self.default_minus, self.default_plus, self.dt_minus, self.dt_plus,
                           self.bound_minus, self.bound_plus)

    def port_assignment(self) -> PortAssignment | None:
        return PortAssignment(self.ports) if self.ports else None

    def alphabet(self, extra=()) -> ConcurrentAlphabet:
        symbols = {*self.ports, *self.dt_minus, *self.dt_plus, *extra}
        for a, b in self.independent:
            symbols.update((a, b))
        return ConcurrentAlphabet.of(sorted(symbols), self.independent)

    def abstraction_config(self) -> AbstractionConfig:
        return AbstractionConfig(self.slack(), self.port_assignment(), None, self.dep_window, self.optional_mode)

    def monitor_config(self) -> MonitorConfig:
        return MonitorConfig(self.slack(), self.dep_window, self.optional_mode, self.term,
                             self.stabilization_window)

    def serialize(self) -> str:
        return self.source

    @classmethod
    def parse(cls, text: str) -> "Config":
        values: dict[str, object] = {"dt_minus": {}, "dt_plus": {}, "independent": [], "ports": {}}
        seen: set[str] = set()

        def uint(n: int, key: str, v: str) -> int:
            if not re.fullmatch(r"0|[1-9]\d*", v):
                raise ParseError(n, f"{key} needs a non-negative integer, got {v!r}")
            return int(v)

        lines = text.splitlines()
        for n, line in enumerate(lines, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            key, sep, v = s.partition("=")
            if not sep:
                raise ParseError(n, f"expected key=value, got {s!r}")
            key, v = key.strip(), v.strip()
            if key in seen and key != "independent":
                raise ParseError(n, f"duplicate key {key}")
            seen.add(key)
            head, _, rest = key.partition(".")
            if head in ("dtminus", "dtplus") and rest:
                target = "dt_minus" if head == "dtminus" else "dt_plus"
                if rest == "default":
                    values["default_" + target[3:]] = uint(n, key, v)
                else:
                    values[target][rest] = uint(n, key, v)
            elif key in ("bound.minus", "bound.plus"):
                values["bound_" + rest] = uint(n, key, v)
            elif key == "ddep":
                values["dep_window"] = uint(n, key, v)
            elif key == "mode":
                if v not in ("plain", "optional"):
                    raise ParseError(n, f"mode must be plain or optional, got {v!r}")
                values["mode"] = v
            elif key == "independent":
                a, sep2, b = v.partition(":")
                if not sep2 or not a or not b or a == b:
                    raise ParseError(n, f"independent needs two distinct labels a:b, got {v!r}")
                values["independent"].append((a, b))
            elif head == "ports" and rest:
                values["ports"][rest] = uint(n, key, v)
            elif key == "term":
                if v not in ("explicit", "convergent"):
                    raise ParseError(n, f"term must be explicit or convergent, got {v!r}")
                values["term"] = v
            elif key == "stabilization.window":
                values["stabilization_window"] = uint(n, key, v)
            else:
                raise ParseError(n, f"unknown key {key}")
        end = len(lines) + 1
        for key in ("default_minus", "default_plus"):
            if key not in values:
                raise ParseError(end, f"missing dt{key[8:]}.default")
        cfg = cls(**values, source=text)
        try:
            cfg.slack()
            cfg.monitor_config()
        except (AbstractionError, ValueError) as exc:
            raise ParseError(end, str(exc)) from None
        return cfg
