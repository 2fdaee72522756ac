"""Runtime trace model: events, canonicalization, matching, match rate.

A trace is what the instrumented page observed while one payload ran:
alert/console/network/error events plus a completion status.  Two payloads
behave the same iff their statuses agree and their canonicalized event
multisets are equal; the canonical sort makes comparison order-insensitive
because async browser timing reorders events across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from urllib.parse import urldefrag, urljoin

STATUSES = ("completed", "timeout", "crashed")
EVENT_KINDS = ("alert", "console", "network", "error")

_FIELDS_BY_KIND = {
    "alert": ("message",),
    "console": ("level", "message"),
    "network": ("method", "url"),
    "error": ("message",),
}

DEFAULT_ORIGIN = "http://harness.local"

HARNESS_NOISE_PREFIX = "__harness__"


class TraceFormatError(ValueError):
    """Raised for trace JSON that does not fit the schema."""


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    message: str | None = None
    level: str | None = None
    method: str | None = None
    url: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in _FIELDS_BY_KIND:
            raise ValueError(f"unknown event kind: {self.kind!r}")
        wanted = _FIELDS_BY_KIND[self.kind]
        for name in ("message", "level", "method", "url"):
            value = getattr(self, name)
            if (name in wanted) != (value is not None):
                raise ValueError(f"{self.kind} event must populate exactly {wanted}")

    def fields(self) -> tuple[str, ...]:
        return tuple(getattr(self, name) for name in _FIELDS_BY_KIND[self.kind])


def alert(message: str) -> TraceEvent:
    return TraceEvent("alert", message=message)


def console(level: str, message: str) -> TraceEvent:
    return TraceEvent("console", level=level, message=message)


def network(method: str, url: str) -> TraceEvent:
    return TraceEvent("network", method=method, url=url)


def error(message: str) -> TraceEvent:
    return TraceEvent("error", message=message)


@dataclass(frozen=True)
class RuntimeTrace:
    status: str
    events: tuple[TraceEvent, ...] = ()
    duration_ms: int = 0

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status: {self.status!r}")
        if self.duration_ms < 0:
            raise ValueError("duration_ms must be non-negative")
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class CanonicalTrace:
    status: str
    events: tuple[tuple[str, ...], ...]


def _squash(text: str) -> str:
    return " ".join(text.split())


def canonicalize(trace: RuntimeTrace, origin: str = DEFAULT_ORIGIN) -> CanonicalTrace:
    """Drop duration, squash message whitespace, resolve network URLs against
    the origin minus fragment, drop harness self-noise console lines, and
    sort events by (kind, fields).  Idempotent."""
    rows: list[tuple[str, ...]] = []
    for ev in trace.events:
        if ev.kind == "console" and ev.message is not None and ev.message.startswith(
            HARNESS_NOISE_PREFIX
        ):
            continue
        if ev.kind == "network":
            resolved = urldefrag(urljoin(origin, ev.url or "")).url
            rows.append(("network", ev.method or "", resolved))
        elif ev.kind == "console":
            rows.append(("console", _squash(ev.level or ""), _squash(ev.message or "")))
        else:
            rows.append((ev.kind, _squash(ev.message or "")))
    rows.sort()
    return CanonicalTrace(status=trace.status, events=tuple(rows))


def traces_match(a: RuntimeTrace, b: RuntimeTrace, origin: str = DEFAULT_ORIGIN) -> bool:
    """True iff statuses agree and canonical event lists are equal."""
    if a.status != b.status:
        return False
    return canonicalize(a, origin).events == canonicalize(b, origin).events


@dataclass(frozen=True)
class MatchReport:
    n_generated: int
    n_matched: int
    rate: Fraction = field(compare=True)

    def __post_init__(self) -> None:
        if self.n_matched > self.n_generated:
            raise ValueError("n_matched cannot exceed n_generated")


def match_rate(outcomes: list[bool]) -> MatchReport:
    """rate = matched / generated, kept exact; undefined on empty input."""
    if not outcomes:
        raise ValueError("empty evaluation set")
    matched = sum(1 for o in outcomes if o)
    return MatchReport(
        n_generated=len(outcomes),
        n_matched=matched,
        rate=Fraction(matched, len(outcomes)),
    )


def relative_improvement(r1: MatchReport, r2: MatchReport) -> Fraction:
    """(r2 - r1) / r1 over the exact rates."""
    if r1.rate == 0:
        raise ValueError("relative improvement undefined for a zero baseline")
    return (r2.rate - r1.rate) / r1.rate


def format_rate(rate: Fraction, decimals: int) -> str:
    return f"{float(rate):.{decimals}f}"


def format_percent(x: Fraction, decimals: int = 1) -> str:
    return f"{float(x) * 100:.{decimals}f}%"


def _expect_str(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise TraceFormatError(f"{where}: field {key!r} must be a string")
    return value


def trace_from_json(text: str) -> RuntimeTrace:
    """Parse and validate a trace JSON document."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"trace is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise TraceFormatError("trace must be a JSON object")
    status = obj.get("status")
    if status not in STATUSES:
        raise TraceFormatError(f"bad status: {status!r}")
    duration = obj.get("duration_ms")
    if not isinstance(duration, int) or isinstance(duration, bool) or duration < 0:
        raise TraceFormatError(f"bad duration_ms: {duration!r}")
    raw_events = obj.get("events")
    if not isinstance(raw_events, list):
        raise TraceFormatError("events must be a list")
    events = []
    for i, raw in enumerate(raw_events):
        where = f"events[{i}]"
        if not isinstance(raw, dict):
            raise TraceFormatError(f"{where}: must be an object")
        kind = raw.get("kind")
        if kind not in _FIELDS_BY_KIND:
            raise TraceFormatError(f"{where}: unknown kind {kind!r}")
        fields = {name: _expect_str(raw, name, where) for name in _FIELDS_BY_KIND[kind]}
        events.append(TraceEvent(kind, **fields))
    return RuntimeTrace(status=status, events=tuple(events), duration_ms=duration)


def trace_to_json(trace: RuntimeTrace) -> str:
    """Serialize bit-exactly: fixed key order, compact separators, raw UTF-8."""
    events = []
    for ev in trace.events:
        row: dict[str, str] = {"kind": ev.kind}
        for name in _FIELDS_BY_KIND[ev.kind]:
            row[name] = getattr(ev, name)
        events.append(row)
    obj = {"status": trace.status, "duration_ms": trace.duration_ms, "events": events}
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)
