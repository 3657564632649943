"""Trace files: one line per dispatched event.

    # e-dass-trace v1 scenario=<fingerprint> seed=<n> t_end=<s>
    12.000000 node:34 sensor-tick seq=5012 tick=active detect=radar ...

Detail values never contain spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

from .engine import TraceRecord

TRACE_HEADER = "# e-dass-trace v1"


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceLine:
    time: float
    actor: str
    kind: str
    seq: int
    details: Dict[str, str]


@dataclass(frozen=True)
class TraceHeader:
    fingerprint: str
    seed: int
    t_end: float


def format_line(rec: TraceRecord) -> str:
    parts = [f"{rec.time:.6f}", rec.actor, rec.kind, f"seq={rec.seq}"]
    for k, v in rec.details.items():
        v = str(v)
        if " " in v or not v:
            raise TraceFormatError(f"detail {k}={v!r} must be a non-empty token")
        parts.append(f"{k}={v}")
    return " ".join(parts)


def format_trace(records: Iterable[TraceRecord], scenario) -> str:
    head = f"{TRACE_HEADER} scenario={scenario.fingerprint()} seed={scenario.seed} t_end={scenario.t_end!r}"
    return "\n".join([head] + [format_line(r) for r in records]) + "\n"


def parse_line(text: str, lineno: int = 0) -> TraceLine:
    parts = text.split()
    if len(parts) < 4 or not parts[3].startswith("seq="):
        raise TraceFormatError(f"line {lineno}: malformed trace line")
    details = {}
    for tok in parts[4:]:
        k, sep, v = tok.partition("=")
        if not sep:
            raise TraceFormatError(f"line {lineno}: bad detail {tok!r}")
        details[k] = v
    try:
        return TraceLine(float(parts[0]), parts[1], parts[2], int(parts[3][4:]), details)
    except ValueError:
        raise TraceFormatError(f"line {lineno}: bad time or seq") from None


def parse_trace(text: str) -> Tuple[TraceHeader, List[TraceLine]]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(TRACE_HEADER):
        raise TraceFormatError("missing trace header")
    fields = dict(tok.split("=", 1) for tok in lines[0][len(TRACE_HEADER):].split())
    try:
        header = TraceHeader(fields["scenario"], int(fields["seed"]), float(fields["t_end"]))
    except (KeyError, ValueError):
        raise TraceFormatError("malformed trace header") from None
    return header, [parse_line(ln, i) for i, ln in enumerate(lines[1:], 2) if ln.strip()]


def records_to_lines(records: Iterable[TraceRecord]) -> List[TraceLine]:
    """In-memory records through the same text round trip the files use."""
    return [parse_line(format_line(r)) for r in records]
