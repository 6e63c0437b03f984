"""Core in-memory trace representation: events, intervals, per-thread timelines.

Timestamps are real-valued microseconds since an arbitrary trace epoch.
All structures are treated as immutable once built and are safe to share
across threads read-only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator

from .errors import NonNestedIntervals, UnclosedBegin, UnmatchedEnd


class Phase(enum.Enum):
    """Event phase; values mirror the Chromium ``ph`` codes."""

    BEGIN = "B"
    END = "E"
    COMPLETE = "X"


@dataclass(frozen=True)
class TraceEvent:
    """One raw timed record for a region on a (process, thread).

    ``duration_us`` is present exactly when ``phase`` is COMPLETE.
    """

    name: str
    phase: Phase
    timestamp_us: float
    pid: int
    tid: int
    category: str = ""
    duration_us: float | None = None
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.timestamp_us) or self.timestamp_us < 0:
            raise ValueError(f"timestamp_us must be finite and >= 0, got {self.timestamp_us}")
        if self.phase is Phase.COMPLETE:
            if self.duration_us is None:
                raise ValueError("Complete event requires duration_us")
            if not math.isfinite(self.duration_us) or self.duration_us < 0:
                raise ValueError(f"duration_us must be finite and >= 0, got {self.duration_us}")
        elif self.duration_us is not None:
            raise ValueError(f"{self.phase.name} event must not carry duration_us")


@dataclass(frozen=True)
class Interval:
    """One rendered timeline bar: a region occurrence with resolved extent."""

    name: str
    start_us: float
    end_us: float
    pid: int
    tid: int
    depth: int = 0
    category: str = ""
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.end_us < self.start_us:
            raise ValueError(f"interval {self.name!r} ends before it starts")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    @property
    def duration_us(self) -> float:
        return self.end_us - self.start_us


@dataclass
class ThreadTimeline:
    """All intervals of one (pid, tid), sorted by (start_us, -end_us)."""

    pid: int
    tid: int
    intervals: list[Interval] = field(default_factory=list)
    thread_name: str | None = None

    def at_depth(self, depth: int) -> list[Interval]:
        return [iv for iv in self.intervals if iv.depth == depth]


@dataclass
class TraceSession:
    """A whole trace: one timeline per (pid, tid) pair."""

    timelines: list[ThreadTimeline] = field(default_factory=list)
    epoch_note: str | None = None
    source: str | None = None

    def timeline(self, pid: int, tid: int) -> ThreadTimeline | None:
        for tl in self.timelines:
            if tl.pid == pid and tl.tid == tid:
                return tl
        return None

    def iter_intervals(self) -> Iterator[Interval]:
        for tl in self.timelines:
            yield from tl.intervals

    @property
    def interval_count(self) -> int:
        return sum(len(tl.intervals) for tl in self.timelines)

    def pids(self) -> list[int]:
        seen: list[int] = []
        for tl in self.timelines:
            if tl.pid not in seen:
                seen.append(tl.pid)
        return seen

    def filtered(self, pid: int) -> "TraceSession":
        """Sub-session containing only the timelines of one process."""
        return TraceSession(
            timelines=[tl for tl in self.timelines if tl.pid == pid],
            epoch_note=self.epoch_note,
            source=self.source,
        )


def overlap_us(a: Interval, b: Interval) -> float:
    """Length of the time overlap of two intervals; 0 when disjoint or touching."""
    return max(0.0, min(a.end_us, b.end_us) - max(a.start_us, b.start_us))


def build_intervals(
    events: list[TraceEvent],
    thread_names: dict[tuple[int, int], str] | None = None,
    source: str | None = None,
) -> TraceSession:
    """Pair and nest raw events into a TraceSession.

    Begin/End events pair per (pid, tid) by stack discipline with name
    equality; Complete events map directly.  Depths are computed from
    containment, where equal endpoints count as containment and ties are
    broken by the order regions were opened.  Partially overlapping
    intervals on one thread are rejected.
    """
    thread_names = thread_names or {}
    # (start, end, open_seq, name, category, attributes) per thread
    raw: dict[tuple[int, int], list[tuple]] = {}
    stacks: dict[tuple[int, int], list[tuple]] = {}
    order: list[tuple[int, int]] = []

    for seq, ev in enumerate(events):
        key = (ev.pid, ev.tid)
        if key not in raw:
            raw[key] = []
            stacks[key] = []
            order.append(key)
        if ev.phase is Phase.COMPLETE:
            raw[key].append((
                ev.timestamp_us, ev.timestamp_us + ev.duration_us,
                seq, ev.name, ev.category, ev.attributes,
            ))
        elif ev.phase is Phase.BEGIN:
            stacks[key].append((ev.name, ev.timestamp_us, seq, ev.category, ev.attributes))
        else:
            stack = stacks[key]
            if not stack:
                raise UnmatchedEnd(ev.name, ev.pid, ev.tid, ev.timestamp_us)
            top_name, top_ts, top_seq, top_cat, top_attrs = stack[-1]
            if top_name != ev.name:
                raise UnmatchedEnd(ev.name, ev.pid, ev.tid, ev.timestamp_us,
                                   expected=top_name)
            if ev.timestamp_us < top_ts:
                raise ValueError(
                    f"end of {ev.name!r} at {ev.timestamp_us}us precedes its begin at {top_ts}us"
                )
            stack.pop()
            attrs = {**top_attrs, **ev.attributes} if (top_attrs or ev.attributes) else {}
            raw[key].append((top_ts, ev.timestamp_us, top_seq, ev.name, top_cat, attrs))

    still_open = [
        (name, key[0], key[1])
        for key in order
        for (name, _ts, _seq, _cat, _attrs) in stacks[key]
    ]
    if still_open:
        raise UnclosedBegin(still_open)

    timelines = []
    for key in order:
        pid, tid = key
        entries = sorted(raw[key], key=lambda e: (e[0], -e[1], e[2]))
        intervals: list[Interval] = []
        open_ends: list[tuple[float, int]] = []  # (end_us, index into intervals)
        for start, end, _seq, name, cat, attrs in entries:
            while open_ends:
                top_end, top_idx = open_ends[-1]
                if top_end >= end:
                    break  # contained (equal endpoints count)
                if top_end <= start:
                    open_ends.pop()
                    continue
                top = intervals[top_idx]
                raise NonNestedIntervals(
                    pid, tid,
                    (top.name, top.start_us, top.end_us),
                    (name, start, end),
                )
            depth = len(open_ends)
            intervals.append(Interval(name, start, end, pid, tid, depth, cat, attrs))
            open_ends.append((end, len(intervals) - 1))
        timelines.append(ThreadTimeline(pid, tid, intervals, thread_names.get(key)))

    return TraceSession(timelines=timelines, source=source)
