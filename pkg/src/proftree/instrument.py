"""Scoped-region annotation with runtime-toggleable categories.

Regions are recorded into per-thread append-only buffers and merged only at
flush, so the measurement layer cannot itself create the lock contention the
analyzers look for.  Category enablement is sampled when a region opens;
disabled regions cost almost nothing and never produce events.  The
``PROFTREE_CATEGORIES`` environment variable (comma-separated) seeds the
enabled set; an empty set records nothing.
"""

from __future__ import annotations

import os
import threading
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, TypeVar

from .errors import EndOnWrongThread, NonLifoEnd
from .trace_model import Phase, TraceEvent, TraceSession, build_intervals

ENV_CATEGORIES = "PROFTREE_CATEGORIES"

T = TypeVar("T")


def categories_from_env(environ: dict | None = None) -> frozenset[str]:
    env = os.environ if environ is None else environ
    raw = env.get(ENV_CATEGORIES, "")
    return frozenset(part.strip() for part in raw.split(",") if part.strip())


def _default_clock() -> float:
    return time.perf_counter_ns() / 1000.0


@dataclass
class RegionConfig:
    enabled_categories: frozenset[str] = field(default_factory=categories_from_env)
    clock: Callable[[], float] = _default_clock
    buffer_capacity_hint: int = 4096


class RegionHandle:
    """Begin/end pairing token, bound to the thread that opened the region."""

    __slots__ = ("name", "category", "open_timestamp_us", "tid")

    def __init__(self, name: str, category: str, open_timestamp_us: float, tid: int):
        self.name = name
        self.category = category
        self.open_timestamp_us = open_timestamp_us
        self.tid = tid


# Shared sentinel returned when the region's category is disabled; ending it
# is a no-op and it never participates in LIFO checking.
DISABLED_REGION = RegionHandle("", "", 0.0, -1)


class UnclosedRegionWarning(UserWarning):
    """Regions were still open when flush() drained the buffers."""


class _ThreadState:
    __slots__ = ("tid", "buffer", "stack")

    def __init__(self, tid: int):
        self.tid = tid
        self.buffer: list[TraceEvent] = []
        self.stack: list[RegionHandle] = []


class Recorder:
    """Collects scoped-region events; flush() yields a TraceSession.

    begin/end are safe from any number of threads concurrently; flush
    requires quiescence (no regions being opened or closed) and is a
    stop-the-world point.
    """

    def __init__(self, config: RegionConfig | None = None):
        self._config = config if config is not None else RegionConfig()
        self._pid = os.getpid()
        self._lock = threading.Lock()
        self._states: dict[int, _ThreadState] = {}
        self._thread_names: dict[int, str] = {}
        self._local = threading.local()
        self._epoch_note = f"epoch {datetime.now(timezone.utc).isoformat()}"

    @property
    def config(self) -> RegionConfig:
        return self._config

    def _state(self) -> _ThreadState:
        state = getattr(self._local, "state", None)
        if state is None:
            state = _ThreadState(threading.get_native_id())
            with self._lock:
                self._states[state.tid] = state
            self._local.state = state
        return state

    def set_enabled_categories(self, categories) -> None:
        """Takes effect for regions opened afterwards."""
        self._config.enabled_categories = frozenset(categories)

    def set_thread_name(self, name: str) -> None:
        state = self._state()
        with self._lock:
            self._thread_names[state.tid] = name

    def begin_region(self, name: str, category: str = "") -> RegionHandle:
        if not name:
            raise ValueError("region name must be nonempty")
        if category not in self._config.enabled_categories:
            return DISABLED_REGION
        state = self._state()
        handle = RegionHandle(name, category, self._config.clock(), state.tid)
        state.stack.append(handle)
        return handle

    def end_region(self, handle: RegionHandle) -> None:
        if handle is DISABLED_REGION:
            return
        now = self._config.clock()
        state = self._state()
        if handle.tid != state.tid:
            raise EndOnWrongThread(handle.name, handle.tid, state.tid)
        if not state.stack or state.stack[-1] is not handle:
            expected = state.stack[-1].name if state.stack else None
            raise NonLifoEnd(handle.name, expected)
        state.stack.pop()
        state.buffer.append(TraceEvent(
            name=handle.name,
            phase=Phase.COMPLETE,
            timestamp_us=handle.open_timestamp_us,
            pid=self._pid,
            tid=state.tid,
            category=handle.category,
            duration_us=max(0.0, now - handle.open_timestamp_us),
        ))

    def scoped_region(self, name: str, category: str, body: Callable[[], T]) -> T:
        """Run ``body`` inside a region; the region closes even on failure."""
        handle = self.begin_region(name, category)
        try:
            return body()
        finally:
            self.end_region(handle)

    @contextmanager
    def region(self, name: str, category: str = ""):
        handle = self.begin_region(name, category)
        try:
            yield
        finally:
            self.end_region(handle)

    def flush(self) -> TraceSession:
        """Drain all per-thread buffers into one session and clear them.

        Open regions are force-closed at the flush timestamp and reported
        with an UnclosedRegionWarning.
        """
        now = self._config.clock()
        with self._lock:
            unclosed: list[tuple[str, int, int]] = []
            for state in self._states.values():
                while state.stack:
                    handle = state.stack.pop()
                    unclosed.append((handle.name, self._pid, state.tid))
                    state.buffer.append(TraceEvent(
                        name=handle.name,
                        phase=Phase.COMPLETE,
                        timestamp_us=handle.open_timestamp_us,
                        pid=self._pid,
                        tid=state.tid,
                        category=handle.category,
                        duration_us=max(0.0, now - handle.open_timestamp_us),
                    ))
            events: list[TraceEvent] = []
            names: dict[tuple[int, int], str] = {}
            for tid, state in self._states.items():
                events.extend(state.buffer)
                state.buffer.clear()
                if tid in self._thread_names:
                    names[(self._pid, tid)] = self._thread_names[tid]
        if unclosed:
            warnings.warn(UnclosedRegionWarning(
                "regions still open at flush: "
                + ", ".join(f"{n!r} (tid={t})" for n, _p, t in unclosed)
            ))
        session = build_intervals(events, thread_names=names)
        session.epoch_note = self._epoch_note
        return session


_default_recorder: Recorder | None = None
_default_recorder_lock = threading.Lock()


def default_recorder() -> Recorder:
    global _default_recorder
    if _default_recorder is None:
        with _default_recorder_lock:
            if _default_recorder is None:
                _default_recorder = Recorder()
    return _default_recorder


def begin_region(name: str, category: str = "") -> RegionHandle:
    return default_recorder().begin_region(name, category)


def end_region(handle: RegionHandle) -> None:
    default_recorder().end_region(handle)


def scoped_region(name: str, category: str, body: Callable[[], T]) -> T:
    return default_recorder().scoped_region(name, category, body)


def set_enabled_categories(categories) -> None:
    default_recorder().set_enabled_categories(categories)


def flush() -> TraceSession:
    return default_recorder().flush()
