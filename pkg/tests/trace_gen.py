"""Random trace/profile generators shared by the test modules.

Timestamps are integer-valued microseconds so round trips and sums stay
exact in double precision.
"""

from __future__ import annotations

import random

from proftree.profile_model import CallTreeProfile, _get_or_create
from proftree.trace_model import Phase, TraceEvent, TraceSession, build_intervals

NAMES = ["main", "send", "recv", "queue lock", "pack", "progress", "BlockingProgress lock"]


def nested_thread_events(
    rng: random.Random,
    pid: int,
    tid: int,
    max_events: int = 30,
    names: list[str] | None = None,
    with_attrs: bool = False,
    start_ts: int = 0,
) -> list[TraceEvent]:
    """A well-nested Begin/End stream on one thread with integer timestamps."""
    names = names or NAMES
    events: list[TraceEvent] = []
    ts = start_ts
    open_names: list[str] = []
    for _ in range(rng.randrange(max_events)):
        ts += rng.randrange(0, 50)
        close = open_names and (rng.random() < 0.45 or len(open_names) >= 5)
        if close:
            events.append(TraceEvent(open_names.pop(), Phase.END, float(ts), pid, tid))
        else:
            name = rng.choice(names)
            attrs = {"k": str(rng.randrange(10))} if with_attrs and rng.random() < 0.3 else {}
            open_names.append(name)
            events.append(TraceEvent(
                name, Phase.BEGIN, float(ts), pid, tid,
                category=rng.choice(["", "comm", "lock"]),
                attributes=attrs,
            ))
    while open_names:
        ts += rng.randrange(0, 50)
        events.append(TraceEvent(open_names.pop(), Phase.END, float(ts), pid, tid))
    return events


def random_session(
    rng: random.Random,
    max_threads: int = 3,
    max_events: int = 30,
    names: list[str] | None = None,
    with_attrs: bool = False,
) -> TraceSession:
    """A well-nested multi-thread session built from Begin/End streams.

    Each stream gets its own tid so per-thread timestamps stay monotone.
    """
    events: list[TraceEvent] = []
    for index in range(rng.randrange(1, max_threads + 1)):
        pid = rng.choice([1, 1, 2])
        events.extend(nested_thread_events(rng, pid, index + 1, max_events, names, with_attrs))
    return build_intervals(events)


def random_lock_session(rng: random.Random, max_intervals: int = 50) -> TraceSession:
    """Multi-thread session whose names include lock-like regions.

    Threads share a pid so cross-thread lock overlap is possible; intervals
    stay well-nested per thread.
    """
    lock_names = ["queue lock", "BlockingProgress lock", "mutex lock"]
    other = ["work", "send", "compute"]
    events: list[TraceEvent] = []
    n_threads = rng.randrange(2, 5)
    budget = rng.randrange(1, max_intervals + 1)
    for tid in range(1, n_threads + 1):
        per_thread = max(1, budget // n_threads)
        ts = rng.randrange(0, 40)
        open_names: list[str] = []
        made = 0
        while made < per_thread or open_names:
            close = open_names and (made >= per_thread or rng.random() < 0.4 or len(open_names) >= 3)
            if close:
                ts += rng.randrange(0, 30)
                events.append(TraceEvent(open_names.pop(), Phase.END, float(ts), 1, tid))
            else:
                name = rng.choice(lock_names if rng.random() < 0.6 else other)
                ts += rng.randrange(0, 10)
                events.append(TraceEvent(name, Phase.BEGIN, float(ts), 1, tid))
                open_names.append(name)
                made += 1
    return build_intervals(events)


def random_profile(
    rng: random.Random,
    max_nodes: int = 20,
    value_range: tuple[float, float] = (1.0, 1e6),
    integral: bool = False,
    name_pool: list[str] | None = None,
) -> CallTreeProfile:
    """A random profile where every node carries at least one sample."""
    name_pool = name_pool or ["main", "send", "recv", "wait", "pack", "loop"]
    profile = CallTreeProfile(label=f"gen{rng.randrange(1000)}")
    paths: list[tuple[str, ...]] = []
    for _ in range(rng.randrange(1, max_nodes + 1)):
        if paths and rng.random() < 0.7:
            parent = rng.choice(paths)
            if len(parent) >= 4:
                parent = parent[: rng.randrange(1, 4)]
            path = parent + (rng.choice(name_pool),)
        else:
            path = (rng.choice(name_pool),)
        if path not in paths:
            paths.append(path)
        # ancestors must exist and carry samples too
        for i in range(1, len(path)):
            if path[:i] not in paths:
                paths.append(path[:i])
    for path in paths:
        node = _get_or_create(profile.roots, path)
        for _ in range(rng.randrange(1, 5)):
            lo, hi = value_range
            value = float(rng.randrange(int(lo), int(hi))) if integral else rng.uniform(lo, hi)
            node.stats.add_sample(value)
    return profile
