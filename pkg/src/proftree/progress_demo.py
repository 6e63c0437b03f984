"""Desk-scale progress-engine demo: shared-queue vs dual-queue lock disciplines.

One progress thread completes send requests posted by N producer threads.
Under the shared discipline the progress thread services requests while
holding the same queue lock the producers need, so enqueue latency absorbs
whole service bursts.  Under the dual discipline producers touch only a
small incoming queue that the progress thread swaps out in O(1) before
servicing unlocked.  Every lock acquisition is wrapped in a "queue lock"
region so the contention detector can see the difference.
"""

from __future__ import annotations

import os
import random
import statistics
import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .instrument import ENV_CATEGORIES, Recorder, RegionConfig, categories_from_env
from .trace_io import write_chromium_trace
from .trace_model import TraceSession

REGION_ISEND = "isend"
REGION_LOCK = "queue lock"
REGION_STEP = "progress step"
REGION_SWAP = "queue swap"

CATEGORY_API = "api"
CATEGORY_LOCK = "lock"
CATEGORY_PROGRESS = "progress"
CATEGORY_QUEUE = "queue"
ALL_CATEGORIES = frozenset({CATEGORY_API, CATEGORY_LOCK, CATEGORY_PROGRESS, CATEGORY_QUEUE})

# Minimum modeled cost of one enqueue call, paced to an absolute deadline
# from the call's start.  Scheduler and interpreter jitter sit far below
# this floor, so latency ratios across producer counts reflect queue-lock
# waits rather than timing noise.
ISEND_MIN_US = 200.0

# Poll window the progress thread spins through when it finds no work,
# outside any shared lock.  Progress engines poll continuously; sleeping
# here would also make enqueue-latency baselines depend on CPU idle states.
PROGRESS_POLL_US = 50.0


class Discipline(Enum):
    SHARED_QUEUE = "shared"
    DUAL_QUEUE = "dual"


@dataclass
class DemoConfig:
    discipline: Discipline
    producer_count: int = 4
    requests_per_producer: int = 200
    service_time_us: float = 100.0
    seed: int = 12345

    def __post_init__(self):
        if self.producer_count < 1:
            raise ValueError("producer_count must be >= 1")
        if self.requests_per_producer < 1:
            raise ValueError("requests_per_producer must be >= 1")
        if self.service_time_us < 0:
            raise ValueError("service_time_us must be >= 0")

    @property
    def total_requests(self) -> int:
        return self.producer_count * self.requests_per_producer

    def jitter_bounds_us(self) -> tuple[float, float]:
        """Inter-request think-time range; scaled so one producer stays under
        the progress thread's service capacity while several overload it."""
        base = max(self.service_time_us, 50.0)
        return 1.5 * base, 4.5 * base


@dataclass
class DemoResult:
    config: DemoConfig
    isend_latencies_us: dict[int, list[float]]
    completed_count: int
    trace: TraceSession
    wall_time_us: float

    @property
    def all_latencies_us(self) -> list[float]:
        out: list[float] = []
        for producer in sorted(self.isend_latencies_us):
            out.extend(self.isend_latencies_us[producer])
        return out

    @property
    def mean_isend_us(self) -> float:
        return statistics.fmean(self.all_latencies_us)


def busy_wait_us(duration_us: float) -> None:
    """Spin for the given time while staying runnable.

    The spin yields the interpreter each iteration so other threads are not
    starved, but any lock held by the caller stays held for the full span.
    """
    if duration_us <= 0:
        return
    deadline_ns = time.perf_counter_ns() + int(duration_us * 1000)
    while time.perf_counter_ns() < deadline_ns:
        time.sleep(0)


def _pace_until(deadline_ns: int) -> None:
    # Enqueue pacing gives the CPU back between checks; unlike a spin it
    # cannot steal cycles from the progress thread's service loop.
    while time.perf_counter_ns() < deadline_ns:
        time.sleep(0.000001)


def _demo_recorder() -> Recorder:
    enabled = categories_from_env() if ENV_CATEGORIES in os.environ else ALL_CATEGORIES
    return Recorder(RegionConfig(enabled_categories=enabled))


class _SwappableQueue:
    """Holder cell so the progress thread can exchange the incoming deque in O(1)."""

    __slots__ = ("incoming",)

    def __init__(self):
        self.incoming: deque = deque()

    def swap(self, empty: deque) -> deque:
        grabbed = self.incoming
        self.incoming = empty
        return grabbed


def run_demo(cfg: DemoConfig) -> DemoResult:
    """Run one instrumented demo configuration to completion.

    Returns per-producer enqueue latencies, the completion count, and the
    full trace.  Always terminates: producers post a bounded number of
    requests and the progress thread exits once all are serviced.
    """
    recorder = _demo_recorder()
    total = cfg.total_requests
    latencies: dict[int, list[float]] = {i: [] for i in range(cfg.producer_count)}

    lock = threading.Lock()
    shared_queue: deque = deque()
    dual_queue = _SwappableQueue()
    completed = 0

    def enqueue(request):
        deadline_ns = time.perf_counter_ns() + int(ISEND_MIN_US * 1000)
        handle = recorder.begin_region(REGION_ISEND, CATEGORY_API)
        lock_handle = recorder.begin_region(REGION_LOCK, CATEGORY_LOCK)
        with lock:
            if cfg.discipline is Discipline.SHARED_QUEUE:
                shared_queue.append(request)
            else:
                dual_queue.incoming.append(request)
        recorder.end_region(lock_handle)
        _pace_until(deadline_ns)
        recorder.end_region(handle)

    def producer(index: int):
        recorder.set_thread_name(f"user-{index}")
        rng = random.Random(cfg.seed * 1_000_003 + index)
        lo, hi = cfg.jitter_bounds_us()
        samples = latencies[index]
        for request in range(cfg.requests_per_producer):
            time.sleep(rng.uniform(lo, hi) / 1e6)
            t0 = time.perf_counter_ns()
            enqueue(request)
            samples.append((time.perf_counter_ns() - t0) / 1000.0)

    def progress_shared():
        nonlocal completed
        recorder.set_thread_name("progress")
        while completed < total:
            step = recorder.begin_region(REGION_STEP, CATEGORY_PROGRESS)
            lock_handle = recorder.begin_region(REGION_LOCK, CATEGORY_LOCK)
            serviced = 0
            with lock:
                while shared_queue:
                    shared_queue.popleft()
                    busy_wait_us(cfg.service_time_us)
                    serviced += 1
            recorder.end_region(lock_handle)
            completed += serviced
            if serviced == 0:
                busy_wait_us(PROGRESS_POLL_US)
            recorder.end_region(step)

    def progress_dual():
        nonlocal completed
        recorder.set_thread_name("progress")
        internal: deque = deque()
        while completed < total:
            step = recorder.begin_region(REGION_STEP, CATEGORY_PROGRESS)
            lock_handle = recorder.begin_region(REGION_LOCK, CATEGORY_LOCK)
            with lock:
                swap_handle = recorder.begin_region(REGION_SWAP, CATEGORY_QUEUE)
                internal = dual_queue.swap(internal)
                recorder.end_region(swap_handle)
            recorder.end_region(lock_handle)
            if internal:
                while internal:
                    internal.popleft()
                    busy_wait_us(cfg.service_time_us)
                    completed += 1
            else:
                busy_wait_us(PROGRESS_POLL_US)
            recorder.end_region(step)

    progress = threading.Thread(
        target=progress_shared if cfg.discipline is Discipline.SHARED_QUEUE else progress_dual,
        name="progress",
    )
    producers = [
        threading.Thread(target=producer, args=(i,), name=f"user-{i}")
        for i in range(cfg.producer_count)
    ]

    t_start = time.perf_counter_ns()
    progress.start()
    for t in producers:
        t.start()
    for t in producers:
        t.join()
    progress.join()
    wall_us = (time.perf_counter_ns() - t_start) / 1000.0

    trace = recorder.flush()
    return DemoResult(
        config=cfg,
        isend_latencies_us=latencies,
        completed_count=completed,
        trace=trace,
        wall_time_us=wall_us,
    )


@dataclass
class SweepRow:
    discipline: str
    producer_count: int
    requests_per_producer: int
    service_time_us: float
    seed: int
    mean_isend_us: float
    median_isend_us: float
    p99_isend_us: float
    total_runtime_s: float


CSV_HEADER = (
    "discipline,producer_count,requests_per_producer,service_time_us,seed,"
    "mean_isend_us,median_isend_us,p99_isend_us,total_runtime_s"
)


def _p99(values: list[float]) -> float:
    ordered = sorted(values)
    rank = max(0, -(-99 * len(ordered) // 100) - 1)  # nearest-rank, ceil(0.99 n)
    return ordered[rank]


def sweep(
    cfgs: list[DemoConfig],
    emit_traces_dir: str | None = None,
) -> list[SweepRow]:
    """Run each configuration and tabulate its latency summary.

    With ``emit_traces_dir`` set, each cell's trace is written to
    ``{discipline}_{producers}.trace.json`` in that directory.
    """
    rows = []
    for cfg in cfgs:
        result = run_demo(cfg)
        lat = result.all_latencies_us
        rows.append(SweepRow(
            discipline=cfg.discipline.value,
            producer_count=cfg.producer_count,
            requests_per_producer=cfg.requests_per_producer,
            service_time_us=cfg.service_time_us,
            seed=cfg.seed,
            mean_isend_us=statistics.fmean(lat),
            median_isend_us=statistics.median(lat),
            p99_isend_us=_p99(lat),
            total_runtime_s=result.wall_time_us / 1e6,
        ))
        if emit_traces_dir is not None:
            path = os.path.join(
                emit_traces_dir,
                f"{cfg.discipline.value}_{cfg.producer_count}.trace.json",
            )
            with open(path, "wb") as fh:
                fh.write(write_chromium_trace(result.trace))
    return rows


def rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.discipline},{r.producer_count},{r.requests_per_producer},"
            f"{r.service_time_us:g},{r.seed},{r.mean_isend_us:.3f},"
            f"{r.median_isend_us:.3f},{r.p99_isend_us:.3f},{r.total_runtime_s:.6f}"
        )
    return "\n".join(lines) + "\n"
