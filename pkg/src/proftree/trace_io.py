"""Reading and writing the Chromium trace event format and the native profile format.

The Chromium reader accepts both the bare-array and the ``{"traceEvents": [...]}``
document forms.  The writer always emits the wrapped form, which both this
reader and common trace viewers accept.  Native profile documents (``.prof.json``)
hold one run's (or one aggregate's) per-path statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DanglingPath, DuplicatePath, MalformedDocument, MissingField
from .trace_model import Phase, TraceEvent, TraceSession, build_intervals

_PHASE_CODES = {"B": Phase.BEGIN, "E": Phase.END, "X": Phase.COMPLETE}

# Relative slack for the statistical invariants; sums accumulated in floating
# point can undershoot the exact bound by a few ulps.
_STAT_TOLERANCE = 1e-9


@dataclass
class ChromeTraceData:
    """Parsed Chromium document: timed events plus thread metadata."""

    events: list[TraceEvent]
    thread_names: dict[tuple[int, int], str] = field(default_factory=dict)
    skipped_phases: dict[str, int] = field(default_factory=dict)


def _reject_constant(text):
    raise MalformedDocument(f"non-finite JSON constant {text!r} not allowed")


def _load_json(data: bytes | str):
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"input is not UTF-8 text: {exc}") from exc
    try:
        return json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"input is not valid JSON: {exc}") from exc


def _require(obj: dict, index: int, name: str):
    if name not in obj:
        raise MissingField(index, name)
    return obj[name]


def _as_number(value, index: int, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedDocument(f"event {index}: field {name!r} must be a number")
    return value


def _as_id(value, index: int, name: str) -> int:
    if isinstance(value, bool):
        raise MalformedDocument(f"event {index}: field {name!r} must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise MalformedDocument(f"event {index}: field {name!r} must be an integer")


def _stringify(value) -> str:
    return value if isinstance(value, str) else json.dumps(value)


def read_chromium_trace(data: bytes | str) -> ChromeTraceData:
    """Parse a Chromium trace document into events plus thread-name metadata.

    ``ph`` codes B/E/X map to Begin/End/Complete; ``ph="M"`` events named
    ``thread_name`` register a thread name; any other phase is skipped and
    counted in ``skipped_phases``.
    """
    doc = _load_json(data)
    if isinstance(doc, dict):
        if "traceEvents" not in doc:
            raise MalformedDocument('object-form document has no "traceEvents" key')
        raw_events = doc["traceEvents"]
    elif isinstance(doc, list):
        raw_events = doc
    else:
        raise MalformedDocument("document must be a JSON array or object")
    if not isinstance(raw_events, list):
        raise MalformedDocument('"traceEvents" must be an array')

    events: list[TraceEvent] = []
    thread_names: dict[tuple[int, int], str] = {}
    skipped: dict[str, int] = {}

    for index, obj in enumerate(raw_events):
        if not isinstance(obj, dict):
            raise MalformedDocument(f"event {index} is not an object")
        ph = _require(obj, index, "ph")
        if not isinstance(ph, str):
            raise MalformedDocument(f"event {index}: field 'ph' must be a string")
        name = _require(obj, index, "name")
        if not isinstance(name, str):
            raise MalformedDocument(f"event {index}: field 'name' must be a string")

        if ph == "M":
            pid = _as_id(_require(obj, index, "pid"), index, "pid")
            tid = _as_id(_require(obj, index, "tid"), index, "tid")
            args = obj.get("args", {})
            if name == "thread_name" and isinstance(args, dict) and "name" in args:
                thread_names[(pid, tid)] = _stringify(args["name"])
            else:
                skipped["M"] = skipped.get("M", 0) + 1
            continue

        if ph not in _PHASE_CODES:
            skipped[ph] = skipped.get(ph, 0) + 1
            continue

        ts = _as_number(_require(obj, index, "ts"), index, "ts")
        pid = _as_id(_require(obj, index, "pid"), index, "pid")
        tid = _as_id(_require(obj, index, "tid"), index, "tid")
        phase = _PHASE_CODES[ph]
        duration = None
        if phase is Phase.COMPLETE:
            duration = _as_number(_require(obj, index, "dur"), index, "dur")
        cat = obj.get("cat", "")
        if not isinstance(cat, str):
            raise MalformedDocument(f"event {index}: field 'cat' must be a string")
        raw_args = obj.get("args", {})
        if not isinstance(raw_args, dict):
            raise MalformedDocument(f"event {index}: field 'args' must be an object")
        attributes = {str(k): _stringify(v) for k, v in raw_args.items()}
        try:
            events.append(TraceEvent(
                name=name, phase=phase, timestamp_us=ts, pid=pid, tid=tid,
                category=cat, duration_us=duration, attributes=attributes,
            ))
        except ValueError as exc:
            raise MalformedDocument(f"event {index}: {exc}") from exc

    return ChromeTraceData(events, thread_names, skipped)


def read_chromium_session(data: bytes | str, source: str | None = None) -> TraceSession:
    """Parse a Chromium trace and build the nested per-thread timelines."""
    parsed = read_chromium_trace(data)
    return build_intervals(parsed.events, parsed.thread_names, source=source)


def _event_to_obj(ev: TraceEvent) -> dict:
    obj: dict = {"name": ev.name, "ph": ev.phase.value, "ts": ev.timestamp_us}
    if ev.phase is Phase.COMPLETE:
        obj["dur"] = ev.duration_us
    obj["pid"] = ev.pid
    obj["tid"] = ev.tid
    if ev.category:
        obj["cat"] = ev.category
    if ev.attributes:
        obj["args"] = dict(ev.attributes)
    return obj


def write_chromium_trace(trace: TraceSession | list[TraceEvent]) -> bytes:
    """Serialize a session (or raw event list) to Chromium trace JSON bytes."""
    objs: list[dict] = []
    if isinstance(trace, TraceSession):
        for tl in trace.timelines:
            if tl.thread_name is not None:
                objs.append({
                    "name": "thread_name", "ph": "M", "ts": 0,
                    "pid": tl.pid, "tid": tl.tid,
                    "args": {"name": tl.thread_name},
                })
        for tl in trace.timelines:
            for iv in tl.intervals:
                obj: dict = {"name": iv.name, "ph": "X", "ts": iv.start_us,
                             "dur": iv.end_us - iv.start_us,
                             "pid": iv.pid, "tid": iv.tid}
                if iv.category:
                    obj["cat"] = iv.category
                if iv.attributes:
                    obj["args"] = dict(iv.attributes)
                objs.append(obj)
    else:
        objs.extend(_event_to_obj(ev) for ev in trace)
    doc = {"traceEvents": objs, "displayTimeUnit": "ms"}
    return json.dumps(doc, separators=(",", ":"), allow_nan=False).encode("utf-8")


@dataclass(frozen=True)
class ProfileNodeRecord:
    """Statistics for one calling-context path in a profile document."""

    path: tuple[str, ...]
    count: int
    sum: float
    min: float
    max: float
    sum_sq: float


@dataclass
class NativeProfileDocument:
    """One serialized profile: per-path count/sum/min/max/sum_sq statistics.

    Node order is normalized to depth-first (lexicographic path) order at
    construction, so read/write round trips are identities.
    """

    metric_name: str
    run_count: int
    nodes: list[ProfileNodeRecord]

    def __post_init__(self):
        if not isinstance(self.run_count, int) or self.run_count < 1:
            raise MalformedDocument(f"run_count must be a positive integer, got {self.run_count!r}")
        self.nodes = sorted(self.nodes, key=lambda n: n.path)
        seen: set[tuple[str, ...]] = set()
        for node in self.nodes:
            if not node.path or not all(isinstance(p, str) for p in node.path):
                raise MalformedDocument(f"node path must be a non-empty list of names: {node.path!r}")
            if node.path in seen:
                raise DuplicatePath(node.path)
            seen.add(node.path)
        for node in self.nodes:
            if len(node.path) > 1 and node.path[:-1] not in seen:
                raise DanglingPath(node.path)
            _check_stats(node)


def _check_stats(node: ProfileNodeRecord):
    label = "/".join(node.path)
    if isinstance(node.count, bool) or not isinstance(node.count, int) or node.count < 0:
        raise MalformedDocument(f"node {label!r}: count must be a non-negative integer")
    if node.count == 0:
        if any(v != 0 for v in (node.sum, node.min, node.max, node.sum_sq)):
            raise MalformedDocument(f"node {label!r}: zero-count node must have all-zero stats")
        return
    mean = node.sum / node.count
    slack = _STAT_TOLERANCE * max(1.0, abs(node.min), abs(node.max), abs(mean))
    if not (node.min <= mean + slack and mean <= node.max + slack):
        raise MalformedDocument(
            f"node {label!r}: min <= mean <= max violated "
            f"(min={node.min}, mean={mean}, max={node.max})"
        )
    lower = node.sum * node.sum / node.count
    if node.sum_sq < lower - _STAT_TOLERANCE * max(1.0, abs(lower)):
        raise MalformedDocument(
            f"node {label!r}: sum_sq {node.sum_sq} below sum^2/count {lower}"
        )


def read_profile(data: bytes | str) -> NativeProfileDocument:
    """Parse a native profile document, enforcing its structural invariants."""
    doc = _load_json(data)
    if not isinstance(doc, dict):
        raise MalformedDocument("profile document must be a JSON object")
    metric_name = doc.get("metric_name")
    if not isinstance(metric_name, str):
        raise MalformedDocument('profile document needs a string "metric_name"')
    run_count = doc.get("run_count")
    if isinstance(run_count, bool) or not isinstance(run_count, int):
        raise MalformedDocument('profile document needs an integer "run_count"')
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list):
        raise MalformedDocument('profile document needs a "nodes" array')
    nodes = []
    for i, obj in enumerate(raw_nodes):
        if not isinstance(obj, dict):
            raise MalformedDocument(f"node {i} is not an object")
        try:
            path = obj["path"]
            count = obj["count"]
            total = obj["sum"]
            mn = obj["min"]
            mx = obj["max"]
            sum_sq = obj["sum_sq"]
        except KeyError as exc:
            raise MalformedDocument(f"node {i}: missing field {exc.args[0]!r}") from exc
        if not isinstance(path, list):
            raise MalformedDocument(f"node {i}: path must be an array")
        for v, fname in ((total, "sum"), (mn, "min"), (mx, "max"), (sum_sq, "sum_sq")):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise MalformedDocument(f"node {i}: field {fname!r} must be a number")
        nodes.append(ProfileNodeRecord(tuple(path), count, total, mn, mx, sum_sq))
    return NativeProfileDocument(metric_name, run_count, nodes)


def write_profile(doc: NativeProfileDocument) -> bytes:
    """Serialize a profile document; node order is the normalized path order."""
    out = {
        "metric_name": doc.metric_name,
        "run_count": doc.run_count,
        "nodes": [
            {"path": list(n.path), "count": n.count, "sum": n.sum,
             "min": n.min, "max": n.max, "sum_sq": n.sum_sq}
            for n in doc.nodes
        ],
    }
    return json.dumps(out, indent=1, allow_nan=False).encode("utf-8")
