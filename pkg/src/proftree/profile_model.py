"""Calling-context-tree profiles built from trace sessions.

Each node aggregates the inclusive duration of every occurrence whose
nesting path of region names matches the node's path, merged across all
threads and processes.  Exclusive time is derivable (parent sum minus the
children's sums) and exposed through ``node_metric``, not stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .errors import EmptyInput, UndefinedMetric
from .trace_model import TraceSession
from .trace_io import NativeProfileDocument, ProfileNodeRecord

METRICS = ("mean", "min", "max", "sum", "variance", "count", "exclusive")


@dataclass
class NodeStats:
    """Inclusive-time statistics over a node's occurrences, in microseconds."""

    count: int = 0
    sum: float = 0.0
    min: float = 0.0
    max: float = 0.0
    sum_sq: float = 0.0

    def add_sample(self, value: float):
        if self.count == 0:
            self.min = value
            self.max = value
        else:
            self.min = min(self.min, value)
            self.max = max(self.max, value)
        self.count += 1
        self.sum += value
        self.sum_sq += value * value

    def merge(self, other: "NodeStats"):
        if other.count == 0:
            return
        if self.count == 0:
            self.min = other.min
            self.max = other.max
        else:
            self.min = min(self.min, other.min)
            self.max = max(self.max, other.max)
        self.count += other.count
        self.sum += other.sum
        self.sum_sq += other.sum_sq


@dataclass
class ProfileNode:
    name: str
    stats: NodeStats = field(default_factory=NodeStats)
    children: dict[str, "ProfileNode"] = field(default_factory=dict)


@dataclass
class CallTreeProfile:
    """Hierarchical region profile; the comparison method's input."""

    roots: dict[str, ProfileNode] = field(default_factory=dict)
    run_count: int = 1
    label: str = ""

    def node(self, path: tuple[str, ...]) -> ProfileNode | None:
        nodes = self.roots
        current = None
        for name in path:
            current = nodes.get(name)
            if current is None:
                return None
            nodes = current.children
        return current

    def walk(self) -> Iterator[tuple[tuple[str, ...], ProfileNode]]:
        """Depth-first traversal yielding (path, node)."""

        def visit(prefix, nodes):
            for name, node in nodes.items():
                path = prefix + (name,)
                yield path, node
                yield from visit(path, node.children)

        yield from visit((), self.roots)

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.walk())


def _get_or_create(roots: dict[str, ProfileNode], path: tuple[str, ...]) -> ProfileNode:
    nodes = roots
    node = None
    for name in path:
        node = nodes.get(name)
        if node is None:
            node = ProfileNode(name)
            nodes[name] = node
        nodes = node.children
    assert node is not None
    return node


def profile_from_session(
    session: TraceSession,
    label: str | None = None,
    pid: int | None = None,
) -> CallTreeProfile:
    """Aggregate a session's intervals into a calling-context-tree profile.

    Context is the pure name path; pids and tids are folded away.  Pass
    ``pid`` to profile a single process instead.
    """
    profile = CallTreeProfile(run_count=1, label=label or session.source or "")
    for tl in session.timelines:
        if pid is not None and tl.pid != pid:
            continue
        stack: list[str] = []
        for iv in tl.intervals:
            del stack[iv.depth:]
            stack.append(iv.name)
            node = _get_or_create(profile.roots, tuple(stack))
            node.stats.add_sample(iv.duration_us)
    return profile


def _merge_children(target: dict[str, ProfileNode], source: dict[str, ProfileNode]):
    for name, node in source.items():
        dest = target.get(name)
        if dest is None:
            dest = ProfileNode(name)
            target[name] = dest
        dest.stats.merge(node.stats)
        _merge_children(dest.children, node.children)


def merge_profiles(profiles: list[CallTreeProfile]) -> CallTreeProfile:
    """Node-wise union of profiles with exactly combined statistics."""
    if not profiles:
        raise EmptyInput("merge_profiles requires at least one profile")
    merged = CallTreeProfile(
        run_count=sum(p.run_count for p in profiles),
        label=profiles[0].label,
    )
    for p in profiles:
        _merge_children(merged.roots, p.roots)
    return merged


def node_metric(node: ProfileNode, which: str = "mean") -> float:
    """Evaluate one aggregate metric on a node.

    ``variance`` is the sample (n-1) variance, 0 by convention when there is
    a single occurrence.  ``exclusive`` is the node's sum minus its
    children's sums.
    """
    stats = node.stats
    if which == "count":
        return float(stats.count)
    if which == "sum":
        return stats.sum
    if which == "exclusive":
        return stats.sum - sum(c.stats.sum for c in node.children.values())
    if which == "min":
        return stats.min
    if which == "max":
        return stats.max
    if which == "mean":
        if stats.count == 0:
            raise UndefinedMetric("mean")
        return stats.sum / stats.count
    if which == "variance":
        if stats.count == 0:
            raise UndefinedMetric("variance")
        if stats.count == 1:
            return 0.0
        return max(0.0, stats.sum_sq - stats.sum * stats.sum / stats.count) / (stats.count - 1)
    raise ValueError(f"unknown metric {which!r}; expected one of {METRICS}")


def profile_to_document(profile: CallTreeProfile, metric_name: str = "time_usec") -> NativeProfileDocument:
    records = [
        ProfileNodeRecord(path, n.stats.count, n.stats.sum, n.stats.min,
                          n.stats.max, n.stats.sum_sq)
        for path, n in profile.walk()
    ]
    return NativeProfileDocument(metric_name, profile.run_count, records)


def profile_from_document(doc: NativeProfileDocument, label: str = "") -> CallTreeProfile:
    profile = CallTreeProfile(run_count=doc.run_count, label=label)
    for rec in doc.nodes:
        node = _get_or_create(profile.roots, rec.path)
        node.stats = NodeStats(rec.count, rec.sum, rec.min, rec.max, rec.sum_sq)
    return profile
