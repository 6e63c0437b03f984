"""Comparison of a baseline profile against an experimental one.

Per-node ratios are oriented baseline/experimental, so values above one mean
the experimental side is faster and values below one mean it is slower.
Nodes present on only one side are kept and flagged instead of being given
an implicit zero or infinity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from typing import Iterator

from .errors import NoMatchingNodes
from .profile_model import CallTreeProfile, ProfileNode, node_metric


class Presence(enum.Enum):
    BOTH = "both"
    BASELINE_ONLY = "baseline_only"
    EXPERIMENTAL_ONLY = "experimental_only"


@dataclass
class ComparisonNode:
    name: str
    presence: Presence
    baseline: float | None = None
    experimental: float | None = None
    ratio: float | None = None
    zero_denominator: bool = False
    baseline_weight_us: float = 0.0
    children: dict[str, "ComparisonNode"] = field(default_factory=dict)


@dataclass
class ComparisonTree:
    """Union of two profiles' structures with per-node ratios."""

    roots: dict[str, ComparisonNode] = field(default_factory=dict)
    metric: str = "mean"
    baseline_label: str = ""
    experimental_label: str = ""
    zero_denominator_paths: list[tuple[str, ...]] = field(default_factory=list)

    def walk(self) -> Iterator[tuple[tuple[str, ...], ComparisonNode]]:
        def visit(prefix, nodes):
            for name, node in nodes.items():
                path = prefix + (name,)
                yield path, node
                yield from visit(path, node.children)

        yield from visit((), self.roots)

    def node(self, path: tuple[str, ...]) -> ComparisonNode | None:
        nodes = self.roots
        current = None
        for name in path:
            current = nodes.get(name)
            if current is None:
                return None
            nodes = current.children
        return current


def compare(
    baseline: CallTreeProfile,
    experimental: CallTreeProfile,
    metric: str = "mean",
) -> ComparisonTree:
    """Unify two profiles and compute baseline/experimental per matched node.

    A node whose experimental metric is zero is kept with its ratio absent
    and flagged, both on the node and in ``zero_denominator_paths``.
    """
    tree = ComparisonTree(
        metric=metric,
        baseline_label=baseline.label,
        experimental_label=experimental.label,
    )

    def build(path, bnode: ProfileNode | None, enode: ProfileNode | None) -> ComparisonNode:
        name = path[-1]
        if bnode is not None and enode is not None:
            presence = Presence.BOTH
        elif bnode is not None:
            presence = Presence.BASELINE_ONLY
        else:
            presence = Presence.EXPERIMENTAL_ONLY
        bval = node_metric(bnode, metric) if bnode is not None else None
        eval_ = node_metric(enode, metric) if enode is not None else None
        node = ComparisonNode(
            name=name,
            presence=presence,
            baseline=bval,
            experimental=eval_,
            baseline_weight_us=bnode.stats.sum if bnode is not None else 0.0,
        )
        if presence is Presence.BOTH:
            if eval_ > 0:
                node.ratio = bval / eval_
            else:
                node.zero_denominator = True
                tree.zero_denominator_paths.append(path)
        node.children = _build_children(path, bnode.children if bnode else {},
                                        enode.children if enode else {})
        return node

    def _build_children(prefix, bchildren, echildren):
        out: dict[str, ComparisonNode] = {}
        for name, bchild in bchildren.items():
            out[name] = build(prefix + (name,), bchild, echildren.get(name))
        for name, echild in echildren.items():
            if name not in out:
                out[name] = build(prefix + (name,), None, echild)
        return out

    tree.roots = _build_children((), baseline.roots, experimental.roots)
    return tree


def rank_worst(
    tree: ComparisonTree,
    n: int,
    weight_by: str = "none",
) -> list[tuple[tuple[str, ...], float, float]]:
    """Worst-ratio nodes first: the starting points for optimization work.

    Ties are broken by descending weight, then by path.  ``weight_by`` is
    "none" or "baseline_sum".
    """
    if n < 1:
        raise ValueError("n must be positive")
    if weight_by not in ("none", "baseline_sum"):
        raise ValueError(f"unknown weight_by {weight_by!r}")
    entries = []
    for path, node in tree.walk():
        if node.ratio is None:
            continue
        weight = node.baseline_weight_us if weight_by == "baseline_sum" else 0.0
        entries.append((path, node.ratio, weight))
    entries.sort(key=lambda e: (e[1], -e[2], e[0]))
    return entries[:n]


@dataclass(frozen=True)
class SummaryStats:
    geometric_mean_ratio: float
    arithmetic_mean_ratio: float
    node_count: int


def _name_matches(name: str, patterns: list[str] | None) -> bool:
    if patterns is None:
        return True
    return any(fnmatchcase(name, pat) for pat in patterns)


def summary_stats(tree: ComparisonTree, name_filter: list[str] | None = None) -> SummaryStats:
    """Mean ratios over matched-on-both-sides nodes, optionally name-filtered."""
    ratios = [
        node.ratio
        for _path, node in tree.walk()
        if node.ratio is not None and _name_matches(node.name, name_filter)
    ]
    if not ratios:
        raise NoMatchingNodes(
            "no ratio-bearing nodes match "
            + ("the filter " + repr(name_filter) if name_filter else "(tree has no matched nodes)")
        )
    arithmetic = math.fsum(ratios) / len(ratios)
    if any(r == 0 for r in ratios):
        geometric = 0.0
    else:
        geometric = math.exp(math.fsum(math.log(r) for r in ratios) / len(ratios))
    return SummaryStats(geometric, arithmetic, len(ratios))


_SLOW_MARK = " [-]"
_FAST_MARK = " [+]"


def render_tree(
    tree: ComparisonTree | CallTreeProfile,
    precision: int = 2,
    thresholds: tuple[float, float] = (0.9, 1.1),
    metric: str = "mean",
) -> str:
    """Deterministic text rendering: one depth-indented line per node.

    For comparison trees, ratios below/above the thresholds carry [-]/[+]
    markers; one-sided nodes show their single value and a presence tag.
    For plain profiles, each line shows the chosen metric.
    """
    low, high = thresholds
    lines: list[str] = []

    if isinstance(tree, CallTreeProfile):
        def describe(node: ProfileNode) -> tuple[str, str]:
            if node.stats.count == 0 and metric in ("mean", "variance"):
                return "-", ""
            return f"{node_metric(node, metric):.{precision}f}", ""
        roots = tree.roots
    else:
        def describe(node: ComparisonNode) -> tuple[str, str]:
            if node.presence is Presence.BASELINE_ONLY:
                return f"{node.baseline:.{precision}f}", " [baseline only]"
            if node.presence is Presence.EXPERIMENTAL_ONLY:
                return f"{node.experimental:.{precision}f}", " [experimental only]"
            if node.zero_denominator:
                return "n/a", " [zero-denominator]"
            marker = ""
            if node.ratio < low:
                marker = _SLOW_MARK
            elif node.ratio > high:
                marker = _FAST_MARK
            return f"{node.ratio:.{precision}f}", marker
        roots = tree.roots

    def emit(node, prefix: str, last: bool):
        value, marker = describe(node)
        connector = "└─ " if last else "├─ "
        lines.append(f"{prefix}{connector}{value} {node.name}{marker}")
        child_prefix = prefix + ("   " if last else "│  ")
        children = list(node.children.values())
        for i, child in enumerate(children):
            emit(child, child_prefix, i == len(children) - 1)

    top = list(roots.values())
    for i, node in enumerate(top):
        emit(node, "", i == len(top) - 1)
    return "\n".join(lines) + ("\n" if lines else "")


def comparison_to_dict(tree: ComparisonTree) -> dict:
    """JSON-ready form: path-list shape plus ratio and presence per node."""
    nodes = []
    for path, node in tree.walk():
        nodes.append({
            "path": list(path),
            "presence": node.presence.value,
            "baseline": node.baseline,
            "experimental": node.experimental,
            "ratio": node.ratio,
            "zero_denominator": node.zero_denominator,
        })
    return {
        "metric": tree.metric,
        "baseline_label": tree.baseline_label,
        "experimental_label": tree.experimental_label,
        "nodes": nodes,
    }
