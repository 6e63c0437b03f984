"""Automated first-pass timeline analysis.

Four detectors scan a trace session for the classic trouble signs: lock
regions overlapping across threads, uneven per-process durations of one
collective occurrence, region durations far outside their own distribution,
and large gaps between top-level regions.  Each detector emits structured
findings; ``analyze`` runs all four and merges them deterministically.
"""

from __future__ import annotations

import enum
import math
import statistics
import sys
from dataclasses import dataclass, field, asdict
from fnmatch import fnmatchcase

from .errors import MalformedDocument
from .trace_model import Interval, TraceSession


class FindingKind(enum.Enum):
    LOCK_CONTENTION = "LockContention"
    COLLECTIVE_IMBALANCE = "CollectiveImbalance"
    DURATION_OUTLIER = "DurationOutlier"
    TIMELINE_GAP = "TimelineGap"


@dataclass(frozen=True)
class Finding:
    """One detector result; pid/tid of None means the finding spans them."""

    kind: FindingKind
    severity: float
    pid: int | None
    tid: int | None
    region: tuple[str, ...]
    window: tuple[float, float]
    evidence: dict
    message: str

    def __post_init__(self):
        if not (0.0 <= self.severity <= 1.0):
            raise ValueError(f"severity must be in [0, 1], got {self.severity}")
        if self.window[1] < self.window[0]:
            raise ValueError("finding window ends before it starts")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "severity": self.severity,
            "pid": self.pid,
            "tid": self.tid,
            "region": list(self.region),
            "window": list(self.window),
            "evidence": self.evidence,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Finding":
        return cls(
            kind=FindingKind(obj["kind"]),
            severity=obj["severity"],
            pid=obj["pid"],
            tid=obj["tid"],
            region=tuple(obj["region"]),
            window=(obj["window"][0], obj["window"][1]),
            evidence=obj["evidence"],
            message=obj["message"],
        )


_DEFAULT_COLLECTIVES = (
    "*Barrier*", "*Allreduce*", "*Reduce*", "*Bcast*", "*Allgather*", "*Alltoall*",
)


@dataclass
class AnalyzerConfig:
    """Detector thresholds; the defaults are calibrated on the demo harness."""

    lock_patterns: tuple[str, ...] = ("*lock*",)
    collective_patterns: tuple[str, ...] = _DEFAULT_COLLECTIVES
    outlier_k: float = 5.0
    outlier_min_samples: int = 10
    gap_min_us: float = 1000.0
    gap_rel: float = 5.0
    imbalance_threshold: float = 0.5

    def __post_init__(self):
        self.lock_patterns = tuple(self.lock_patterns)
        self.collective_patterns = tuple(self.collective_patterns)
        for name in ("outlier_k", "gap_min_us", "gap_rel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.outlier_min_samples < 1:
            raise ValueError("outlier_min_samples must be positive")
        if not (0 < self.imbalance_threshold < 1):
            raise ValueError("imbalance_threshold must be in (0, 1)")

    @classmethod
    def from_dict(cls, obj: dict) -> "AnalyzerConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise MalformedDocument(f"unknown analyzer config keys: {sorted(unknown)}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            raise MalformedDocument(f"bad analyzer config: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lock_patterns"] = list(self.lock_patterns)
        out["collective_patterns"] = list(self.collective_patterns)
        return out


def _matches_any(name: str, patterns: tuple[str, ...]) -> bool:
    return any(fnmatchcase(name, pat) for pat in patterns)


def detect_lock_contention(session: TraceSession, cfg: AnalyzerConfig | None = None) -> list[Finding]:
    """Cross-thread overlap of same-named lock regions, per process.

    The contention fraction is the total pairwise cross-thread overlap over
    the total duration of the region's intervals; with three or more threads
    it can exceed one, so severity saturates there.
    """
    cfg = cfg or AnalyzerConfig()
    groups: dict[tuple[int, str], list[Interval]] = {}
    for tl in session.timelines:
        for iv in tl.intervals:
            if _matches_any(iv.name, cfg.lock_patterns):
                groups.setdefault((tl.pid, iv.name), []).append(iv)

    findings = []
    for (pid, name) in sorted(groups):
        ivs = sorted(groups[(pid, name)], key=lambda iv: (iv.start_us, iv.end_us, iv.tid))
        overlaps: list[float] = []
        window_start = math.inf
        window_end = -math.inf
        active: list[Interval] = []
        for iv in ivs:
            active = [a for a in active if a.end_us > iv.start_us]
            for a in active:
                if a.tid == iv.tid:
                    continue
                ol = min(a.end_us, iv.end_us) - max(a.start_us, iv.start_us)
                if ol > 0:
                    overlaps.append(ol)
                    window_start = min(window_start, max(a.start_us, iv.start_us))
                    window_end = max(window_end, min(a.end_us, iv.end_us))
            active.append(iv)
        if not overlaps:
            continue
        total_overlap = math.fsum(overlaps)
        total_duration = math.fsum(iv.duration_us for iv in ivs)
        fraction = total_overlap / total_duration
        tids = sorted({iv.tid for iv in ivs})
        findings.append(Finding(
            kind=FindingKind.LOCK_CONTENTION,
            severity=min(1.0, fraction),
            pid=pid,
            tid=None,
            region=(name,),
            window=(window_start, window_end),
            evidence={
                "total_overlap_us": total_overlap,
                "overlap_count": len(overlaps),
                "max_overlap_us": max(overlaps),
                "total_duration_us": total_duration,
                "contention_fraction": fraction,
                "thread_ids": tids,
            },
            message=(
                f"lock region {name!r} contended on pid {pid}: "
                f"{len(overlaps)} overlaps totalling {total_overlap:.1f}us "
                f"({fraction:.1%} of {total_duration:.1f}us held)"
            ),
        ))
    return findings


def _collective_timeline(session, pid, name):
    """The pid's timeline whose earliest occurrence of ``name`` starts first."""
    best = None
    best_key = None
    for tl in session.timelines:
        if tl.pid != pid:
            continue
        starts = [iv.start_us for iv in tl.intervals if iv.name == name]
        if not starts:
            continue
        key = (min(starts), tl.tid)
        if best_key is None or key < best_key:
            best, best_key = tl, key
    return best


def detect_collective_imbalance(session: TraceSession, cfg: AnalyzerConfig | None = None) -> list[Finding]:
    """Per-occurrence duration spread of collective regions across processes.

    Occurrences align by per-process index in start order; indices present in
    fewer than two processes are skipped and noted in the evidence.
    """
    cfg = cfg or AnalyzerConfig()
    names = sorted({
        iv.name
        for tl in session.timelines
        for iv in tl.intervals
        if _matches_any(iv.name, cfg.collective_patterns)
    })
    findings = []
    for name in names:
        per_pid: dict[int, list[Interval]] = {}
        for pid in session.pids():
            tl = _collective_timeline(session, pid, name)
            if tl is not None:
                per_pid[pid] = [iv for iv in tl.intervals if iv.name == name]
        if len(per_pid) < 2:
            continue
        max_count = max(len(occ) for occ in per_pid.values())
        skipped = [
            idx for idx in range(max_count)
            if sum(1 for occ in per_pid.values() if idx < len(occ)) < 2
        ]
        for idx in range(max_count):
            group = [(pid, occ[idx]) for pid, occ in sorted(per_pid.items()) if idx < len(occ)]
            if len(group) < 2:
                continue
            durations = [iv.duration_us for _pid, iv in group]
            max_dur = max(durations)
            min_dur = min(durations)
            imbalance = (max_dur - min_dur) / max_dur if max_dur > 0 else 0.0
            if imbalance < cfg.imbalance_threshold:
                continue
            findings.append(Finding(
                kind=FindingKind.COLLECTIVE_IMBALANCE,
                severity=imbalance,
                pid=None,
                tid=None,
                region=(name,),
                window=(min(iv.start_us for _p, iv in group),
                        max(iv.end_us for _p, iv in group)),
                evidence={
                    "occurrence_index": idx,
                    "durations_by_pid": {str(pid): iv.duration_us for pid, iv in group},
                    "max_duration_us": max_dur,
                    "min_duration_us": min_dur,
                    "pid_count": len(group),
                    "skipped_indices": skipped,
                },
                message=(
                    f"collective {name!r} occurrence {idx} imbalanced across "
                    f"{len(group)} pids: durations span {min_dur:.1f}..{max_dur:.1f}us "
                    f"(imbalance {imbalance:.2f})"
                ),
            ))
    return findings


def detect_duration_outliers(session: TraceSession, cfg: AnalyzerConfig | None = None) -> list[Finding]:
    """Occurrences far above their region's own median, per process.

    Spread is estimated with the MAD, floored at 1% of the median so constant
    samples do not blow up the score.
    """
    cfg = cfg or AnalyzerConfig()
    groups: dict[tuple[int, str], list[Interval]] = {}
    for tl in session.timelines:
        for iv in tl.intervals:
            groups.setdefault((tl.pid, iv.name), []).append(iv)

    findings = []
    for (pid, name) in sorted(groups):
        ivs = sorted(groups[(pid, name)], key=lambda iv: (iv.start_us, iv.end_us, iv.tid))
        if len(ivs) < cfg.outlier_min_samples:
            continue
        durations = [iv.duration_us for iv in ivs]
        median = statistics.median(durations)
        mad = statistics.median([abs(d - median) for d in durations])
        scale = max(mad, 0.01 * median, sys.float_info.epsilon)
        threshold = median + cfg.outlier_k * scale
        for idx, iv in enumerate(ivs):
            if iv.duration_us <= threshold:
                continue
            severity = min(1.0, (iv.duration_us - median) / (10.0 * cfg.outlier_k * scale))
            findings.append(Finding(
                kind=FindingKind.DURATION_OUTLIER,
                severity=severity,
                pid=pid,
                tid=iv.tid,
                region=(name,),
                window=(iv.start_us, iv.end_us),
                evidence={
                    "duration_us": iv.duration_us,
                    "median_us": median,
                    "mad_us": mad,
                    "scale_us": scale,
                    "threshold_us": threshold,
                    "occurrence_index": idx,
                    "sample_count": len(ivs),
                },
                message=(
                    f"region {name!r} occurrence {idx} on pid {pid} ran "
                    f"{iv.duration_us:.1f}us against a median of {median:.1f}us"
                ),
            ))
    return findings


def detect_gaps(session: TraceSession, cfg: AnalyzerConfig | None = None) -> list[Finding]:
    """Large gaps between consecutive top-level regions on one thread."""
    cfg = cfg or AnalyzerConfig()
    findings = []
    for tl in session.timelines:
        top = tl.at_depth(0)
        if len(top) < 2:
            continue
        median = statistics.median([iv.duration_us for iv in top])
        threshold = max(cfg.gap_min_us, cfg.gap_rel * median)
        for prev, nxt in zip(top, top[1:]):
            gap = nxt.start_us - prev.end_us
            if gap < threshold:
                continue
            findings.append(Finding(
                kind=FindingKind.TIMELINE_GAP,
                severity=min(1.0, gap / (10.0 * threshold)),
                pid=tl.pid,
                tid=tl.tid,
                region=(prev.name, nxt.name),
                window=(prev.end_us, nxt.start_us),
                evidence={
                    "gap_us": gap,
                    "threshold_us": threshold,
                    "median_top_level_us": median,
                },
                message=(
                    f"gap of {gap:.1f}us between {prev.name!r} and {nxt.name!r} "
                    f"on pid {tl.pid} tid {tl.tid}"
                ),
            ))
    return findings


@dataclass
class Report:
    """All findings for a session, in severity order."""

    findings: list[Finding] = field(default_factory=list)

    def to_text(self) -> str:
        lines = []
        for f in self.findings:
            pid = "*" if f.pid is None else str(f.pid)
            tid = "*" if f.tid is None else str(f.tid)
            region = " -> ".join(f.region)
            lines.append(
                f"[{f.severity:.3f}] {f.kind.value:<20} pid={pid:<6} tid={tid:<6} "
                f"window={f.window[0]:.1f}..{f.window[1]:.1f}us region={region}: {f.message}"
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def to_dict(self) -> dict:
        return {"findings": [f.to_dict() for f in self.findings]}

    @classmethod
    def from_dict(cls, obj: dict) -> "Report":
        return cls(findings=[Finding.from_dict(f) for f in obj["findings"]])


def _sort_key(f: Finding):
    return (
        -f.severity,
        f.window[0],
        f.kind.value,
        f.region,
        -1 if f.pid is None else f.pid,
        -1 if f.tid is None else f.tid,
    )


def analyze(session: TraceSession, cfg: AnalyzerConfig | None = None) -> Report:
    """Run all four detectors and merge their findings deterministically."""
    cfg = cfg or AnalyzerConfig()
    findings = []
    findings.extend(detect_lock_contention(session, cfg))
    findings.extend(detect_collective_imbalance(session, cfg))
    findings.extend(detect_duration_outliers(session, cfg))
    findings.extend(detect_gaps(session, cfg))
    findings.sort(key=_sort_key)
    return Report(findings)
