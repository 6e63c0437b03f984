"""proftree: comparison-based and timeline profiling for communication middleware.

Two workflows:

* comparison profiling: build calling-context-tree profiles from traces,
  merge runs, and divide a baseline tree by an experimental tree to rank
  the regions where the experimental side loses.
* timeline profiling: annotate code with scoped regions, export Chromium
  trace files, and run automated detectors for lock contention, collective
  imbalance, duration outliers, and timeline gaps.

A two-thread progress-engine demo (shared vs dual request queue) provides
a reproducible workload for both workflows.
"""

from .errors import (
    DanglingPath,
    DuplicatePath,
    EmptyInput,
    EndOnWrongThread,
    MalformedDocument,
    MissingField,
    NoMatchingNodes,
    NonLifoEnd,
    NonNestedIntervals,
    ProftreeError,
    UnclosedBegin,
    UndefinedMetric,
    UnmatchedEnd,
)
from .trace_model import (
    Interval,
    Phase,
    ThreadTimeline,
    TraceEvent,
    TraceSession,
    build_intervals,
    overlap_us,
)
from .trace_io import (
    ChromeTraceData,
    NativeProfileDocument,
    ProfileNodeRecord,
    read_chromium_session,
    read_chromium_trace,
    read_profile,
    write_chromium_trace,
    write_profile,
)
from .profile_model import (
    CallTreeProfile,
    NodeStats,
    ProfileNode,
    merge_profiles,
    node_metric,
    profile_from_document,
    profile_from_session,
    profile_to_document,
)
from .compare import (
    ComparisonNode,
    ComparisonTree,
    Presence,
    SummaryStats,
    compare,
    comparison_to_dict,
    rank_worst,
    render_tree,
    summary_stats,
)
from .analyzers import (
    AnalyzerConfig,
    Finding,
    FindingKind,
    Report,
    analyze,
    detect_collective_imbalance,
    detect_duration_outliers,
    detect_gaps,
    detect_lock_contention,
)
from .instrument import (
    DISABLED_REGION,
    Recorder,
    RegionConfig,
    RegionHandle,
    UnclosedRegionWarning,
    begin_region,
    categories_from_env,
    default_recorder,
    end_region,
    flush,
    scoped_region,
    set_enabled_categories,
)
from .progress_demo import (
    DemoConfig,
    DemoResult,
    Discipline,
    SweepRow,
    rows_to_csv,
    run_demo,
    sweep,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
