"""Single entry point wiring the toolkit's two workflows.

Exit codes: 0 on success, 1 on domain errors (malformed inputs, empty
matches), 2 on usage errors.  JSON goes to stdout; diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analyzers import AnalyzerConfig, analyze
from .compare import compare, comparison_to_dict, rank_worst, render_tree, summary_stats
from .errors import ProftreeError
from .profile_model import (
    METRICS,
    merge_profiles,
    profile_from_document,
    profile_from_session,
    profile_to_document,
)
from .progress_demo import DemoConfig, Discipline, rows_to_csv, sweep
from .trace_io import read_chromium_session, read_chromium_trace, read_profile, write_profile
from .trace_model import build_intervals


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proftree",
        description="Comparison and timeline profiling toolkit with a progress-engine demo.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="convert trace files into profile files")
    p_ingest.add_argument("traces", nargs="+", metavar="TRACE")
    p_ingest.add_argument("--out-dir", default=None, help="directory for .prof.json outputs")
    p_ingest.add_argument("--pid", type=int, default=None,
                          help="profile only this process id instead of aggregating across all")

    p_agg = sub.add_parser("aggregate", help="merge profile files into one")
    p_agg.add_argument("profiles", nargs="+", metavar="PROFILE")
    p_agg.add_argument("--agg", choices=["mean"], default="mean",
                       help="aggregation function recorded for the merge")
    p_agg.add_argument("-o", "--out", required=True, help="output profile path")

    p_cmp = sub.add_parser("compare", help="compare a baseline profile to an experimental one")
    p_cmp.add_argument("baseline")
    p_cmp.add_argument("experimental")
    p_cmp.add_argument("--metric", choices=list(METRICS), default="mean")
    p_cmp.add_argument("--top", type=_positive_int, default=10)
    p_cmp.add_argument("--filter", action="append", default=None, metavar="PATTERN",
                       help="restrict the summary to node names matching the glob(s)")
    p_cmp.add_argument("--format", choices=["tree", "json", "csv"], default="tree")

    p_an = sub.add_parser("analyze", help="run the timeline detectors over a trace")
    p_an.add_argument("trace")
    p_an.add_argument("--config", default=None, help="JSON file with analyzer thresholds")
    p_an.add_argument("--format", choices=["text", "json"], default="text")
    p_an.add_argument("--lock-pattern", action="append", default=None, metavar="GLOB")
    p_an.add_argument("--collective-pattern", action="append", default=None, metavar="GLOB")
    p_an.add_argument("--outlier-k", type=float, default=None)
    p_an.add_argument("--outlier-min-samples", type=int, default=None)
    p_an.add_argument("--gap-min-us", type=float, default=None)
    p_an.add_argument("--gap-rel", type=float, default=None)
    p_an.add_argument("--imbalance-threshold", type=float, default=None)

    p_demo = sub.add_parser("demo", help="run the progress-engine demo harness")
    p_demo.add_argument("--discipline", choices=["shared", "dual", "both"], default="both")
    p_demo.add_argument("--producers", type=_positive_int, default=None)
    p_demo.add_argument("--requests", type=_positive_int, default=200)
    p_demo.add_argument("--service-us", type=_nonnegative_float, default=100.0)
    p_demo.add_argument("--seed", type=int, default=12345)
    p_demo.add_argument("--sweep", default=None, metavar="LIST",
                        help="comma-separated producer counts, e.g. 1,2,4,8")
    p_demo.add_argument("--emit-traces", default=None, metavar="DIR")

    return parser


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _profile_out_path(trace_path: str, out_dir: str | None) -> str:
    base = os.path.basename(trace_path)
    for suffix in (".trace.json", ".json", ".trace"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
            break
    directory = out_dir if out_dir is not None else (os.path.dirname(trace_path) or ".")
    return os.path.join(directory, base + ".prof.json")


def _load_profile(path: str):
    doc = read_profile(_read_bytes(path))
    label = os.path.basename(path)
    if label.endswith(".prof.json"):
        label = label[: -len(".prof.json")]
    return profile_from_document(doc, label=label)


def cmd_ingest(args) -> int:
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
    failures = 0
    for path in args.traces:
        try:
            parsed = read_chromium_trace(_read_bytes(path))
            if parsed.skipped_phases:
                skipped = ", ".join(f"{ph}:{n}" for ph, n in sorted(parsed.skipped_phases.items()))
                print(f"note: {path}: skipped unsupported events ({skipped})", file=sys.stderr)
            session = build_intervals(parsed.events, parsed.thread_names, source=path)
            profile = profile_from_session(session, pid=args.pid)
            out_path = _profile_out_path(path, args.out_dir)
            with open(out_path, "wb") as fh:
                fh.write(write_profile(profile_to_document(profile)))
            print(f"ingested {path} -> {out_path}", file=sys.stderr)
        except (ProftreeError, OSError) as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_aggregate(args) -> int:
    profiles = [_load_profile(path) for path in args.profiles]
    merged = merge_profiles(profiles)
    with open(args.out, "wb") as fh:
        fh.write(write_profile(profile_to_document(merged)))
    print(f"aggregated {len(profiles)} profiles -> {args.out} "
          f"(run_count={merged.run_count})", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    baseline = _load_profile(args.baseline)
    experimental = _load_profile(args.experimental)
    tree = compare(baseline, experimental, metric=args.metric)
    worst = rank_worst(tree, args.top, weight_by="baseline_sum")
    summary = summary_stats(tree, name_filter=args.filter)

    if args.format == "json":
        doc = comparison_to_dict(tree)
        doc["worst"] = [
            {"path": list(path), "ratio": ratio, "weight_us": weight}
            for path, ratio, weight in worst
        ]
        doc["summary"] = {
            "geometric_mean_ratio": summary.geometric_mean_ratio,
            "arithmetic_mean_ratio": summary.arithmetic_mean_ratio,
            "node_count": summary.node_count,
        }
        print(json.dumps(doc, indent=1))
        return 0

    if args.format == "csv":
        print("path,presence,baseline,experimental,ratio")
        for path, node in tree.walk():
            b = "" if node.baseline is None else repr(node.baseline)
            e = "" if node.experimental is None else repr(node.experimental)
            r = "" if node.ratio is None else repr(node.ratio)
            print(f"{'/'.join(path)},{node.presence.value},{b},{e},{r}")
        return 0

    print(f"comparison of baseline={tree.baseline_label!r} vs "
          f"experimental={tree.experimental_label!r} on metric {tree.metric!r}")
    print("ratios > 1 mean the experimental side is faster\n")
    print(render_tree(tree), end="")
    if worst:
        print("\nworst nodes (lowest ratio first):")
        for path, ratio, weight in worst:
            print(f"  {ratio:8.3f}  {'/'.join(path)}  (baseline total {weight:.1f}us)")
    print(
        f"\nsummary over {summary.node_count} matched nodes: "
        f"arithmetic mean ratio {summary.arithmetic_mean_ratio:.4f}, "
        f"geometric mean ratio {summary.geometric_mean_ratio:.4f}"
    )
    return 0


def _analyzer_config(args) -> AnalyzerConfig:
    base: dict = {}
    if args.config is not None:
        loaded = json.loads(_read_bytes(args.config))
        if not isinstance(loaded, dict):
            raise ProftreeError(f"analyzer config {args.config} must be a JSON object")
        base.update(loaded)
    overrides = {
        "lock_patterns": args.lock_pattern,
        "collective_patterns": args.collective_pattern,
        "outlier_k": args.outlier_k,
        "outlier_min_samples": args.outlier_min_samples,
        "gap_min_us": args.gap_min_us,
        "gap_rel": args.gap_rel,
        "imbalance_threshold": args.imbalance_threshold,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    return AnalyzerConfig.from_dict(base)


def cmd_analyze(args) -> int:
    cfg = _analyzer_config(args)
    session = read_chromium_session(_read_bytes(args.trace), source=args.trace)
    report = analyze(session, cfg)
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=1))
    else:
        text = report.to_text()
        print(text if text else "no findings", end="" if text else "\n")
    return 0


def cmd_demo(args, parser: argparse.ArgumentParser) -> int:
    if args.sweep is not None and args.producers is not None:
        parser.error("--sweep and --producers are mutually exclusive")
    if args.sweep is not None:
        try:
            counts = [int(part) for part in args.sweep.split(",") if part.strip()]
        except ValueError:
            parser.error(f"--sweep must be a comma-separated list of integers: {args.sweep!r}")
        if not counts or any(c < 1 for c in counts):
            parser.error(f"--sweep entries must be positive integers: {args.sweep!r}")
    else:
        counts = [args.producers if args.producers is not None else 4]

    disciplines = {
        "shared": [Discipline.SHARED_QUEUE],
        "dual": [Discipline.DUAL_QUEUE],
        "both": [Discipline.SHARED_QUEUE, Discipline.DUAL_QUEUE],
    }[args.discipline]

    if args.emit_traces is not None:
        os.makedirs(args.emit_traces, exist_ok=True)

    cfgs = [
        DemoConfig(
            discipline=d,
            producer_count=c,
            requests_per_producer=args.requests,
            service_time_us=args.service_us,
            seed=args.seed,
        )
        for d in disciplines
        for c in counts
    ]
    rows = sweep(cfgs, emit_traces_dir=args.emit_traces)
    print(rows_to_csv(rows), end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        if args.command == "aggregate":
            return cmd_aggregate(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "demo":
            return cmd_demo(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except ProftreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
