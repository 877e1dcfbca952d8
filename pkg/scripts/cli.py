# scripts/cli.py

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from swiftmem.core.config import Settings, load_settings
from swiftmem.core.errors import SwiftMemError
from swiftmem.core.logging import setup_logging
from swiftmem.engine import EngineStats, SwiftMem
from swiftmem.index.embedding import ConsolidationReport
from swiftmem.index.temporal import TimeInterval
from swiftmem.schemas.common import ErrorResponse
from swiftmem.schemas.reports import AblationReport, BenchReport, ScaleReport
from swiftmem.services.bench import CorpusParams, ablate_temporal, run_bench, scale_study
from swiftmem.services.ingest_service import IngestSummary, ingest_file
from swiftmem.services.query_engine import RetrievalResult
from swiftmem.services.temporal_parser import parse_bound

logger = logging.getLogger("swiftmem.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

FAR_FUTURE_MS = 253_402_300_800_000  # 10000-01-01T00:00:00Z


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# =========================================================
# 1. COMPUTATION LAYER
# =========================================================


def _open_store(settings: Settings, store: str, create: bool = False) -> SwiftMem:
    if Path(store).exists():
        return SwiftMem.from_settings(settings, path=store)
    if create:
        return SwiftMem.from_settings(settings)
    raise DataError(f"Store not found: {store}")


def compute_ingest(settings: Settings, store: str, input_path: str) -> IngestSummary:
    if not Path(input_path).exists():
        raise DataError(f"Input not found: {input_path}")
    engine = _open_store(settings, store, create=True)
    summary = ingest_file(engine, input_path)
    engine.snapshot(store)
    return summary


def resolve_intervals(
    since: Optional[str], until: Optional[str]
) -> Optional[List[TimeInterval]]:
    if since is None and until is None:
        return None
    try:
        start = parse_bound(since) if since is not None else 0
        end = parse_bound(until) if until is not None else FAR_FUTURE_MS
    except ValueError as e:
        raise UsageError(f"Bad --since/--until value: {e}") from e
    if start >= end:
        raise UsageError("--since must be earlier than --until")
    return [TimeInterval(start, end)]


def compute_query(settings: Settings, store: str, args) -> Dict[str, Any]:
    bounds = (
        ("--k", args.k, 0),
        ("--depth", args.depth, 0),
        ("--top-k", args.top_k, 1),
    )
    for flag, value, low in bounds:
        if value is not None and value < low:
            raise UsageError(f"{flag} must be >= {low}, got {value}")
    engine = _open_store(settings, store)
    intervals = resolve_intervals(args.since, args.until)
    try:
        now = parse_bound(args.now) if args.now else None
    except ValueError as e:
        raise UsageError(f"Bad --now value: {e}") from e

    user = args.user or settings.DEFAULT_USER
    result = engine.query(
        args.text,
        user,
        reference_now=now,
        top_k=args.top_k,
        k=args.k,
        depth=args.depth,
        intervals=intervals,
        exhaustive=args.exhaustive,
    )
    episodes = [engine.get_episode(i) for i in result.ids()]
    return {"result": result, "episodes": episodes}


def compute_consolidate(settings: Settings, store: str, force: bool) -> ConsolidationReport:
    engine = _open_store(settings, store)
    report = engine.consolidate(force=force)
    if not report.skipped:
        engine.snapshot(store)
    return report


def compute_stats(settings: Settings, store: str) -> EngineStats:
    return _open_store(settings, store).stats()


def compute_dag(settings: Settings, store: str) -> Dict[str, Any]:
    engine = _open_store(settings, store)
    dag = engine.dag
    nodes = []
    for tag in dag.tags():
        node = dag.node(tag)
        nodes.append(
            {
                "tag": tag,
                "episodes": len(node.episodes),
                "parents": sorted(node.parents),
                "children": sorted(node.children),
            }
        )
    return {"dot": dag.to_dot(), "nodes": nodes}


def _bench_params(args) -> CorpusParams:
    if args.n < 0 or args.tags < 0 or args.queries < 0 or args.users < 1:
        raise UsageError("--n, --tags and --queries must be >= 0 and --users >= 1")
    return CorpusParams(
        n=args.n,
        tags=args.tags,
        users=args.users,
        queries=args.queries,
        seed=args.seed,
    )


def _parse_list(raw: str, kind) -> List:
    try:
        values = [kind(x) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"Bad list '{raw}': {e}") from e
    if not values:
        raise UsageError(f"Empty list '{raw}'")
    return values


# =========================================================
# 2. FORMATTING LAYER
# =========================================================


def _iso(ms: int) -> str:
    dt = datetime.fromtimestamp(ms / 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%MZ")


def _snippet(text: str, width: int = 70) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= width else flat[: width - 3] + "..."


def format_ingest_text(summary: IngestSummary) -> str:
    lines = ["INGEST SUMMARY"]
    lines.append(f"Source: {summary.source_path}")
    lines.append(f"Episodes: {summary.episodes}")
    lines.append(f"Conversations: {summary.conversations}")
    lines.append(f"Tags: {summary.tags}")
    lines.append(f"Edges: {summary.edges}")
    lines.append(f"Rejected relations: {summary.rejected_relations}")
    if summary.tagger_fallbacks:
        lines.append(f"Tagger fallbacks: {summary.tagger_fallbacks}")
    if summary.skipped:
        lines.append(f"Skipped lines: {len(summary.skipped)}")
        for skipped in summary.skipped:
            lines.append(f"  line {skipped.line}: {skipped.error}")
    return "\n".join(lines)


def format_query_text(data: Dict[str, Any]) -> str:
    result: RetrievalResult = data["result"]
    plan = result.plan
    lines = [f'QUERY: "{plan.raw}" (user {plan.user})']

    lines.append("PLAN")
    if result.exhaustive:
        lines.append("  exhaustive scan (no routing)")
    else:
        intervals = ", ".join(f"[{_iso(i.start)}, {_iso(i.end)})" for i in plan.intervals)
        lines.append(f"  intervals: {intervals or 'none'}")
        seeds = ", ".join(f"{t} ({s:.3f})" for t, s in plan.seed_tags)
        lines.append(f"  seed tags: {seeds or 'none'}")
        lines.append(f"  expanded: {', '.join(plan.expanded_tags) or 'none'}")
        if result.fallback:
            lines.append("  fallback: full user scan")

    lines.append(
        f"RESULTS ({len(result.hits)} hits, "
        f"{result.candidates_examined} candidates examined)"
    )
    for rank, ((eid, score), ep) in enumerate(zip(result.hits, data["episodes"]), 1):
        lines.append(
            f"  {rank}. [{eid}] {score:.4f}  {_iso(ep.timestamp)}  {_snippet(ep.content)}"
        )

    lines.append("TIMINGS (us)")
    lines.append("  " + "  ".join(f"{k} {v:.1f}" for k, v in result.timings.items()))
    return "\n".join(lines)


def format_query_dict(data: Dict[str, Any]) -> Dict[str, Any]:
    out = data["result"].to_dict()
    out["episodes"] = [
        {
            "id": ep.id,
            "user": ep.user,
            "content": ep.content,
            "ts": ep.timestamp,
            "tags": list(ep.tags),
        }
        for ep in data["episodes"]
    ]
    return out


def format_consolidate_text(report: ConsolidationReport) -> str:
    lines = ["CONSOLIDATION"]
    if report.skipped:
        lines.append("Skipped: below thresholds (use --force to override)")
    lines.append(f"Score: {report.score:.3f}" if report.score is not None else "Score: n/a")
    lines.append(f"Clusters: {report.clusters}")
    lines.append(f"Moved: {report.moved}")
    lines.append(
        f"Fragmentation: {report.fragmentation_before:.3f} -> "
        f"{report.fragmentation_after:.3f}"
    )
    return "\n".join(lines)


def format_stats_text(stats: EngineStats) -> str:
    lines = ["STORE STATS"]
    lines.append(f"Episodes: {stats.n_mem}")
    lines.append(f"Tags: {stats.tags}")
    lines.append(f"Edges: {stats.edges}")
    lines.append(f"Avg parents: {stats.avg_parents:.3f}")
    lines.append(f"Avg children: {stats.avg_children:.3f}")
    lines.append(f"Fragmentation: {stats.fragmentation:.3f}")
    lines.append(f"Clusters: {stats.clusters}")
    lines.append(f"Rejected relations: {stats.rejected_relations}")
    lines.append(f"DAG bytes: {stats.dag_bytes}")
    lines.append(f"Arena bytes: {stats.arena_bytes}")
    lines.append("Users:")
    if not stats.users:
        lines.append("  (none)")
    for user, count in stats.users.items():
        lines.append(f"  {user}: {count}")
    return "\n".join(lines)


def format_bench_text(report: BenchReport) -> str:
    lines = ["BENCHMARK"]
    lines.append(
        f"N={report.n} tags={report.tags} users={report.users} "
        f"queries={report.queries} seed={report.seed} k={report.k} D_max={report.d_max}"
    )
    lines.append("Baseline: in-process exhaustive scan")
    lines.append(
        f"Indexed    mean {report.indexed.mean_us:.1f}us  p50 {report.indexed.p50_us:.1f}us"
        f"  p95 {report.indexed.p95_us:.1f}us"
    )
    lines.append(
        f"Exhaustive mean {report.exhaustive.mean_us:.1f}us  p50 {report.exhaustive.p50_us:.1f}us"
        f"  p95 {report.exhaustive.p95_us:.1f}us"
    )
    lines.append(f"Speedup: {report.speedup:.1f}x")
    lines.append(
        f"Candidates: mean {report.candidates.mean:.1f} "
        f"({report.candidates.fraction_of_n:.2%} of N), p95 {report.candidates.p95:.1f}"
    )
    lines.append(f"Recall vs exhaustive@{report.top_k}: {report.recall_vs_exhaustive:.3f}")
    lines.append(f"Evidence recall@{report.top_k}: {report.evidence_recall:.3f}")
    if report.consolidation:
        c = report.consolidation
        lines.append("CONSOLIDATION")
        lines.append(
            f"  fragmentation {c.fragmentation_before:.3f} -> {c.fragmentation_after:.3f}, "
            f"moved {c.moved}, clusters {c.clusters}"
        )
        lines.append(
            f"  indexed mean {c.latency_before.mean_us:.1f}us -> {c.latency_after.mean_us:.1f}us"
        )
        lines.append(f"  hit lists identical: {'yes' if c.hits_identical else 'NO'}")
    return "\n".join(lines)


def format_ablation_text(report: AblationReport) -> str:
    title = "TEMPORAL ABLATION"
    if report.distractor_only:
        title += " (distractor intervals only)"
    lines = [title]
    lines.append(f"{'ratio':>6} {'hinted':>7} {'mean_us':>10} {'cand_mean':>10} {'recall':>7} {'evidence':>8}")
    for row in report.rows:
        lines.append(
            f"{row.hint_ratio:>6.2f} {row.hinted_queries:>7d} {row.latency.mean_us:>10.1f} "
            f"{row.candidates.mean:>10.1f} {row.recall_vs_exhaustive:>7.3f} {row.evidence_recall:>8.3f}"
        )
    return "\n".join(lines)


def format_scale_text(report: ScaleReport) -> str:
    lines = ["SCALING"]
    lines.append(f"{'n':>8} {'indexed_us':>11} {'exhaustive_us':>14} {'cand_mean':>10} {'speedup':>8}")
    for row in report.rows:
        lines.append(
            f"{row.n:>8d} {row.indexed_mean_us:>11.1f} {row.exhaustive_mean_us:>14.1f} "
            f"{row.candidates_mean:>10.1f} {row.speedup:>8.1f}"
        )
    lines.append(f"Indexed growth: {report.indexed_growth:.2f}x")
    lines.append(f"Exhaustive growth: {report.exhaustive_growth:.2f}x")
    return "\n".join(lines)


def write_rows_csv(rows: Sequence[Dict[str, Any]], out_path: str):
    if not rows:
        Path(out_path).write_text("", encoding="utf-8")
        return
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _ablation_rows(report: AblationReport) -> List[Dict[str, Any]]:
    return [
        {
            "hint_ratio": r.hint_ratio,
            "hinted_queries": r.hinted_queries,
            "mean_us": r.latency.mean_us,
            "p50_us": r.latency.p50_us,
            "p95_us": r.latency.p95_us,
            "candidates_mean": r.candidates.mean,
            "recall_vs_exhaustive": r.recall_vs_exhaustive,
            "evidence_recall": r.evidence_recall,
        }
        for r in report.rows
    ]


def _base_json_wrapper(store: Optional[str], cmd: str, data: Any) -> Dict[str, Any]:
    return {
        "schema_version": "1",
        "generated_by": "swiftmem",
        "store": store,
        "command": cmd,
        "data": data,
    }


def _write_output(content: str, out_path: Optional[str]):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(content + "\n")
    else:
        print(content)


# =========================================================
# 3. CLI LOGIC
# =========================================================


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _dispatch(args, settings: Settings) -> str:
    cmd = args.command
    store = args.store or settings.STORE_PATH
    as_json = args.json

    def emit(data_dict, text):
        if as_json:
            return json.dumps(_base_json_wrapper(store, cmd, data_dict), indent=2)
        return text

    if cmd == "ingest":
        summary = compute_ingest(settings, store, args.input)
        return emit(summary.to_dict(), format_ingest_text(summary))

    if cmd == "query":
        data = compute_query(settings, store, args)
        if as_json:
            return emit(format_query_dict(data), None)
        return format_query_text(data)

    if cmd == "consolidate":
        report = compute_consolidate(settings, store, args.force)
        return emit(report.to_dict(), format_consolidate_text(report))

    if cmd == "stats":
        stats = compute_stats(settings, store)
        return emit(stats.to_dict(), format_stats_text(stats))

    if cmd == "dump-dag":
        data = compute_dag(settings, store)
        if as_json:
            return emit(data["nodes"], None)
        if args.format == "json":
            return json.dumps(data["nodes"], indent=2)
        return data["dot"]

    config = settings.store_config()
    workers = args.workers or settings.BENCH_WORKERS
    if cmd == "bench":
        report = run_bench(
            _bench_params(args), config, workers, consolidate=not args.no_consolidate
        )
        return emit(report.model_dump(), format_bench_text(report))

    if cmd == "ablate-temporal":
        ratios = _parse_list(args.hint_ratio, float)
        if any(r < 0 or r > 1 for r in ratios):
            raise UsageError("hint ratios must lie in [0, 1]")
        report = ablate_temporal(
            _bench_params(args), ratios, config, workers, args.distractor_only
        )
        if args.csv:
            write_rows_csv(_ablation_rows(report), args.csv)
        return emit(report.model_dump(), format_ablation_text(report))

    if cmd == "scale":
        sizes = _parse_list(args.sizes, int)
        report = scale_study(sizes, _bench_params(args), config, workers)
        if args.csv:
            write_rows_csv([r.model_dump() for r in report.rows], args.csv)
        return emit(report.model_dump(), format_scale_text(report))

    raise UsageError(f"Unknown command: {cmd}")


def _report_error(message: str, code: int, kind: str, as_json: bool, extra=None):
    if as_json:
        err = ErrorResponse(
            detail=message, status_code=code, type=kind, additional_info=extra
        )
        print(err.model_dump_json(indent=2))
    else:
        print(f"Error: {message}", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else EXIT_OK
    except UsageError as e:
        return _report_error(str(e), EXIT_USAGE, "usage", "--json" in argv)

    as_json = args.json
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    try:
        settings = load_settings(
            args.config,
            LOG_LEVEL=args.log_level,
            TAGGER_MODE=getattr(args, "tagger", None),
            EMBEDDER_MODE=getattr(args, "embedder", None),
        )
        settings.store_config()
    except (ValidationError, ValueError, OSError) as e:
        return _report_error(f"Invalid configuration: {e}", EXIT_USAGE, "config", as_json)

    setup_logging(settings.LOG_LEVEL)

    try:
        output = _dispatch(args, settings)
    except UsageError as e:
        return _report_error(str(e), EXIT_USAGE, "usage", as_json)
    except DataError as e:
        return _report_error(str(e), EXIT_DATA, "data", as_json)
    except SwiftMemError as e:
        extra = {"line": e.line} if getattr(e, "line", None) is not None else None
        return _report_error(str(e), EXIT_DATA, type(e).__name__, as_json, extra)
    except ValidationError as e:
        return _report_error(f"Invalid configuration: {e}", EXIT_USAGE, "config", as_json)
    except OSError as e:
        return _report_error(str(e), EXIT_DATA, "io", as_json)

    _write_output(output, getattr(args, "out", None))
    return EXIT_OK


def _build_parser():
    parser = _Parser(
        prog="swiftmem",
        description="Query-aware episodic memory store",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  swiftmem ingest --input samples/conversations.jsonl\n"
            '  swiftmem query "what did I cook last week?" --user alice\n'
            "  swiftmem bench --n 100000 --tags 500 --json"
        ),
    )
    # Global options for every command
    parser.add_argument("--config", help="swiftmem.toml-style config file")
    parser.add_argument("--store", help="Snapshot path of the store")
    parser.add_argument("--json", action="store_true", help="Machine-readable output")
    parser.add_argument("--log-level", help="Logging level (default INFO)")

    subparsers = parser.add_subparsers(dest="command", help="Subcommands")

    # Mixin arguments for reuse; SUPPRESS keeps the global value when omitted
    def add_common_args(p):
        p.add_argument("--store", default=argparse.SUPPRESS, help="Snapshot path")
        p.add_argument(
            "--json", action="store_true", default=argparse.SUPPRESS,
            help="Machine-readable output",
        )
        p.add_argument("--out", help="Write output to file instead of stdout")

    def add_bench_args(p):
        p.add_argument("--n", type=int, default=10_000, help="Episodes in the corpus")
        p.add_argument("--tags", type=int, default=500, help="Topic tags")
        p.add_argument("--users", type=int, default=1, help="Users")
        p.add_argument("--queries", type=int, default=200, help="Queries to run")
        p.add_argument("--seed", type=int, default=7, help="Corpus seed")
        p.add_argument("--workers", type=int, help="Query worker threads")

    # INGEST
    p_ingest = subparsers.add_parser("ingest", help="Ingest a JSONL conversation file")
    p_ingest.add_argument("--input", required=True, help="JSONL of conversation records")
    p_ingest.add_argument("--tagger", choices=["remote", "offline"], help="Tagger mode")
    p_ingest.add_argument("--embedder", choices=["remote", "offline"], help="Embedder mode")
    add_common_args(p_ingest)

    # QUERY
    p_query = subparsers.add_parser("query", help="Retrieve episodes for a query")
    p_query.add_argument("text", help="Query text")
    p_query.add_argument("--user", help="User id (default from settings)")
    p_query.add_argument("--top-k", type=int, help="Hits to return")
    p_query.add_argument("--k", type=int, help="Seed tags routed per query")
    p_query.add_argument("--depth", type=int, help="Tag expansion depth")
    p_query.add_argument("--since", help="Interval start (ISO date/datetime or epoch ms)")
    p_query.add_argument("--until", help="Interval end, exclusive")
    p_query.add_argument("--now", help="Reference time for relative dates")
    p_query.add_argument("--exhaustive", action="store_true", help="Scan every episode")
    p_query.add_argument("--embedder", choices=["remote", "offline"], help="Embedder mode")
    add_common_args(p_query)

    # CONSOLIDATE
    p_cons = subparsers.add_parser("consolidate", help="Re-layout embeddings by tag cluster")
    p_cons.add_argument("--force", action="store_true", help="Ignore the thresholds")
    add_common_args(p_cons)

    # STATS
    p_stats = subparsers.add_parser("stats", help="Show store statistics")
    add_common_args(p_stats)

    # DUMP-DAG
    p_dag = subparsers.add_parser("dump-dag", help="Print the tag DAG")
    p_dag.add_argument("--format", choices=["dot", "json"], default="dot")
    add_common_args(p_dag)

    # BENCH
    p_bench = subparsers.add_parser("bench", help="Indexed vs exhaustive benchmark")
    add_bench_args(p_bench)
    p_bench.add_argument(
        "--no-consolidate", action="store_true", help="Skip the consolidation block"
    )
    add_common_args(p_bench)

    # ABLATE-TEMPORAL
    p_abl = subparsers.add_parser("ablate-temporal", help="Temporal hint ablation")
    add_bench_args(p_abl)
    p_abl.add_argument("--hint-ratio", default="0,0.5,1.0", help="Comma-separated ratios")
    p_abl.add_argument(
        "--distractor-only", action="store_true", help="Hint only the distractor interval"
    )
    p_abl.add_argument("--csv", help="Also write the rows as CSV")
    add_common_args(p_abl)

    # SCALE
    p_scale = subparsers.add_parser("scale", help="Latency across corpus sizes")
    add_bench_args(p_scale)
    p_scale.add_argument("--sizes", default="10000,100000", help="Comma-separated N values")
    p_scale.add_argument("--csv", help="Also write the rows as CSV")
    add_common_args(p_scale)

    return parser


if __name__ == "__main__":
    raise SystemExit(main())
