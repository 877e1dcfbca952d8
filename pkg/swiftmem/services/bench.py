"""
Benchmark harness over a seeded synthetic corpus.

Tags come in families of five: a root `topic_NNN` and four children
`topic_NNN_j` related to it. Episodes pick a topic with Zipf-distributed
popularity; their embedding is the topic's base vector plus noise, and
their timestamps are spread over one year. Every query targets one episode,
so both recall against the exhaustive scan and evidence recall (the target
is among the hits) can be measured.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from swiftmem.core.config import StoreConfig
from swiftmem.engine import SwiftMem
from swiftmem.index.embedding import Hit
from swiftmem.index.temporal import TimeInterval
from swiftmem.schemas.reports import (
    AblationReport,
    AblationRow,
    BenchReport,
    CandidateStats,
    ConsolidationBlock,
    LatencyStats,
    ScaleReport,
    ScaleRow,
)

logger = logging.getLogger(__name__)

FAMILY_SIZE = 5
DAY_MS = 86_400_000
YEAR_MS = 365 * DAY_MS
CORPUS_START_MS = 1_672_531_200_000  # 2023-01-01T00:00:00Z
CHUNK = 8192
WARMUP = 3

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class CorpusParams:
    n: int = 10_000
    tags: int = 500
    users: int = 1
    queries: int = 200
    seed: int = 7
    zipf_s: float = 1.0
    noise: float = 0.6
    query_noise: float = 0.3
    window_days: int = 30
    multi_tag_ratio: float = 0.2


@dataclass(frozen=True)
class BenchQuery:
    target: int
    user: str
    embedding: np.ndarray
    correct: TimeInterval
    distractor: TimeInterval


@dataclass
class SyntheticCorpus:
    engine: SwiftMem
    params: CorpusParams
    tag_names: List[str]
    topics: np.ndarray
    timestamps: np.ndarray
    queries: List[BenchQuery]


@dataclass(frozen=True)
class Measurement:
    latency_us: float
    candidates: int
    hits: List[Hit]
    fallback: bool = False


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


def family_tags(n_tags: int) -> Tuple[List[str], List[Tuple[str, str]]]:
    names: List[str] = []
    relations: List[Tuple[str, str]] = []
    for i in range(n_tags):
        family, j = divmod(i, FAMILY_SIZE)
        root = f"topic_{family:03d}"
        if j == 0:
            names.append(root)
        else:
            names.append(f"{root}_{j}")
            relations.append((root, names[-1]))
    return names, relations


def tag_vectors(rng: np.random.Generator, n_tags: int, d: int) -> np.ndarray:
    """Children sit around their family root (cosine ~0.78)."""
    out = _unit_rows(rng.normal(size=(n_tags, d)))
    for i in range(n_tags):
        j = i % FAMILY_SIZE
        if j:
            root = out[i - j]
            out[i] = _unit_rows(root + 0.8 * out[i])
    return out


def build_corpus(
    params: CorpusParams, config: Optional[StoreConfig] = None
) -> SyntheticCorpus:
    config = config or StoreConfig()
    d = config.d
    rng = np.random.default_rng(params.seed)
    engine = SwiftMem(config)

    names, relations = family_tags(params.tags)
    vectors = tag_vectors(rng, params.tags, d)
    for name, vec in zip(names, vectors):
        engine.define_tag(name, vec)
    for parent, child in relations:
        engine.relate(parent, child)

    n = params.n
    if n == 0 or params.tags == 0:
        empty = np.empty(0, dtype=np.int64)
        return SyntheticCorpus(engine, params, names, empty, empty, [])

    ranks = rng.permutation(params.tags) + 1
    popularity = 1.0 / ranks.astype(np.float64) ** params.zipf_s
    popularity /= popularity.sum()
    topics = rng.choice(params.tags, size=n, p=popularity)
    timestamps = np.sort(
        rng.integers(CORPUS_START_MS, CORPUS_START_MS + YEAR_MS, size=n)
    )
    user_idx = rng.integers(0, max(1, params.users), size=n)
    with_root = rng.random(n) < params.multi_tag_ratio

    engine.arena.reserve(n)
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        noise = rng.normal(size=(stop - start, d)) * (params.noise / math.sqrt(d))
        block = _unit_rows(vectors[topics[start:stop]] + noise)
        for offset, vec in enumerate(block):
            i = start + offset
            topic = int(topics[i])
            tags = [names[topic]]
            if topic % FAMILY_SIZE and with_root[i]:
                tags.append(names[topic - topic % FAMILY_SIZE])
            engine.store_episode(
                f"user_{user_idx[i]}",
                f"synthetic episode {i} about {names[topic]}",
                int(timestamps[i]),
                vec,
                tags,
            )

    queries = _make_queries(rng, engine, params, topics, timestamps, user_idx, d)
    logger.info(
        "Built synthetic corpus: n=%d tags=%d users=%d queries=%d",
        n,
        params.tags,
        params.users,
        len(queries),
    )
    return SyntheticCorpus(engine, params, names, topics, timestamps, queries)


def _make_queries(rng, engine, params, topics, timestamps, user_idx, d):
    # topic-targeted: topics drawn uniformly among those holding episodes
    order = np.argsort(topics, kind="stable")
    present, starts = np.unique(topics[order], return_index=True)
    members = np.split(order, starts[1:])
    window = params.window_days * DAY_MS

    queries = []
    for _ in range(params.queries):
        pick = int(rng.integers(len(present)))
        target = int(rng.choice(members[pick]))
        noise = rng.normal(size=d) * (params.query_noise / math.sqrt(d))
        embedding = _unit_rows(engine.arena.vector(target) + noise)

        ts = int(timestamps[target])
        offset = int(rng.integers(window))
        correct = TimeInterval(ts - offset, ts - offset + window)
        d_start = int(rng.integers(CORPUS_START_MS, CORPUS_START_MS + YEAR_MS - window))
        distractor = TimeInterval(d_start, d_start + window)
        queries.append(
            BenchQuery(target, f"user_{user_idx[target]}", embedding, correct, distractor)
        )
    return queries


def _fan_out(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def measure_indexed(
    engine: SwiftMem,
    query: BenchQuery,
    intervals: Sequence[TimeInterval],
    top_k: int,
) -> Measurement:
    """Search latency: routing, expansion, filtering and ranking."""
    qe = engine.queries
    start = time.perf_counter_ns()
    plan = qe.plan_vector(query.embedding, query.user, intervals=intervals)
    result = qe.retrieve(plan, top_k)
    elapsed = (time.perf_counter_ns() - start) / 1000.0
    return Measurement(elapsed, result.candidates_examined, result.hits, result.fallback)


def measure_exhaustive(engine: SwiftMem, query: BenchQuery, top_k: int) -> Measurement:
    start = time.perf_counter_ns()
    result = engine.queries.exhaustive_vector(query.embedding, query.user, top_k)
    elapsed = (time.perf_counter_ns() - start) / 1000.0
    return Measurement(elapsed, result.candidates_examined, result.hits)


def _warm_up(engine: SwiftMem, queries: Sequence[BenchQuery], top_k: int) -> None:
    for query in queries[:WARMUP]:
        measure_indexed(engine, query, (), top_k)
        measure_exhaustive(engine, query, top_k)


def hits_match(a: Sequence[Hit], b: Sequence[Hit], tol: float = 1e-9) -> bool:
    if [i for i, _ in a] != [i for i, _ in b]:
        return False
    return all(abs(x - y) <= tol for (_, x), (_, y) in zip(a, b))


def recall_against(hits: Sequence[Hit], reference: Sequence[Hit]) -> float:
    if not reference:
        return 1.0
    ref = {i for i, _ in reference}
    return len(ref.intersection(i for i, _ in hits)) / len(ref)


def evidence_recall(queries: Sequence[BenchQuery], runs: Sequence[Measurement]) -> float:
    if not queries:
        return 0.0
    found = sum(
        1 for q, m in zip(queries, runs) if any(i == q.target for i, _ in m.hits)
    )
    return found / len(queries)


def _mean_recall(runs: Sequence[Measurement], reference: Sequence[Measurement]) -> float:
    if not runs:
        return 0.0
    return sum(recall_against(m.hits, r.hits) for m, r in zip(runs, reference)) / len(runs)


def run_bench(
    params: CorpusParams,
    config: Optional[StoreConfig] = None,
    workers: int = 1,
    consolidate: bool = True,
) -> BenchReport:
    config = config or StoreConfig()
    corpus = build_corpus(params, config)
    engine = corpus.engine
    top_k = config.top_k_results

    report = BenchReport(
        n=params.n,
        tags=params.tags,
        users=params.users,
        queries=len(corpus.queries),
        seed=params.seed,
        d=config.d,
        k=config.k,
        d_max=config.d_max,
        top_k=top_k,
        workers=workers,
    )
    queries = corpus.queries
    if not queries:
        return report

    _warm_up(engine, queries, top_k)
    indexed = _fan_out(lambda q: measure_indexed(engine, q, (), top_k), queries, workers)
    exhaustive = _fan_out(lambda q: measure_exhaustive(engine, q, top_k), queries, workers)

    report.indexed = LatencyStats.from_samples([m.latency_us for m in indexed])
    report.exhaustive = LatencyStats.from_samples([m.latency_us for m in exhaustive])
    if report.indexed.mean_us > 0:
        report.speedup = report.exhaustive.mean_us / report.indexed.mean_us
    counts = [m.candidates for m in indexed]
    report.candidates = CandidateStats.from_counts(counts, params.n)
    report.candidate_counts = counts
    report.recall_vs_exhaustive = _mean_recall(indexed, exhaustive)
    report.evidence_recall = evidence_recall(queries, indexed)
    report.fallbacks = sum(1 for m in indexed if m.fallback)

    if consolidate:
        result = engine.consolidate(force=True)
        after = _fan_out(
            lambda q: measure_indexed(engine, q, (), top_k), queries, workers
        )
        report.consolidation = ConsolidationBlock(
            fragmentation_before=result.fragmentation_before,
            fragmentation_after=result.fragmentation_after,
            moved=result.moved,
            clusters=result.clusters,
            latency_before=report.indexed,
            latency_after=LatencyStats.from_samples([m.latency_us for m in after]),
            hits_identical=all(
                hits_match(a.hits, b.hits) for a, b in zip(indexed, after)
            ),
        )

    logger.info(
        "Bench n=%d: indexed mean %.1fus, exhaustive mean %.1fus, speedup %.1fx",
        params.n,
        report.indexed.mean_us,
        report.exhaustive.mean_us,
        report.speedup,
    )
    return report


def hinted_intervals(
    query: BenchQuery, distractor_only: bool = False
) -> Tuple[TimeInterval, ...]:
    if distractor_only:
        return (query.distractor,)
    return (query.correct, query.distractor)


def ablate_temporal(
    params: CorpusParams,
    ratios: Sequence[float],
    config: Optional[StoreConfig] = None,
    workers: int = 1,
    distractor_only: bool = False,
) -> AblationReport:
    """
    For each hint ratio, the first ratio*Q queries carry explicit intervals
    (the one holding the target plus a distractor). Hinted sets are nested,
    so a higher ratio only ever adds hints.
    """
    config = config or StoreConfig()
    corpus = build_corpus(params, config)
    engine = corpus.engine
    queries = corpus.queries
    top_k = config.top_k_results

    report = AblationReport(
        n=params.n,
        tags=params.tags,
        users=params.users,
        queries=len(queries),
        seed=params.seed,
        distractor_only=distractor_only,
    )
    if not queries:
        report.rows = [
            AblationRow(
                hint_ratio=r,
                hinted_queries=0,
                latency=LatencyStats(),
                candidates=CandidateStats(),
                recall_vs_exhaustive=0.0,
                evidence_recall=0.0,
            )
            for r in ratios
        ]
        return report

    _warm_up(engine, queries, top_k)
    exhaustive = _fan_out(lambda q: measure_exhaustive(engine, q, top_k), queries, workers)

    for ratio in ratios:
        hinted = int(round(ratio * len(queries)))

        def run(item):
            index, query = item
            intervals = hinted_intervals(query, distractor_only) if index < hinted else ()
            return measure_indexed(engine, query, intervals, top_k)

        runs = _fan_out(run, list(enumerate(queries)), workers)
        report.rows.append(
            AblationRow(
                hint_ratio=ratio,
                hinted_queries=hinted,
                latency=LatencyStats.from_samples([m.latency_us for m in runs]),
                candidates=CandidateStats.from_counts(
                    [m.candidates for m in runs], params.n
                ),
                recall_vs_exhaustive=_mean_recall(runs, exhaustive),
                evidence_recall=evidence_recall(queries, runs),
            )
        )
    return report


def scale_study(
    sizes: Sequence[int],
    params: CorpusParams,
    config: Optional[StoreConfig] = None,
    workers: int = 1,
) -> ScaleReport:
    report = ScaleReport(tags=params.tags, queries=params.queries, seed=params.seed)
    for n in sizes:
        bench = run_bench(replace(params, n=n), config, workers, consolidate=False)
        report.rows.append(
            ScaleRow(
                n=n,
                indexed_mean_us=bench.indexed.mean_us,
                exhaustive_mean_us=bench.exhaustive.mean_us,
                candidates_mean=bench.candidates.mean,
                speedup=bench.speedup,
            )
        )

    if len(report.rows) >= 2:
        first, last = report.rows[0], report.rows[-1]
        if first.indexed_mean_us > 0:
            report.indexed_growth = last.indexed_mean_us / first.indexed_mean_us
        if first.exhaustive_mean_us > 0:
            report.exhaustive_growth = last.exhaustive_mean_us / first.exhaustive_mean_us
    return report
