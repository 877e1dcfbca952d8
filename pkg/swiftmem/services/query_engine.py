"""
Query planning and three-tier retrieval.

A plan records everything derived from the query text (embedding, parsed
intervals, routed and expanded tags). Retrieval then narrows the candidate
set through the temporal and tag indexes and ranks only what survives.
"""

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from swiftmem.core.config import StoreConfig
from swiftmem.core.errors import DimensionMismatch, ZeroNorm
from swiftmem.index.embedding import Hit, top_k_hits
from swiftmem.index.tag_dag import TagDag
from swiftmem.index.temporal import TemporalIndex, TimeInterval, merge_intervals
from swiftmem.services.temporal_parser import parse_temporal
from swiftmem.storage.memory_store import MemoryStore

logger = logging.getLogger(__name__)


def _us(start_ns: int) -> float:
    return (time.perf_counter_ns() - start_ns) / 1000.0


@dataclass(frozen=True)
class QueryPlan:
    raw: str
    embedding: np.ndarray = field(compare=False, repr=False)
    intervals: Tuple[TimeInterval, ...]
    seed_tags: Tuple[Tuple[str, float], ...]
    expanded_tags: Tuple[str, ...]
    user: str
    timings: Dict[str, float] = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {
            "raw": self.raw,
            "user": self.user,
            "intervals": [[i.start, i.end] for i in self.intervals],
            "seed_tags": [[t, s] for t, s in self.seed_tags],
            "expanded_tags": list(self.expanded_tags),
        }


@dataclass
class RetrievalResult:
    hits: List[Hit]
    candidates_examined: int
    plan: QueryPlan
    timings: Dict[str, float] = field(default_factory=dict)
    fallback: bool = False
    exhaustive: bool = False

    def ids(self) -> List[int]:
        return [episode_id for episode_id, _ in self.hits]

    def to_dict(self):
        return {
            "hits": [{"id": i, "score": s} for i, s in self.hits],
            "candidates_examined": self.candidates_examined,
            "plan": self.plan.to_dict(),
            "timings_us": self.timings,
            "fallback": self.fallback,
            "exhaustive": self.exhaustive,
        }


def route_tags(query_embedding, dag: TagDag, k: int) -> List[Tuple[str, float]]:
    """
    The k tags most similar to the query, descending, ties by tag. The
    summed-similarity objective is separable, so this is a plain top-k over
    one similarity per tag.
    """
    tags, matrix, norms = dag.tag_matrix()
    if not tags or k <= 0:
        return []

    q = np.asarray(query_embedding, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != dag.d:
        raise DimensionMismatch(dag.d, int(q.size))
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        raise ZeroNorm("query embedding has zero norm")

    sims = np.full(len(tags), -1.0)
    np.divide(matrix @ q, norms * qn, out=sims, where=norms > 0)
    # tags are sorted, so the row index breaks ties in tag order
    ranked = top_k_hits(np.arange(len(tags), dtype=np.int64), sims, k)
    return [(tags[i], score) for i, score in ranked]


class QueryEngine:
    def __init__(
        self,
        store: MemoryStore,
        temporal: TemporalIndex,
        dag: TagDag,
        embedder,
        config: Optional[StoreConfig] = None,
    ):
        self.store = store
        self.temporal = temporal
        self.dag = dag
        self.embedder = embedder
        self.config = config or store.config
        self.stats: Counter = Counter()

    def plan(
        self,
        query: str,
        user: str,
        reference_now: Optional[int] = None,
        k: Optional[int] = None,
        depth: Optional[int] = None,
        intervals: Optional[Sequence[TimeInterval]] = None,
    ) -> QueryPlan:
        """
        Embeds the query, parses its time references and routes it through
        the tag DAG. `intervals`, when given, replaces parsing.
        """
        if reference_now is None:
            reference_now = int(time.time() * 1000)

        start = time.perf_counter_ns()
        embedding = self.embedder.embed(query)
        embed_us = _us(start)

        start = time.perf_counter_ns()
        if intervals is None:
            intervals = parse_temporal(
                query, reference_now, self.config.temporal_slack_ms
            )
        parse_us = _us(start)

        plan = self.plan_vector(
            embedding, user, intervals=intervals, k=k, depth=depth, raw=query
        )
        plan.timings.update(embed=embed_us, temporal_parse=parse_us)
        return plan

    def plan_vector(
        self,
        embedding,
        user: str,
        intervals: Iterable[TimeInterval] = (),
        k: Optional[int] = None,
        depth: Optional[int] = None,
        raw: str = "",
    ) -> QueryPlan:
        k = self.config.k if k is None else k
        depth = self.config.d_max if depth is None else depth

        start = time.perf_counter_ns()
        seeds = route_tags(embedding, self.dag, k)
        route_us = _us(start)
        self.stats["similarity_computations"] += len(self.dag)

        start = time.perf_counter_ns()
        expanded = self.dag.expand_tags(
            [t for t, _ in seeds], depth, include_parents=self.config.expand_parents
        )
        expand_us = _us(start)
        self.stats["expanded_tags"] += len(expanded)

        return QueryPlan(
            raw=raw,
            embedding=np.asarray(embedding, dtype=np.float64),
            intervals=tuple(merge_intervals(intervals)),
            seed_tags=tuple(seeds),
            expanded_tags=tuple(expanded),
            user=user,
            timings={"route": route_us, "expand": expand_us},
        )

    def candidates(self, plan: QueryPlan) -> Tuple[set, bool]:
        """Candidate ids for a plan and whether the full-user fallback fired."""
        user_ids = self.temporal.episode_ids(plan.user)

        if plan.expanded_tags:
            tagged = self.dag.episodes_for(plan.expanded_tags)
            if len(user_ids) != len(self.store):
                tagged &= user_ids
            if plan.intervals:
                in_time = self.temporal.multi_range_query(plan.user, plan.intervals)
                tagged = tagged.intersection(in_time)
            return tagged, False

        if plan.intervals:
            return set(self.temporal.multi_range_query(plan.user, plan.intervals)), False

        return set(user_ids), True

    def retrieve(self, plan: QueryPlan, top_k: Optional[int] = None) -> RetrievalResult:
        top_k = self.config.top_k_results if top_k is None else top_k

        start = time.perf_counter_ns()
        candidates, fallback = self.candidates(plan)
        filter_us = _us(start)
        if fallback:
            self.stats["fallback"] += 1
            logger.debug("No tags or intervals for user %s; scanning all", plan.user)

        start = time.perf_counter_ns()
        ids = np.fromiter(candidates, dtype=np.int64, count=len(candidates))
        hits = self.store.arena.rank(plan.embedding, ids, top_k)
        rank_us = _us(start)

        self.stats["queries"] += 1
        self.stats["candidates_examined"] += len(candidates)
        timings = dict(plan.timings)
        timings.update(filter=filter_us, rank=rank_us)
        return RetrievalResult(
            hits=hits,
            candidates_examined=len(candidates),
            plan=plan,
            timings=timings,
            fallback=fallback,
        )

    def retrieve_exhaustive(
        self, query: str, user: str, top_k: Optional[int] = None
    ) -> RetrievalResult:
        start = time.perf_counter_ns()
        embedding = self.embedder.embed(query)
        embed_us = _us(start)
        result = self.exhaustive_vector(embedding, user, top_k, raw=query)
        result.timings["embed"] = embed_us
        return result

    def exhaustive_vector(
        self, embedding, user: str, top_k: Optional[int] = None, raw: str = ""
    ) -> RetrievalResult:
        """Scores every episode of the user; no routing, no filtering."""
        top_k = self.config.top_k_results if top_k is None else top_k
        arena = self.store.arena
        user_ids = self.temporal.episode_ids(user)

        start = time.perf_counter_ns()
        if user_ids and len(user_ids) == len(arena):
            hits = arena.rank_all(embedding, top_k)
        else:
            ids = np.fromiter(user_ids, dtype=np.int64, count=len(user_ids))
            hits = arena.rank(embedding, ids, top_k)
        rank_us = _us(start)

        plan = QueryPlan(
            raw=raw,
            embedding=np.asarray(embedding, dtype=np.float64),
            intervals=(),
            seed_tags=(),
            expanded_tags=(),
            user=user,
        )
        return RetrievalResult(
            hits=hits,
            candidates_examined=len(user_ids),
            plan=plan,
            timings={"rank": rank_us},
            exhaustive=True,
        )
