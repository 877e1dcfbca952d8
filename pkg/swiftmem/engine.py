import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from swiftmem.adapters import (
    Embedder,
    OfflineEmbedder,
    OfflineTagger,
    Tagger,
    build_embedder,
    build_tagger,
)
from swiftmem.core.config import Settings, StoreConfig
from swiftmem.core.errors import (
    CorruptSnapshot,
    DimensionMismatch,
    EmptyContent,
    SwiftMemError,
)
from swiftmem.core.locks import ReadWriteLock
from swiftmem.index.embedding import (
    ConsolidationReport,
    EmbeddingArena,
    cluster_tags,
    consolidation_score,
    should_consolidate,
)
from swiftmem.index.tag_dag import TagDag
from swiftmem.index.temporal import TemporalIndex, TimeInterval
from swiftmem.schemas.adapters import EmbedderSpec, TaggerSpec
from swiftmem.schemas.snapshot import EpisodeRecord, TagRecord
from swiftmem.services.query_engine import QueryEngine, RetrievalResult
from swiftmem.storage.memory_store import Episode, MemoryStore
from swiftmem.storage.snapshot import read_snapshot, write_snapshot

logger = logging.getLogger(__name__)

Relation = Tuple[str, str]


@dataclass
class EngineStats:
    n_mem: int
    tags: int
    edges: int
    avg_parents: float
    avg_children: float
    fragmentation: float
    clusters: int
    rejected_relations: int
    dag_bytes: int
    arena_bytes: int
    users: Dict[str, int] = field(default_factory=dict)
    query_fallbacks: int = 0
    tagger_fallbacks: int = 0

    def to_dict(self):
        return asdict(self)


class SwiftMem:
    """
    Episode store plus the temporal, tag and embedding indexes.

    Ingestion, relation changes and consolidation take the write side of a
    readers-writer lock; queries, stats and snapshots share the read side.
    An episode becomes visible to queries when its temporal entry is
    inserted, which is the last step of a store.
    """

    def __init__(
        self,
        config: Optional[StoreConfig] = None,
        embedder: Optional[Embedder] = None,
        tagger: Optional[Tagger] = None,
    ):
        self.config = config or StoreConfig()
        self.embedder = embedder or OfflineEmbedder(self.config.d)
        if self.embedder.d != self.config.d:
            raise DimensionMismatch(self.config.d, self.embedder.d)
        self.tagger = tagger or OfflineTagger()

        self.arena = EmbeddingArena(self.config.d)
        self.store = MemoryStore(self.config, self.arena)
        self.temporal = TemporalIndex()
        self.dag = TagDag(self.config.d)
        self.queries = QueryEngine(
            self.store, self.temporal, self.dag, self.embedder, self.config
        )
        self._relations: Dict[int, List[Relation]] = {}
        self._lock = ReadWriteLock()

    @classmethod
    def from_settings(
        cls, settings: Settings, path: Optional[str] = None
    ) -> "SwiftMem":
        """
        Builds the adapters named by `settings`; with `path`, the engine is
        loaded from that snapshot instead of starting empty.
        """
        config = settings.store_config()
        embedder = build_embedder(
            EmbedderSpec(
                mode=settings.EMBEDDER_MODE,
                endpoint=settings.EMBED_ENDPOINT,
                model=settings.EMBED_MODEL,
                timeout_ms=settings.TIMEOUT_MS,
                d=settings.D,
            ),
            api_key=settings.API_KEY,
        )
        if path is None:
            engine = cls(config, embedder=embedder)
        else:
            engine = cls.load(path, config=config, embedder=embedder)
        engine.tagger = build_tagger(
            TaggerSpec(
                mode=settings.TAGGER_MODE,
                endpoint=settings.LLM_ENDPOINT,
                model=settings.LLM_MODEL,
                timeout_ms=settings.TIMEOUT_MS,
                d=settings.D,
            ),
            embedder,
            lambda: engine.dag,
            api_key=settings.API_KEY,
            fallback_threshold=settings.FALLBACK_SIMILARITY_MIN,
        )
        return engine

    def __len__(self) -> int:
        return len(self.store)

    def _tag_embedding(self, tag: str):
        return self.embedder.embed(tag.replace("_", " "))

    def store_episode(
        self,
        user: str,
        content: str,
        timestamp: int,
        embedding,
        tags: Iterable[str] = (),
        relations: Sequence[Relation] = (),
        episode_id: Optional[int] = None,
    ) -> int:
        """
        Stores one episode and updates all three indexes before returning
        its id. Missing tags are created with the embedding of their text.
        """
        tags = tuple(sorted(set(tags)))
        with self._lock.write():
            self.store.validate(user, content, timestamp, embedding, tags)
            new_tags = {t: self._tag_embedding(t) for t in tags if t not in self.dag}

            eid = self.store.store_episode(
                user, content, timestamp, embedding, tags, episode_id=episode_id
            )
            for tag, vec in new_tags.items():
                self.dag.upsert_tag(tag, vec)
            for tag in tags:
                self.dag.attach_episode(tag, eid)
            if relations:
                self._relations[eid] = list(relations)
                if episode_id is None:
                    self._apply_relations(relations)
            self.temporal.insert(user, int(timestamp), eid)
        return eid

    def define_tag(self, tag: str, embedding=None) -> None:
        """Creates or re-embeds a tag ahead of any episode using it."""
        with self._lock.write():
            vec = self._tag_embedding(tag) if embedding is None else embedding
            self.dag.upsert_tag(tag, vec)

    def relate(self, parent: str, child: str):
        with self._lock.write():
            return self.dag.add_relation(parent, child)

    def _apply_relations(self, relations: Iterable[Relation]) -> None:
        for parent, child in relations:
            if parent not in self.dag or child not in self.dag:
                logger.info("Skipped relation %s -> %s: unknown tag", parent, child)
                continue
            self.dag.add_relation(parent, child)

    def ingest_text(self, user: str, content: str, timestamp: int) -> int:
        """Embeds and tags raw content, then stores it."""
        if not content or not content.strip():
            raise EmptyContent("cannot ingest empty content")
        embedding = self.embedder.embed(content)
        proposal = self.tagger.generate_tags(content)
        return self.store_episode(
            user, content, timestamp, embedding, proposal.tags, proposal.relations
        )

    def get_episode(self, episode_id: int) -> Episode:
        return self.store.get_episode(episode_id)

    def recent(self, user: str, n: int) -> List[Episode]:
        with self._lock.read():
            ids = self.temporal.recent(user, n)
        return [self.store.get_episode(i) for i in ids]

    def query(
        self,
        text: str,
        user: str,
        reference_now: Optional[int] = None,
        top_k: Optional[int] = None,
        k: Optional[int] = None,
        depth: Optional[int] = None,
        intervals: Optional[Sequence[TimeInterval]] = None,
        exhaustive: bool = False,
    ) -> RetrievalResult:
        with self._lock.read():
            if exhaustive:
                return self.queries.retrieve_exhaustive(text, user, top_k)
            plan = self.queries.plan(
                text, user, reference_now, k=k, depth=depth, intervals=intervals
            )
            return self.queries.retrieve(plan, top_k)

    def consolidate(self, force: bool = False) -> ConsolidationReport:
        with self._lock.write():
            clusters = cluster_tags(self.dag, self.config.cooccur_min)
            stats = self.arena.layout_stats(self.dag)
            score = consolidation_score(clusters, stats)

            if not force and not should_consolidate(score, self.config):
                logger.info(
                    "Consolidation skipped: cohesion=%.3f fragmentation=%.3f",
                    score.cohesion,
                    score.fragmentation,
                )
                return ConsolidationReport(
                    layout=[],
                    moved=0,
                    fragmentation_before=stats.fragmentation,
                    fragmentation_after=stats.fragmentation,
                    clusters=len(clusters),
                    skipped=True,
                    score=score.value,
                )

            report = self.arena.consolidate(self.dag, self.config.cooccur_min)
            report.score = score.value
            return report

    def stats(self) -> EngineStats:
        with self._lock.read():
            return self._stats()

    def _stats(self) -> EngineStats:
        clusters = cluster_tags(self.dag, self.config.cooccur_min)
        return EngineStats(
            n_mem=self.store.n_mem,
            tags=len(self.dag),
            edges=self.dag.edge_count,
            avg_parents=self.dag.avg_parents(),
            avg_children=self.dag.avg_children(),
            fragmentation=self.arena.layout_stats(self.dag).fragmentation,
            clusters=len(clusters),
            rejected_relations=self.dag.rejected_relations,
            dag_bytes=self.dag.space_bytes(),
            arena_bytes=len(self.arena) * self.config.d * 8,
            users={u: self.temporal.count(u) for u in self.temporal.users()},
            query_fallbacks=self.queries.stats["fallback"],
            tagger_fallbacks=getattr(self.tagger, "fallbacks", 0),
        )

    def dump_dag(self) -> str:
        with self._lock.read():
            return self.dag.to_dot()

    def records(self) -> List[EpisodeRecord]:
        """Snapshot records in arena slot order."""
        records = []
        for eid in self.arena.ids_in_slot_order():
            ep = self.store.get_episode(eid)
            records.append(
                EpisodeRecord(
                    id=ep.id,
                    user=ep.user,
                    content=ep.content,
                    ts=ep.timestamp,
                    tags=list(ep.tags),
                    emb=ep.embedding.tolist(),
                    rel=self._relations.get(eid, []),
                )
            )
        return records

    def tag_records(self) -> List[TagRecord]:
        """One record per tag with its exact embedding and accepted children."""
        graph = self.dag.graph
        return [
            TagRecord(
                tag=tag,
                emb=graph.nodes[tag]["embedding"].tolist(),
                children=sorted(graph.successors(tag)),
            )
            for tag in self.dag.tags()
        ]

    def snapshot(self, path: str) -> int:
        with self._lock.read():
            count = write_snapshot(
                path,
                self.config.d,
                self.records(),
                tags=self.tag_records(),
                rejected=self.dag.rejected_relations,
            )
        logger.info("Wrote snapshot of %d episodes to %s", count, path)
        return count

    @classmethod
    def load(
        cls,
        path: str,
        config: Optional[StoreConfig] = None,
        embedder: Optional[Embedder] = None,
        tagger: Optional[Tagger] = None,
    ) -> "SwiftMem":
        """
        Rebuilds an engine from a snapshot. Episodes are re-added in file
        order, which restores the arena layout. Tag lines restore the tag
        embeddings and the accepted edges as written; files without tag
        lines fall back to replaying episode relations in id order.
        """
        header, records, tag_records = read_snapshot(path)
        config = (config or StoreConfig()).model_copy(update={"d": header.d})
        engine = cls(config, embedder=embedder, tagger=tagger)
        engine.arena.reserve(len(records), max((r.id for r in records), default=0) + 1)

        def tag_line(offset: int) -> int:
            return header.count + offset + 2

        for offset, record in enumerate(tag_records):
            try:
                engine.define_tag(record.tag, record.emb)
            except SwiftMemError as e:
                raise CorruptSnapshot(str(e), line=tag_line(offset)) from e

        for offset, record in enumerate(records):
            try:
                engine.store_episode(
                    record.user,
                    record.content,
                    record.ts,
                    record.emb,
                    record.tags,
                    relations=record.rel,
                    episode_id=record.id,
                )
            except SwiftMemError as e:
                raise CorruptSnapshot(str(e), line=offset + 2) from e

        with engine._lock.write():
            if tag_records:
                # any subset of a DAG is acyclic, so edge order does not matter
                for offset, record in enumerate(tag_records):
                    for child in record.children:
                        try:
                            outcome = engine.dag.add_relation(record.tag, child)
                        except SwiftMemError as e:
                            raise CorruptSnapshot(str(e), line=tag_line(offset)) from e
                        if not outcome.accepted:
                            raise CorruptSnapshot(
                                f"edge {record.tag} -> {child} rejected ({outcome.reason})",
                                line=tag_line(offset),
                            )
            else:
                for eid in sorted(engine._relations):
                    engine._apply_relations(engine._relations[eid])
            engine.dag.rejected_relations = header.rejected
        logger.info("Loaded %d episodes from %s", len(records), path)
        return engine
