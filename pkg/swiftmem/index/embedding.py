import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from swiftmem.core.config import StoreConfig
from swiftmem.core.errors import (
    DimensionMismatch,
    DuplicateEpisode,
    EpisodeNotFound,
    ZeroNorm,
)
from swiftmem.index.tag_dag import TagDag

logger = logging.getLogger(__name__)

Hit = Tuple[int, float]


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape[0], b.shape[0])
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine of a zero-norm vector")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def top_k_hits(ids: np.ndarray, scores: np.ndarray, top_k: int) -> List[Hit]:
    """Highest scores first, ties by ascending id."""
    n = scores.size
    if n == 0 or top_k <= 0:
        return []
    if top_k < n:
        # keep everything tied with the k-th best so the tiebreak stays exact
        kth = np.partition(scores, n - top_k)[n - top_k]
        mask = scores >= kth
        ids, scores = ids[mask], scores[mask]
    order = np.lexsort((ids, -scores))[:top_k]
    return [(int(ids[i]), float(scores[i])) for i in order]


@dataclass(frozen=True)
class TagCluster:
    id: int
    members: Tuple[str, ...]
    centroid_tag: str
    cohesion: float


@dataclass(frozen=True)
class LayoutEntry:
    tag: str
    o_start: int
    o_end: int
    cluster: int
    count: int


@dataclass
class ConsolidationReport:
    layout: List[LayoutEntry]
    moved: int
    fragmentation_before: float
    fragmentation_after: float
    clusters: int = 0
    skipped: bool = False
    score: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LayoutStats:
    fragmentation: float
    owned: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ConsolidationScore:
    value: float
    cohesion: float
    fragmentation: float


@dataclass(frozen=True)
class _Buffers:
    data: np.ndarray  # (capacity, d)
    norms: np.ndarray  # (capacity,)
    slot_ids: np.ndarray  # slot -> episode id, -1 when free
    id_slots: np.ndarray  # episode id -> slot, -1 when absent


class EmbeddingArena:
    """
    Contiguous float64 buffer of episode embeddings with slot <-> id maps.

    Episode ids are dense, so both maps are plain int arrays. Readers take
    one reference to the current buffers; consolidation builds new buffers
    and swaps the reference.
    """

    def __init__(self, d: int, capacity: int = 0):
        self.d = d
        self._size = 0
        self._bufs = self._allocate(max(capacity, 16), 16)
        self.layout: Dict[str, LayoutEntry] = {}

    def _allocate(self, capacity: int, id_capacity: int) -> _Buffers:
        return _Buffers(
            data=np.zeros((capacity, self.d), dtype=np.float64),
            norms=np.zeros(capacity, dtype=np.float64),
            slot_ids=np.full(capacity, -1, dtype=np.int64),
            id_slots=np.full(id_capacity, -1, dtype=np.int64),
        )

    def __len__(self) -> int:
        return self._size

    def __contains__(self, episode_id: int) -> bool:
        ids = self._bufs.id_slots
        return 0 <= episode_id < ids.size and ids[episode_id] >= 0

    @property
    def capacity(self) -> int:
        return self._bufs.data.shape[0]

    @property
    def free_slots(self) -> int:
        return self.capacity - self._size

    def reserve(self, capacity: int, id_capacity: Optional[int] = None) -> None:
        bufs = self._bufs
        id_capacity = max(id_capacity or capacity, bufs.id_slots.size)
        if capacity <= self.capacity and id_capacity <= bufs.id_slots.size:
            return
        new = self._allocate(max(capacity, self.capacity), id_capacity)
        n = self._size
        new.data[:n] = bufs.data[:n]
        new.norms[:n] = bufs.norms[:n]
        new.slot_ids[:n] = bufs.slot_ids[:n]
        new.id_slots[: bufs.id_slots.size] = bufs.id_slots
        self._bufs = new

    def add(self, episode_id: int, embedding) -> int:
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.d:
            raise DimensionMismatch(self.d, int(vec.size))
        if episode_id < 0:
            raise ValueError("episode id must be >= 0")
        if episode_id in self:
            raise DuplicateEpisode(episode_id)

        slot = self._size
        need_ids = episode_id + 1
        if slot >= self.capacity or need_ids > self._bufs.id_slots.size:
            self.reserve(
                self.capacity * 2 if slot >= self.capacity else self.capacity,
                max(need_ids, self._bufs.id_slots.size * 2),
            )

        bufs = self._bufs
        bufs.data[slot] = vec
        bufs.norms[slot] = np.linalg.norm(vec)
        bufs.slot_ids[slot] = episode_id
        bufs.id_slots[episode_id] = slot
        self._size = slot + 1
        return slot

    def slot_of(self, episode_id: int) -> int:
        if episode_id not in self:
            raise EpisodeNotFound(episode_id)
        return int(self._bufs.id_slots[episode_id])

    def episode_at(self, slot: int) -> int:
        if not 0 <= slot < self._size:
            raise IndexError(slot)
        return int(self._bufs.slot_ids[slot])

    def vector(self, episode_id: int) -> np.ndarray:
        return self._bufs.data[self.slot_of(episode_id)].copy()

    def ids_in_slot_order(self) -> List[int]:
        return self._bufs.slot_ids[: self._size].tolist()

    def _prepare_query(self, query) -> Tuple[np.ndarray, float]:
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != self.d:
            raise DimensionMismatch(self.d, int(q.size))
        qn = float(np.linalg.norm(q))
        if qn == 0.0:
            raise ZeroNorm("query embedding has zero norm")
        return q, qn

    def rank(self, query, candidates: Iterable[int], top_k: int) -> List[Hit]:
        q, qn = self._prepare_query(query)
        if isinstance(candidates, np.ndarray):
            ids = candidates.astype(np.int64, copy=False)
        else:
            ids = np.fromiter(candidates, dtype=np.int64)
        if ids.size == 0 or top_k <= 0:
            return []

        bufs = self._bufs
        if ids.max() >= bufs.id_slots.size or ids.min() < 0:
            raise EpisodeNotFound(int(ids.max()))
        slots = bufs.id_slots[ids]
        if (slots < 0).any():
            raise EpisodeNotFound(int(ids[np.argmin(slots)]))

        # ascending slot order walks the buffer front to back
        order = np.argsort(slots, kind="stable")
        slots = slots[order]
        ids = ids[order]
        scores = (bufs.data[slots] @ q) / (bufs.norms[slots] * qn)
        return top_k_hits(ids, scores, top_k)

    def rank_all(self, query, top_k: int) -> List[Hit]:
        q, qn = self._prepare_query(query)
        n = self._size
        if n == 0 or top_k <= 0:
            return []
        bufs = self._bufs
        scores = (bufs.data[:n] @ q) / (bufs.norms[:n] * qn)
        return top_k_hits(bufs.slot_ids[:n], scores, top_k)

    def layout_stats(self, dag: TagDag) -> LayoutStats:
        """Fragmentation over the slots each tag owns."""
        owned_slots: Dict[str, List[int]] = {}
        id_slots = self._bufs.id_slots
        for episode_id, tag in placement_tags(dag).items():
            if episode_id in self:
                owned_slots.setdefault(tag, []).append(int(id_slots[episode_id]))

        if not owned_slots:
            return LayoutStats(0.0, {})

        ratios = []
        for slots in owned_slots.values():
            ratios.append(_largest_run(slots) / len(slots))
        fragmentation = 1.0 - sum(ratios) / len(ratios)
        owned = {tag: len(slots) for tag, slots in owned_slots.items()}
        return LayoutStats(max(0.0, fragmentation), owned)

    def consolidate(
        self, dag: TagDag, cooccur_min: Optional[int] = None
    ) -> ConsolidationReport:
        before = self.layout_stats(dag).fragmentation
        clusters = cluster_tags(dag, cooccur_min)
        placement = placement_tags(dag)

        owned: Dict[str, List[int]] = {}
        for episode_id, tag in placement.items():
            if episode_id in self:
                owned.setdefault(tag, []).append(episode_id)

        order: List[int] = []
        layout: List[LayoutEntry] = []
        for cluster in clusters:
            for tag in cluster.members:
                members = sorted(owned.get(tag, ()))
                start = len(order)
                order.extend(members)
                layout.append(
                    LayoutEntry(tag, start, len(order), cluster.id, len(members))
                )
        placed = set(order)
        order.extend(i for i in sorted(self.ids_in_slot_order()) if i not in placed)

        bufs = self._bufs
        n = self._size
        new_ids = np.asarray(order, dtype=np.int64)
        old_slots = bufs.id_slots[new_ids] if n else np.empty(0, dtype=np.int64)
        moved = int(np.count_nonzero(old_slots != np.arange(n)))

        new = self._allocate(self.capacity, bufs.id_slots.size)
        if n:
            np.take(bufs.data, old_slots, axis=0, out=new.data[:n])
            np.take(bufs.norms, old_slots, out=new.norms[:n])
            new.slot_ids[:n] = new_ids
            new.id_slots[new_ids] = np.arange(n, dtype=np.int64)
        self._bufs = new
        self.layout = {entry.tag: entry for entry in layout}

        after = self.layout_stats(dag).fragmentation
        report = ConsolidationReport(
            layout=layout,
            moved=moved,
            fragmentation_before=before,
            fragmentation_after=after,
            clusters=len(clusters),
        )
        logger.info(
            "Consolidated %d embeddings into %d clusters: moved=%d fragmentation %.3f -> %.3f",
            n,
            len(clusters),
            moved,
            before,
            after,
        )
        return report


def _largest_run(slots: List[int]) -> int:
    ordered = sorted(slots)
    best = run = 1
    for prev, cur in zip(ordered, ordered[1:]):
        run = run + 1 if cur == prev + 1 else 1
        best = max(best, run)
    return best


def placement_tags(dag: TagDag) -> Dict[int, str]:
    """Each episode is owned by its lexicographically smallest tag."""
    placement: Dict[int, str] = {}
    for tag in dag.tags():
        for episode_id in dag.episode_set(tag):
            placement.setdefault(episode_id, tag)
    return placement


def cluster_tags(dag: TagDag, cooccur_min: Optional[int] = None) -> List[TagCluster]:
    """
    Weakly connected components of the tag DAG, optionally joined by tags
    that co-occur in at least `cooccur_min` episodes. Cluster ids follow the
    smallest member tag.
    """
    graph = nx.Graph()
    graph.add_nodes_from(dag.graph.nodes())
    graph.add_edges_from(dag.graph.edges())

    if cooccur_min:
        tags_of: Dict[int, List[str]] = {}
        for tag in dag.tags():
            for episode_id in dag.episode_set(tag):
                tags_of.setdefault(episode_id, []).append(tag)
        pairs = Counter(
            pair for tags in tags_of.values() for pair in combinations(tags, 2)
        )
        graph.add_edges_from(p for p, n in pairs.items() if n >= cooccur_min)

    components = sorted(
        (sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0]
    )
    clusters = []
    for cluster_id, members in enumerate(components):
        m = len(members)
        if m == 1:
            cohesion = 1.0
        else:
            edges = graph.subgraph(members).number_of_edges()
            cohesion = edges / (m * (m - 1) / 2)
        centroid = min(members, key=lambda t: (-len(dag.episode_set(t)), t))
        clusters.append(TagCluster(cluster_id, tuple(members), centroid, cohesion))
    return clusters


def consolidation_score(
    clusters: List[TagCluster], stats: LayoutStats
) -> ConsolidationScore:
    if not clusters:
        return ConsolidationScore(stats.fragmentation / 2, 0.0, stats.fragmentation)

    weights = [sum(stats.owned.get(t, 0) for t in c.members) for c in clusters]
    total = sum(weights)
    if total:
        cohesion = sum(w * c.cohesion for w, c in zip(weights, clusters)) / total
    else:
        cohesion = sum(c.cohesion for c in clusters) / len(clusters)
    value = (cohesion + stats.fragmentation) / 2
    return ConsolidationScore(value, cohesion, stats.fragmentation)


def should_consolidate(score: ConsolidationScore, config: StoreConfig) -> bool:
    return (
        score.fragmentation >= config.consolidation_fragmentation_min
        and score.cohesion >= config.consolidation_cohesion_min
    )
