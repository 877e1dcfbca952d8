from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional, Tuple

import numpy as np

from swiftmem.core.config import StoreConfig
from swiftmem.core.errors import (
    DimensionMismatch,
    EpisodeNotFound,
    InvalidEpisode,
    ZeroNorm,
)
from swiftmem.index.embedding import EmbeddingArena
from swiftmem.index.tag_dag import validate_tag


@dataclass(frozen=True)
class Episode:
    id: int
    user: str
    content: str
    timestamp: int
    embedding: np.ndarray = field(compare=False, repr=False)
    tags: Tuple[str, ...] = ()

    def same_as(self, other: "Episode") -> bool:
        """Field-by-field equality including the embedding bits."""
        return (
            self == other
            and self.embedding.shape == other.embedding.shape
            and bool(np.array_equal(self.embedding, other.embedding))
        )


@dataclass(frozen=True)
class _Record:
    user: str
    content: str
    timestamp: int
    tags: Tuple[str, ...]


class MemoryStore:
    """
    Canonical episode store. Episode fields live here; embeddings live in
    the store's EmbeddingArena so there is a single copy of every vector.
    """

    def __init__(self, config: Optional[StoreConfig] = None, arena=None):
        self.config = config or StoreConfig()
        self.arena = arena if arena is not None else EmbeddingArena(self.config.d)
        self._records: Dict[int, _Record] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._records)

    @property
    def n_mem(self) -> int:
        return len(self._records)

    @property
    def next_id(self) -> int:
        return self._next_id

    def validate(self, user: str, content: str, timestamp: int, embedding, tags):
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.config.d:
            raise DimensionMismatch(self.config.d, int(vec.size))
        if not np.all(np.isfinite(vec)):
            raise InvalidEpisode("embedding contains non-finite values")
        if not np.any(vec):
            raise ZeroNorm("episode embedding has zero norm")
        if not isinstance(timestamp, (int, np.integer)) or timestamp < 0:
            raise InvalidEpisode(f"timestamp must be a non-negative int, got {timestamp!r}")
        if not user:
            raise InvalidEpisode("user id must be non-empty")
        for tag in tags:
            validate_tag(tag)
        return vec

    def store_episode(
        self,
        user: str,
        content: str,
        timestamp: int,
        embedding,
        tags: Iterable[str] = (),
        episode_id: Optional[int] = None,
    ) -> int:
        """
        Persists one episode and returns its id. `episode_id` is only used
        when restoring a snapshot; fresh stores take the next counter value.
        """
        tags = tuple(sorted(set(tags)))
        vec = self.validate(user, content, timestamp, embedding, tags)

        eid = self._next_id if episode_id is None else episode_id
        if eid in self._records:
            raise InvalidEpisode(f"episode id {eid} already assigned")

        self.arena.add(eid, vec)
        self._records[eid] = _Record(user, content, int(timestamp), tags)
        self._next_id = max(self._next_id, eid + 1)
        return eid

    def get_episode(self, episode_id: int) -> Episode:
        record = self._records.get(episode_id)
        if record is None:
            raise EpisodeNotFound(episode_id)
        return Episode(
            id=episode_id,
            user=record.user,
            content=record.content,
            timestamp=record.timestamp,
            embedding=self.arena.vector(episode_id),
            tags=record.tags,
        )

    def __contains__(self, episode_id: int) -> bool:
        return episode_id in self._records

    def ids(self) -> Iterator[int]:
        return iter(sorted(self._records))

    def episodes(self) -> Iterator[Episode]:
        for episode_id in self.ids():
            yield self.get_episode(episode_id)
