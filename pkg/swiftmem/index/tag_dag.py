import logging
import re
from dataclasses import dataclass
from itertools import islice
from typing import Iterable, List, Optional, Set

import networkx as nx
import numpy as np

from swiftmem.core.errors import DimensionMismatch, InvalidTag, SelfLoop, UnknownTag

logger = logging.getLogger(__name__)

TAG_PATTERN = re.compile(r"^[a-z0-9]+(_[a-z0-9]+){0,2}$")

# Too broad to say anything about an episode.
BROAD_TAGS = frozenset({"conversation", "chat", "discussion", "talk", "message"})


def is_valid_tag(tag: str) -> bool:
    return bool(TAG_PATTERN.match(tag))


def validate_tag(tag: str) -> str:
    if not isinstance(tag, str) or not is_valid_tag(tag):
        raise InvalidTag(str(tag))
    return tag


def normalize_tag(raw: str) -> Optional[str]:
    """
    Lowercases and joins words with underscores. Returns None when the
    result is not a valid tag (empty, more than 3 words, odd characters)
    or is one of the broad tags.
    """
    text = raw.strip().lower()
    text = re.sub(r"[\s\-]+", "_", text)
    text = re.sub(r"[^a-z0-9_]", "", text)
    text = re.sub(r"_+", "_", text).strip("_")
    if not text or text in BROAD_TAGS or not is_valid_tag(text):
        return None
    return text


@dataclass(frozen=True)
class TagNode:
    tag: str
    episodes: frozenset
    parents: frozenset
    children: frozenset
    embedding: np.ndarray


@dataclass(frozen=True)
class RelationOutcome:
    accepted: bool
    reason: Optional[str] = None


class TagDag:
    """
    Hierarchical tag index. Edges point from the broader tag to the more
    specific one; an edge that would close a cycle is never stored.

    Backed by a networkx.DiGraph whose nodes carry an `episodes` set and an
    `embedding` vector. Parents are graph predecessors, children successors,
    so parent/child sets are reciprocal by construction.
    """

    def __init__(self, d: int):
        self.d = d
        self._graph = nx.DiGraph()
        self._matrix_cache: Optional[tuple] = None
        self.rejected_relations = 0

    @property
    def graph(self) -> nx.DiGraph:
        return self._graph

    def __contains__(self, tag: str) -> bool:
        return tag in self._graph

    def __len__(self) -> int:
        return self._graph.number_of_nodes()

    def tags(self) -> List[str]:
        return sorted(self._graph.nodes())

    def upsert_tag(self, tag: str, embedding) -> None:
        validate_tag(tag)
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.d:
            raise DimensionMismatch(self.d, int(vec.size))

        if tag in self._graph:
            self._graph.nodes[tag]["embedding"] = vec.copy()
        else:
            self._graph.add_node(tag, episodes=set(), embedding=vec.copy())
        self._matrix_cache = None

    def attach_episode(self, tag: str, episode_id: int) -> None:
        if tag not in self._graph:
            raise UnknownTag(tag)
        self._graph.nodes[tag]["episodes"].add(episode_id)

    def add_relation(self, parent: str, child: str) -> RelationOutcome:
        for tag in (parent, child):
            if tag not in self._graph:
                raise UnknownTag(tag)
        if parent == child:
            raise SelfLoop(parent)

        if self._graph.has_edge(parent, child):
            return self._reject(parent, child, "duplicate")
        # parent is reachable from child => the new edge closes a cycle
        if nx.has_path(self._graph, child, parent):
            return self._reject(parent, child, "cycle")

        self._graph.add_edge(parent, child)
        return RelationOutcome(True)

    def _reject(self, parent: str, child: str, reason: str) -> RelationOutcome:
        self.rejected_relations += 1
        logger.info("Rejected relation %s -> %s (%s)", parent, child, reason)
        return RelationOutcome(False, reason)

    def node(self, tag: str) -> TagNode:
        if tag not in self._graph:
            raise UnknownTag(tag)
        attrs = self._graph.nodes[tag]
        return TagNode(
            tag=tag,
            episodes=frozenset(attrs["episodes"]),
            parents=frozenset(self._graph.predecessors(tag)),
            children=frozenset(self._graph.successors(tag)),
            embedding=attrs["embedding"],
        )

    def episode_set(self, tag: str) -> Set[int]:
        """Live episode set of a tag (read-only by convention)."""
        return self._graph.nodes[tag]["episodes"]

    def expand_tags(
        self, seeds: Iterable[str], depth: int, include_parents: bool = False
    ) -> List[str]:
        """
        Breadth-first expansion toward more specific tags.

        Seeds come first in their given order (unknown seeds skipped), then
        each deeper level sorted by tag. With include_parents the direct
        parents of the seeds are appended after the child expansion.
        """
        if depth < 0:
            raise ValueError("depth must be >= 0")

        known = list(dict.fromkeys(s for s in seeds if s in self._graph))
        if not known:
            return []

        order: List[str] = []
        for level, layer in enumerate(
            islice(nx.bfs_layers(self._graph, known), depth + 1)
        ):
            order.extend(layer if level == 0 else sorted(layer))

        if include_parents:
            seen = set(order)
            extra = sorted(
                {p for s in known for p in self._graph.predecessors(s)} - seen
            )
            order.extend(extra)
        return order

    def episodes_for(self, tags: Iterable[str]) -> Set[int]:
        sets = [
            self._graph.nodes[t]["episodes"] for t in tags if t in self._graph
        ]
        return set().union(*sets)

    def tag_matrix(self) -> tuple:
        """
        (tags sorted ascending, embedding matrix aligned to them, row norms).
        Cached until the next upsert.
        """
        if self._matrix_cache is None:
            tags = self.tags()
            if tags:
                matrix = np.vstack([self._graph.nodes[t]["embedding"] for t in tags])
            else:
                matrix = np.empty((0, self.d), dtype=np.float64)
            norms = np.linalg.norm(matrix, axis=1)
            self._matrix_cache = (tags, matrix, norms)
        return self._matrix_cache

    @property
    def edge_count(self) -> int:
        return self._graph.number_of_edges()

    def avg_parents(self) -> float:
        n = len(self)
        return sum(d for _, d in self._graph.in_degree()) / n if n else 0.0

    def avg_children(self) -> float:
        n = len(self)
        return sum(d for _, d in self._graph.out_degree()) / n if n else 0.0

    def space_bytes(self) -> int:
        # embeddings plus one pointer per parent and child entry
        return len(self) * self.d * 8 + 8 * 2 * self.edge_count

    def to_dot(self) -> str:
        lines = ["digraph tags {"]
        for tag in self.tags():
            size = len(self._graph.nodes[tag]["episodes"])
            lines.append(f'  "{tag}" [label="{tag} ({size})"];')
        for parent, child in sorted(self._graph.edges()):
            lines.append(f'  "{parent}" -> "{child}";')
        lines.append("}")
        return "\n".join(lines)
