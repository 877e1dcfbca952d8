"""
Pluggable tagging and embedding providers.

Any embedder must expose `d` and `embed(text) -> np.ndarray`; any tagger
`generate_tags(content) -> TagProposal`. Remote providers speak JSON over
HTTP (see docs/adapters.md); offline ones are deterministic and hermetic.
"""

from typing import Callable, Optional, Protocol

import numpy as np

from swiftmem.adapters.offline import OfflineEmbedder, OfflineTagger, offline_tagger
from swiftmem.adapters.remote import (
    EmbeddingFallbackTagger,
    LLMTagger,
    RemoteEmbedder,
    parse_tag_response,
)
from swiftmem.schemas.adapters import EmbedderSpec, TaggerSpec, TagProposal


class Embedder(Protocol):
    d: int

    def embed(self, text: str) -> np.ndarray: ...


class Tagger(Protocol):
    def generate_tags(self, content: str) -> TagProposal: ...


def build_embedder(spec: EmbedderSpec, api_key: Optional[str] = None) -> Embedder:
    if spec.mode == "remote":
        return RemoteEmbedder(
            spec.endpoint,
            spec.d,
            model=spec.model,
            api_key=api_key,
            timeout_ms=spec.timeout_ms,
        )
    return OfflineEmbedder(spec.d)


def build_tagger(
    spec: TaggerSpec,
    embedder: Embedder,
    dag_provider: Callable[[], object],
    api_key: Optional[str] = None,
    fallback_threshold: float = 0.5,
) -> Tagger:
    if spec.mode == "remote":
        fallback = EmbeddingFallbackTagger(embedder, dag_provider, fallback_threshold)
        return LLMTagger(
            spec.endpoint,
            fallback,
            model=spec.model,
            api_key=api_key,
            timeout_ms=spec.timeout_ms,
        )
    return OfflineTagger()


__all__ = [
    "Embedder",
    "Tagger",
    "OfflineEmbedder",
    "OfflineTagger",
    "offline_tagger",
    "RemoteEmbedder",
    "LLMTagger",
    "EmbeddingFallbackTagger",
    "parse_tag_response",
    "build_embedder",
    "build_tagger",
]
