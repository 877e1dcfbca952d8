import json
import logging
import re
from typing import Callable, Optional

import httpx
import numpy as np
from pydantic import ValidationError

from swiftmem.adapters.offline import MAX_TAGS, offline_tagger
from swiftmem.core.errors import (
    DimensionMismatch,
    EmbedderFailure,
    EmptyContent,
    EmptyText,
    RemoteUnavailable,
)
from swiftmem.schemas.adapters import RawTagResponse, TagProposal

logger = logging.getLogger(__name__)

TAG_PROMPT = """You are a semantic tag extraction assistant.
Your task is to:
1. Extract 3-8 meaningful tags that capture the main topics, themes, and contexts
2. Identify hierarchical relationships between these tags (parent-child)

Guidelines for tags:
- Tags should be lowercase, single words or short phrases (max 3 words)
- Focus on: topics, activities, locations, entities, emotions, intents
- Prioritize specific over generic (e.g., 'python_programming' over 'technology')
- Use underscores for multi-word tags (e.g., 'machine_learning')
- Avoid overly broad tags like 'conversation' or 'chat'

Guidelines for relations:
- parent tag = broader/more abstract concept
- child tag = more specific concept
- Only include relations that are clear from the conversation
- Examples:
  * parent: 'work', child: 'programming'
  * parent: 'lgbtq', child: 'transgender_story'
  * parent: 'food', child: 'italian_cuisine'
  * parent: 'identity', child: 'self_acceptance'

Return ONLY a JSON object:
{
  "tags": ["tag1", "tag2", "tag3", ...],
  "relations": [
    {"parent": "broader_tag", "child": "specific_tag"},
    ...
  ]
}
If no clear hierarchical relations exist, return an empty 'relations' array."""

_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$", re.MULTILINE)


def _headers(api_key: Optional[str]) -> dict:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return headers


def parse_tag_response(text: str) -> TagProposal:
    """
    Parses the model's reply into a validated proposal. Tolerates code
    fences and prose around the JSON object; raises ValueError when no
    object can be recovered.
    """
    body = _FENCE.sub("", text.strip())
    start, end = body.find("{"), body.rfind("}")
    if start < 0 or end <= start:
        raise ValueError("no JSON object in tagger response")
    try:
        raw = RawTagResponse.model_validate(json.loads(body[start : end + 1]))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ValueError(f"malformed tagger response: {e}") from e

    proposal = TagProposal.normalized(
        raw.tags, [(r.parent, r.child) for r in raw.relations]
    )
    if len(proposal.tags) > MAX_TAGS:
        tags = proposal.tags[:MAX_TAGS]
        kept = set(tags)
        relations = [r for r in proposal.relations if r[0] in kept and r[1] in kept]
        proposal = TagProposal(tags=tags, relations=relations)
    return proposal


class RemoteEmbedder:
    """Embeddings endpoint client; request body {"model", "input"}."""

    def __init__(
        self,
        endpoint: str,
        d: int,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout_ms: int = 10_000,
        client: Optional[httpx.Client] = None,
    ):
        self.endpoint = endpoint
        self.d = d
        self.model = model
        self._headers = _headers(api_key)
        self._client = client or httpx.Client(timeout=timeout_ms / 1000.0)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")

        try:
            resp = self._client.post(
                self.endpoint,
                json={"model": self.model, "input": text},
                headers=self._headers,
            )
            resp.raise_for_status()
            payload = resp.json()
        except httpx.HTTPError as e:
            raise RemoteUnavailable(f"embedding endpoint failed: {e}") from e
        except json.JSONDecodeError as e:
            raise EmbedderFailure(f"embedding endpoint returned non-JSON: {e}") from e

        try:
            if "data" in payload:
                values = payload["data"][0]["embedding"]
            else:
                values = payload["embedding"]
            vec = np.asarray(values, dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise EmbedderFailure(f"unexpected embedding response: {e}") from e

        if vec.ndim != 1 or vec.shape[0] != self.d:
            raise DimensionMismatch(self.d, int(vec.size))
        norm = np.linalg.norm(vec)
        if norm == 0.0 or not np.isfinite(norm):
            raise EmbedderFailure("embedding endpoint returned a zero vector")
        return vec / norm


class EmbeddingFallbackTagger:
    """
    Used when the LLM tagger fails: existing tags whose embeddings are close
    to the content, followed by the offline extractor's tokens.
    """

    def __init__(
        self,
        embedder,
        dag_provider: Callable[[], object],
        threshold: float = 0.5,
    ):
        self.embedder = embedder
        self.dag_provider = dag_provider
        self.threshold = threshold

    def generate_tags(self, content: str) -> TagProposal:
        offline = offline_tagger(content)
        dag = self.dag_provider()
        if dag is None or len(dag) == 0:
            return offline

        try:
            q = self.embedder.embed(content)
        except Exception as e:
            logger.warning("Fallback tagger could not embed content: %s", e)
            return offline

        tags, matrix, norms = dag.tag_matrix()
        sims = (matrix @ q) / (norms * np.linalg.norm(q))
        near = sorted(
            ((float(s), t) for s, t in zip(sims, tags) if s >= self.threshold),
            key=lambda st: (-st[0], st[1]),
        )

        merged = [t for _, t in near]
        for tag in offline.tags:
            if tag not in merged:
                merged.append(tag)
        merged = merged[:MAX_TAGS]
        kept = set(merged)
        relations = [r for r in offline.relations if r[0] in kept and r[1] in kept]
        return TagProposal(tags=merged, relations=relations)


class LLMTagger:
    """
    Chat-completion client sending the tag-extraction prompt at temperature
    0. Any failure drops to the fallback tagger with a warning.
    """

    def __init__(
        self,
        endpoint: str,
        fallback,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout_ms: int = 10_000,
        client: Optional[httpx.Client] = None,
    ):
        self.endpoint = endpoint
        self.fallback = fallback
        self.model = model
        self._headers = _headers(api_key)
        self._client = client or httpx.Client(timeout=timeout_ms / 1000.0)
        self.fallbacks = 0

    def _request(self, content: str) -> str:
        resp = self._client.post(
            self.endpoint,
            json={
                "model": self.model,
                "temperature": 0,
                "messages": [
                    {"role": "system", "content": TAG_PROMPT},
                    {"role": "user", "content": content},
                ],
            },
            headers=self._headers,
        )
        resp.raise_for_status()
        reply = resp.json()["choices"][0]["message"]["content"]
        if not isinstance(reply, str):
            raise ValueError(f"reply content is {type(reply).__name__}, not text")
        return reply

    def generate_tags(self, content: str) -> TagProposal:
        if not content or not content.strip():
            raise EmptyContent("cannot tag empty content")
        try:
            return parse_tag_response(self._request(content))
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as e:
            self.fallbacks += 1
            logger.warning("LLM tag generation failed (%s); using fallback", e)
            return self.fallback.generate_tags(content)
