"""
Deterministic, network-free tagging and embedding.

Both functions here depend only on the input bytes, the stopword list and a
fixed hash key, so they give the same output on every platform and run.
"""

import hashlib
import re
from collections import Counter
from typing import List

import numpy as np

from swiftmem.adapters.stopwords import STOPWORDS
from swiftmem.core.errors import EmptyContent, EmptyText
from swiftmem.index.tag_dag import is_valid_tag
from swiftmem.schemas.adapters import TagProposal

TOKEN = re.compile(r"[a-z0-9]+")
HASH_KEY = b"swiftmem-offline-v1"
MAX_TAGS = 8


def tokenize(text: str) -> List[str]:
    return TOKEN.findall(text.lower())


def offline_tagger(content: str) -> TagProposal:
    """
    Frequency-ranked unigrams and bigrams. A bigram joins two tokens that
    are adjacent in the text with no stopword between them; a selected
    bigram `a_b` gets the relation a -> a_b when `a` is selected too.
    """
    if not content or not content.strip():
        raise EmptyContent("cannot tag empty content")

    counts: Counter = Counter()
    prev = None
    for word in tokenize(content):
        if word in STOPWORDS or len(word) < 2:
            prev = None
            continue
        counts[word] += 1
        if prev is not None and prev != word:
            counts[f"{prev}_{word}"] += 1
        prev = word

    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tags = [tag for tag, _ in ranked if is_valid_tag(tag)][:MAX_TAGS]

    selected = set(tags)
    relations = []
    for tag in tags:
        if "_" in tag:
            head = tag.split("_", 1)[0]
            if head in selected:
                relations.append((head, tag))
    return TagProposal(tags=tags, relations=relations)


class OfflineTagger:
    def generate_tags(self, content: str) -> TagProposal:
        return offline_tagger(content)


def _bucket(feature: str, d: int):
    digest = hashlib.blake2b(
        feature.encode("utf-8"), digest_size=8, key=HASH_KEY
    ).digest()
    h = int.from_bytes(digest, "little")
    return h % d, (-1.0 if h >> 63 else 1.0)


class OfflineEmbedder:
    """
    Signed feature hashing of unigrams and adjacent bigrams into d buckets,
    L2-normalized.
    """

    def __init__(self, d: int = 384):
        self.d = d

    def features(self, text: str) -> List[str]:
        tokens = [t for t in tokenize(text) if t not in STOPWORDS]
        if not tokens:
            tokens = tokenize(text)
        feats = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        return feats or [text.strip()]

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")

        vec = np.zeros(self.d, dtype=np.float64)
        first = None
        for feature in self.features(text):
            idx, sign = _bucket(feature, self.d)
            vec[idx] += sign
            if first is None:
                first = idx

        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # every feature cancelled out in shared buckets
            vec[first] = 1.0
            norm = 1.0
        return vec / norm
