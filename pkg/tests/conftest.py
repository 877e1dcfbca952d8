import json
from pathlib import Path

import numpy as np
import pytest

from swiftmem.adapters.offline import OfflineEmbedder
from swiftmem.core.config import StoreConfig
from swiftmem.engine import SwiftMem

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLES = Path(__file__).parent.parent / "samples"

DAY_MS = 86_400_000
T0 = 1_672_531_200_000  # 2023-01-01T00:00:00Z


def random_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_corpus(rng, d=16, n_tags=20, n_eps=150):
    engine = SwiftMem(StoreConfig(d=d, k=int(rng.integers(1, 6)), d_max=int(rng.integers(0, 3))))
    tags = [f"t{i:02d}" for i in range(n_tags)]
    for tag in tags:
        engine.define_tag(tag, random_unit(rng, d))
    for _ in range(n_tags):
        a, b = rng.choice(n_tags, size=2, replace=False)
        engine.relate(tags[a], tags[b])
    for i in range(n_eps):
        chosen = sorted({tags[j] for j in rng.choice(n_tags, size=int(rng.integers(0, 3)))})
        engine.store_episode(
            f"u{rng.integers(3)}",
            f"episode {i}",
            int(T0 + rng.integers(0, 100) * DAY_MS),
            rng.normal(size=d),
            chosen,
        )
    return engine


@pytest.fixture
def config():
    return StoreConfig(d=64)


@pytest.fixture
def engine(config):
    return SwiftMem(config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def embedder(config):
    return OfflineEmbedder(config.d)


@pytest.fixture
def loaded_engine(engine):
    """A small two-user store ingested through the offline adapters."""
    texts = [
        ("alice", "I walked my dog in Paris along the river", T0),
        ("alice", "My dog loves long walks in the park", T0 + 2 * DAY_MS),
        ("alice", "Cooking italian pasta with fresh basil tonight", T0 + 40 * DAY_MS),
        ("alice", "Planning a camping trip to the mountains", T0 + 70 * DAY_MS),
        ("bob", "Python programming project with unit tests", T0 + DAY_MS),
        ("bob", "Debugging python code late at night", T0 + 3 * DAY_MS),
        ("bob", "Camping gear list for the summer trip", T0 + 90 * DAY_MS),
    ]
    for user, text, ts in texts:
        engine.ingest_text(user, text, ts)
    return engine


@pytest.fixture
def conversation_lines():
    return [
        json.dumps(
            {
                "user": "alice",
                "session": "s1",
                "turns": [
                    {"speaker": "alice", "text": "I walked my dog in Paris", "ts": 1000},
                    {"speaker": "agent", "text": "How was the walk?", "ts": 2000},
                ],
            }
        )
    ]


@pytest.fixture
def sample_conversations():
    return SAMPLES / "conversations.jsonl"
