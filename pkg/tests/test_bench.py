import numpy as np
import pytest

from swiftmem.core.config import StoreConfig
from swiftmem.services.bench import (
    FAMILY_SIZE,
    CorpusParams,
    ablate_temporal,
    build_corpus,
    evidence_recall,
    family_tags,
    hits_match,
    hinted_intervals,
    measure_exhaustive,
    measure_indexed,
    recall_against,
    run_bench,
    scale_study,
    tag_vectors,
)

SMALL = CorpusParams(n=600, tags=20, users=2, queries=12, seed=11)
CONFIG = StoreConfig(d=32)


def test_family_tags():
    names, relations = family_tags(7)
    assert names == [
        "topic_000",
        "topic_000_1",
        "topic_000_2",
        "topic_000_3",
        "topic_000_4",
        "topic_001",
        "topic_001_1",
    ]
    assert relations[0] == ("topic_000", "topic_000_1")
    assert relations[-1] == ("topic_001", "topic_001_1")
    assert len(relations) == 5


def test_tag_vectors_are_unit_and_clustered():
    vectors = tag_vectors(np.random.default_rng(0), 10, 64)
    assert np.allclose(np.linalg.norm(vectors, axis=1), 1.0)
    # a child is closer to its own root than to the other family's
    assert vectors[1] @ vectors[0] > vectors[1] @ vectors[5]


def test_corpus_is_seed_deterministic():
    a = build_corpus(SMALL, CONFIG)
    b = build_corpus(SMALL, CONFIG)
    assert np.array_equal(a.topics, b.topics)
    assert np.array_equal(a.timestamps, b.timestamps)
    assert [q.target for q in a.queries] == [q.target for q in b.queries]
    assert all(np.array_equal(x.embedding, y.embedding) for x, y in zip(a.queries, b.queries))

    other = build_corpus(CorpusParams(n=600, tags=20, users=2, queries=12, seed=12), CONFIG)
    assert not np.array_equal(a.topics, other.topics)


def test_corpus_shape():
    corpus = build_corpus(SMALL, CONFIG)
    engine = corpus.engine
    assert len(engine) == SMALL.n
    assert len(engine.dag) == SMALL.tags
    assert engine.dag.edge_count == SMALL.tags - SMALL.tags // FAMILY_SIZE
    assert sum(engine.temporal.count(u) for u in engine.temporal.users()) == SMALL.n

    for eid in range(0, SMALL.n, 37):
        ep = engine.get_episode(eid)
        assert corpus.tag_names[corpus.topics[eid]] in ep.tags
        assert ep.timestamp == corpus.timestamps[eid]

    for query in corpus.queries:
        target = engine.get_episode(query.target)
        assert query.user == target.user
        assert query.correct.contains(target.timestamp)
        assert np.linalg.norm(query.embedding) == pytest.approx(1.0)


def test_empty_corpus():
    corpus = build_corpus(CorpusParams(n=0, tags=10, queries=5), CONFIG)
    assert len(corpus.engine) == 0
    assert corpus.queries == []

    report = run_bench(CorpusParams(n=0, tags=10, queries=5), CONFIG)
    assert report.queries == 0
    assert report.candidate_counts == []
    assert report.consolidation is None


def test_recall_helpers():
    assert recall_against([(1, 0.9), (2, 0.8)], [(2, 0.8), (3, 0.7)]) == 0.5
    assert recall_against([], []) == 1.0
    assert hits_match([(1, 0.5), (2, 0.25)], [(1, 0.5), (2, 0.25 + 1e-12)])
    assert not hits_match([(1, 0.5), (2, 0.25)], [(2, 0.25), (1, 0.5)])
    assert not hits_match([(1, 0.5)], [(1, 0.6)])
    assert evidence_recall([], []) == 0.0


def test_hints_include_target_interval():
    corpus = build_corpus(SMALL, CONFIG)
    query = corpus.queries[0]
    assert hinted_intervals(query) == (query.correct, query.distractor)
    assert hinted_intervals(query, distractor_only=True) == (query.distractor,)


def test_indexed_never_examines_more_than_the_user_scan():
    corpus = build_corpus(SMALL, CONFIG)
    for query in corpus.queries:
        indexed = measure_indexed(corpus.engine, query, (), CONFIG.top_k_results)
        full = measure_exhaustive(corpus.engine, query, CONFIG.top_k_results)
        assert indexed.candidates <= full.candidates
        assert full.candidates == corpus.engine.temporal.count(query.user)
        hinted = measure_indexed(
            corpus.engine, query, hinted_intervals(query), CONFIG.top_k_results
        )
        assert hinted.candidates <= indexed.candidates


def test_run_bench_report():
    report = run_bench(SMALL, CONFIG)
    assert report.n == SMALL.n
    assert report.queries == SMALL.queries
    assert report.d == 32
    assert len(report.candidate_counts) == SMALL.queries
    assert max(report.candidate_counts) <= SMALL.n
    assert report.candidates.max == max(report.candidate_counts)
    assert 0.0 <= report.recall_vs_exhaustive <= 1.0
    assert report.indexed.mean_us > 0
    assert report.exhaustive.mean_us > 0


def test_bench_consolidation_block():
    report = run_bench(SMALL, CONFIG)
    block = report.consolidation
    assert block.hits_identical
    assert block.fragmentation_before > 0.0
    assert block.fragmentation_after < block.fragmentation_before
    assert block.moved > 0


def test_workers_do_not_change_results():
    single = run_bench(SMALL, CONFIG, workers=1, consolidate=False)
    threaded = run_bench(SMALL, CONFIG, workers=4, consolidate=False)
    assert single.candidate_counts == threaded.candidate_counts
    assert single.recall_vs_exhaustive == threaded.recall_vs_exhaustive
    assert single.evidence_recall == threaded.evidence_recall


def test_ablation_is_monotone_in_hint_ratio():
    report = ablate_temporal(SMALL, [0.0, 0.5, 1.0], CONFIG)
    assert [r.hinted_queries for r in report.rows] == [0, 6, 12]
    candidates = [r.candidates.mean for r in report.rows]
    evidence = [r.evidence_recall for r in report.rows]
    assert candidates == sorted(candidates, reverse=True)
    assert evidence == sorted(evidence)
    assert candidates[-1] < candidates[0]


def test_distractor_only_ablation():
    report = ablate_temporal(SMALL, [0.0, 1.0], CONFIG, distractor_only=True)
    assert report.distractor_only
    assert report.rows[1].candidates.mean <= report.rows[0].candidates.mean


def test_ablation_on_empty_corpus():
    report = ablate_temporal(CorpusParams(n=0, tags=5), [0.0, 1.0], CONFIG)
    assert [r.hint_ratio for r in report.rows] == [0.0, 1.0]
    assert all(r.hinted_queries == 0 for r in report.rows)


def test_scale_study():
    report = scale_study([200, 800], CorpusParams(tags=10, queries=5), CONFIG)
    assert [r.n for r in report.rows] == [200, 800]
    assert report.indexed_growth > 0
    assert report.exhaustive_growth > 0


@pytest.mark.slow
class TestAcceptanceScale:
    """N=100k runs with the default store configuration."""

    params = CorpusParams(n=100_000, tags=500, queries=200)

    def test_speedup_over_exhaustive(self):
        report = run_bench(self.params, StoreConfig(), consolidate=False)
        assert report.exhaustive.mean_us >= 10 * report.indexed.mean_us
        assert report.candidates.mean <= 0.2 * self.params.n

    def test_scaling_shape(self):
        report = scale_study([10_000, 100_000], self.params)
        assert report.indexed_growth <= 3.0
        assert report.exhaustive_growth >= 8.0

    def test_consolidation(self):
        block = run_bench(self.params, StoreConfig()).consolidation
        assert block.hits_identical
        assert block.fragmentation_after < block.fragmentation_before
        assert block.latency_after.mean_us <= 1.1 * block.latency_before.mean_us

    def test_temporal_ablation(self):
        report = ablate_temporal(self.params, [0.0, 0.5, 1.0], StoreConfig())
        candidates = [r.candidates.mean for r in report.rows]
        latency = [r.latency.mean_us for r in report.rows]
        evidence = [r.evidence_recall for r in report.rows]
        assert candidates == sorted(candidates, reverse=True)
        assert latency[-1] <= latency[0]
        assert evidence == sorted(evidence)
