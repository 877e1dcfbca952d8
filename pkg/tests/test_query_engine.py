import networkx as nx
import numpy as np
import pytest

from conftest import DAY_MS, T0, random_corpus, random_unit
from swiftmem.core.config import StoreConfig
from swiftmem.engine import SwiftMem
from swiftmem.index.embedding import cosine
from swiftmem.index.tag_dag import TagDag
from swiftmem.index.temporal import TimeInterval
from swiftmem.services.query_engine import route_tags


def _random_dag(rng, n_tags, d):
    dag = TagDag(d=d)
    for i in range(n_tags):
        dag.upsert_tag(f"t{i:03d}", random_unit(rng, d))
    return dag


def test_route_empty_dag():
    assert route_tags(np.ones(4), TagDag(d=4), 5) == []


def test_route_clamps_to_all_tags(rng):
    dag = _random_dag(rng, 7, 8)
    q = rng.normal(size=8)
    routed = route_tags(q, dag, 50)
    assert sorted(t for t, _ in routed) == dag.tags()
    sims = [s for _, s in routed]
    assert sims == sorted(sims, reverse=True)


def test_route_ties_by_tag_name():
    dag = TagDag(d=2)
    for tag in ["zeta", "alpha", "mid"]:
        dag.upsert_tag(tag, [1.0, 0.0])
    assert [t for t, _ in route_tags([1.0, 0.0], dag, 2)] == ["alpha", "mid"]


def test_route_matches_full_sort_oracle(rng):
    d = 32
    for _ in range(5):
        dag = _random_dag(rng, 500, d)
        vectors = {t: dag.node(t).embedding for t in dag.tags()}
        for _ in range(100):
            q = rng.normal(size=d)
            oracle = sorted(
                ((t, cosine(q, v)) for t, v in vectors.items()),
                key=lambda h: (-h[1], h[0]),
            )[:5]
            routed = route_tags(q, dag, 5)
            assert [t for t, _ in routed] == [t for t, _ in oracle]
            assert np.allclose([s for _, s in routed], [s for _, s in oracle], atol=1e-9)


def test_plan_for_event_query_routes_through_tags(loaded_engine):
    plan = loaded_engine.queries.plan(
        "When is Melanie planning on going camping?", "alice", T0
    )
    assert plan.intervals == ()
    assert 0 < len(plan.seed_tags) <= loaded_engine.config.k
    seeds = {t for t, _ in plan.seed_tags}
    assert seeds <= set(plan.expanded_tags)


def test_plan_for_temporal_query_still_routes(loaded_engine):
    plan = loaded_engine.queries.plan("what happened last week", "alice", T0 + 10 * DAY_MS)
    assert plan.intervals == (TimeInterval(T0 + DAY_MS, T0 + 8 * DAY_MS),)
    assert plan.seed_tags
    assert set(plan.timings) >= {"embed", "temporal_parse", "route", "expand"}


def test_plan_is_deterministic(loaded_engine):
    a = loaded_engine.queries.plan("dog walks in May 2023", "alice", T0)
    b = loaded_engine.queries.plan("dog walks in May 2023", "alice", T0)
    assert a == b
    assert np.array_equal(a.embedding, b.embedding)


def test_plan_counts_similarity_work(loaded_engine):
    engine = loaded_engine
    before = engine.queries.stats["similarity_computations"]
    engine.queries.plan("dog", "alice", T0)
    assert engine.queries.stats["similarity_computations"] - before == len(engine.dag)


def test_empty_store_returns_nothing():
    result = SwiftMem(StoreConfig(d=16)).query("anything at all", "alice", T0)
    assert result.hits == []
    assert result.candidates_examined == 0


def test_intervals_covering_nothing(loaded_engine):
    result = loaded_engine.query(
        "dog in the park", "alice", intervals=[TimeInterval(0, 1)]
    )
    assert result.hits == []
    assert result.candidates_examined == 0
    assert not result.fallback


def test_temporal_query_narrows_to_window(loaded_engine):
    result = loaded_engine.query("dog", "alice", intervals=[TimeInterval(T0, T0 + DAY_MS)])
    assert result.ids() == [0]


@pytest.mark.parametrize(
    "text, user",
    [
        ("dog walk in the park", "alice"),
        ("python code", "bob"),
        ("camping trip", "bob"),
        ("fresh basil", "alice"),
    ],
)
def test_full_routing_equals_exhaustive(loaded_engine, text, user):
    routed = loaded_engine.query(text, user, k=1000, top_k=10)
    exhaustive = loaded_engine.query(text, user, top_k=10, exhaustive=True)
    assert routed.hits == exhaustive.hits
    assert routed.candidates_examined == exhaustive.candidates_examined
    assert exhaustive.exhaustive


def test_exhaustive_examines_every_user_episode(loaded_engine):
    for user, count in (("alice", 4), ("bob", 3), ("carol", 0)):
        result = loaded_engine.query("anything", user, exhaustive=True)
        assert result.candidates_examined == count


def test_users_never_see_each_other(loaded_engine):
    bob_ids = loaded_engine.temporal.episode_ids("bob")
    for text in ("camping trip", "dog", "python", "pasta"):
        result = loaded_engine.query(text, "bob", k=1000)
        assert set(result.ids()) <= bob_ids


def test_untagged_store_falls_back_and_counts(rng):
    engine = SwiftMem(StoreConfig(d=8))
    for i in range(5):
        engine.store_episode("u", f"note {i}", T0 + i, rng.normal(size=8))
    result = engine.query("something", "u", T0)
    assert result.fallback
    assert result.candidates_examined == 5
    assert len(result.hits) == 5
    assert engine.stats().query_fallbacks == 1


def test_untagged_store_with_interval_uses_time_only(rng):
    engine = SwiftMem(StoreConfig(d=8))
    for i in range(5):
        engine.store_episode("u", f"note {i}", T0 + i * DAY_MS, rng.normal(size=8))
    result = engine.query("x", "u", intervals=[TimeInterval(T0 + DAY_MS, T0 + 3 * DAY_MS)])
    assert not result.fallback
    assert sorted(result.ids()) == [1, 2]


def _oracle(engine, plan, top_k):
    """Linear time filter, tag-membership filter and full cosine sort."""
    wanted = set(plan.expanded_tags)
    candidates = []
    for ep in engine.store.episodes():
        if ep.user != plan.user:
            continue
        if wanted and not wanted.intersection(ep.tags):
            continue
        if plan.intervals and not any(i.contains(ep.timestamp) for i in plan.intervals):
            continue
        candidates.append(ep)
    scored = sorted(
        ((ep.id, cosine(plan.embedding, ep.embedding)) for ep in candidates),
        key=lambda h: (-h[1], h[0]),
    )
    return scored[:top_k], len(candidates)


def _random_intervals(rng):
    intervals = []
    for _ in range(int(rng.integers(0, 3))):
        start = int(T0 + rng.integers(-5, 100) * DAY_MS)
        intervals.append(TimeInterval(start, start + int(rng.integers(1, 30)) * DAY_MS))
    return intervals


def test_retrieve_matches_brute_force_pipeline():
    rng = np.random.default_rng(99)
    cases = 0
    for _ in range(50):
        engine = random_corpus(rng)
        for _ in range(20):
            plan = engine.queries.plan_vector(
                rng.normal(size=16), f"u{rng.integers(3)}", intervals=_random_intervals(rng)
            )
            # expansion reaches exactly the nodes within d_max of a seed
            reach = set()
            for seed, _ in plan.seed_tags:
                reach |= set(
                    nx.single_source_shortest_path_length(
                        engine.dag.graph, seed, cutoff=engine.config.d_max
                    )
                )
            assert set(plan.expanded_tags) == reach

            top_k = int(rng.integers(1, 15))
            result = engine.queries.retrieve(plan, top_k)
            expected, n_candidates = _oracle(engine, plan, top_k)
            assert result.ids() == [i for i, _ in expected]
            assert np.allclose(
                [s for _, s in result.hits], [s for _, s in expected], atol=1e-9
            )
            assert result.candidates_examined == n_candidates
            cases += 1
    assert cases == 1000
