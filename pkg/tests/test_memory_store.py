import unittest

import numpy as np

from swiftmem.core.config import StoreConfig
from swiftmem.core.errors import (
    DimensionMismatch,
    EpisodeNotFound,
    InvalidEpisode,
    InvalidTag,
    ZeroNorm,
)
from swiftmem.storage.memory_store import MemoryStore


class TestMemoryStore(unittest.TestCase):
    def setUp(self):
        self.store = MemoryStore(StoreConfig(d=8))
        self.vec = np.arange(1, 9, dtype=np.float64)

    def test_first_store_gets_id_zero(self):
        eid = self.store.store_episode("u", "hello", 0, self.vec)
        self.assertEqual(eid, 0)
        self.assertEqual(self.store.n_mem, 1)
        self.assertEqual(self.store.next_id, 1)

    def test_ids_are_dense_and_monotone(self):
        ids = [self.store.store_episode("u", f"e{i}", i, self.vec) for i in range(5)]
        self.assertEqual(ids, [0, 1, 2, 3, 4])
        self.assertEqual(list(self.store.ids()), ids)
        self.assertGreater(self.store.next_id, max(ids))

    def test_dimension_mismatch(self):
        store = MemoryStore(StoreConfig(d=384))
        with self.assertRaises(DimensionMismatch):
            store.store_episode("u", "x", 0, np.ones(383))
        self.assertEqual(store.n_mem, 0)

    def test_invalid_tag_rejected(self):
        with self.assertRaises(InvalidTag):
            self.store.store_episode("u", "x", 0, self.vec, tags=["Bad Tag"])
        with self.assertRaises(InvalidTag):
            self.store.store_episode("u", "x", 0, self.vec, tags=["a_b_c_d"])
        self.assertEqual(self.store.n_mem, 0)

    def test_zero_norm_and_bad_timestamp(self):
        with self.assertRaises(ZeroNorm):
            self.store.store_episode("u", "x", 0, np.zeros(8))
        with self.assertRaises(InvalidEpisode):
            self.store.store_episode("u", "x", -1, self.vec)
        with self.assertRaises(InvalidEpisode):
            self.store.store_episode("", "x", 0, self.vec)

    def test_get_round_trip(self):
        eid = self.store.store_episode(
            "alice", "walked the dog", 1234, self.vec, tags=["walk", "dog", "dog"]
        )
        ep = self.store.get_episode(eid)
        self.assertEqual(ep.user, "alice")
        self.assertEqual(ep.content, "walked the dog")
        self.assertEqual(ep.timestamp, 1234)
        self.assertEqual(ep.tags, ("dog", "walk"))
        self.assertTrue(np.array_equal(ep.embedding, self.vec))

    def test_get_unknown_raises(self):
        with self.assertRaises(EpisodeNotFound):
            self.store.get_episode(99)

    def test_returned_embedding_is_a_copy(self):
        eid = self.store.store_episode("u", "x", 0, self.vec)
        ep = self.store.get_episode(eid)
        ep.embedding[0] = 100.0
        self.assertEqual(self.store.get_episode(eid).embedding[0], 1.0)

    def test_same_as_compares_embedding_bits(self):
        a = self.store.store_episode("u", "x", 0, self.vec)
        ep = self.store.get_episode(a)
        self.assertTrue(ep.same_as(self.store.get_episode(a)))

        other = MemoryStore(StoreConfig(d=8))
        other.store_episode("u", "x", 0, self.vec + 1e-12)
        self.assertFalse(ep.same_as(other.get_episode(0)))

    def test_explicit_id_cannot_be_reused(self):
        self.store.store_episode("u", "x", 0, self.vec, episode_id=3)
        self.assertEqual(self.store.next_id, 4)
        with self.assertRaises(InvalidEpisode):
            self.store.store_episode("u", "y", 0, self.vec, episode_id=3)


if __name__ == "__main__":
    unittest.main()
