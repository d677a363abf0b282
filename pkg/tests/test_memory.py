import itertools
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamnav import errors
from hamnav.memory import EMBED_DIM, Experience, ExperienceStore, cosine, embed


class TestEmbed:
    def test_self_similarity_one(self):
        v = embed("a box on your left")
        assert cosine(v, v) == pytest.approx(1.0)

    def test_disjoint_tokens_zero_similarity(self):
        a, b = "red pylon corridor", "green chair office"
        # fixture chosen collision-free: verify hash buckets are disjoint
        buckets_a = {zlib.crc32(t.encode()) % EMBED_DIM for t in a.split()}
        buckets_b = {zlib.crc32(t.encode()) % EMBED_DIM for t in b.split()}
        assert buckets_a.isdisjoint(buckets_b)
        assert cosine(embed(a), embed(b)) == 0.0

    def test_empty_text_zero_vector(self):
        v = embed("")
        assert not v.any()
        assert cosine(v, embed("anything")) == 0.0

    def test_unit_norm(self):
        assert np.linalg.norm(embed("one two three two")) == pytest.approx(1.0)

    def test_case_and_punctuation_insensitive(self):
        assert cosine(embed("Box, Cone!"), embed("box cone")) == pytest.approx(1.0)

    @given(st.text(min_size=1, max_size=60))
    def test_norm_is_zero_or_one(self, text):
        norm = np.linalg.norm(embed(text))
        assert norm == pytest.approx(0.0) or norm == pytest.approx(1.0)


class TestRecord:
    def test_append_to_empty(self):
        store = ExperienceStore()
        store.record(store.make_experience(0, "sd", 1, "move forward"))
        assert len(store) == 1

    def test_duplicate_step_rejected(self):
        store = ExperienceStore()
        store.record(store.make_experience(3, "sd", 1, "stop"))
        with pytest.raises(errors.NonMonotonicStep):
            store.record(store.make_experience(3, "sd2", 2, "stop"))
        with pytest.raises(errors.NonMonotonicStep):
            store.record(store.make_experience(1, "sd3", 2, "stop"))

    def test_hundred_appends_preserve_order(self):
        store = ExperienceStore()
        for t in range(100):
            store.record(store.make_experience(t, f"scene {t}", t, "move forward"))
        assert [e.step for e in store.items] == list(range(100))


class TestRetrieve:
    def test_verbatim_query_returns_one(self):
        store = ExperienceStore()
        store.record(store.make_experience(0, "pylon on your left", 1, "move forward"))
        result = store.retrieve("pylon on your left")
        assert result is not None
        exp, sim = result
        assert exp.step == 0
        assert sim == pytest.approx(1.0)

    def test_empty_store_returns_none(self):
        assert ExperienceStore().retrieve("anything") is None

    def test_engineered_overlap_ranking(self):
        texts = {
            "none": "alpha beta gamma delta",
            "half": "red pylon alpha beta",
            "high": "red pylon crate corridor",
        }
        query = "red pylon crate hallway"
        store = ExperienceStore()
        for t, (_, text) in enumerate(texts.items()):
            store.record(store.make_experience(t, text, t, "move forward"))
        # brute-force cosine oracle over all stored texts
        sims = {name: cosine(embed(query), embed(text)) for name, text in texts.items()}
        assert sims["none"] < sims["half"] < sims["high"]
        exp, sim = store.retrieve(query)
        assert exp.scene_description == texts["high"]
        assert sim == pytest.approx(sims["high"])

    def test_tie_goes_to_most_recent(self):
        store = ExperienceStore()
        store.record(store.make_experience(0, "same text", 1, "move forward"))
        store.record(store.make_experience(5, "same text", 2, "turn left"))
        exp, _ = store.retrieve("same text")
        assert exp.step == 5

    def test_similarity_in_unit_interval(self):
        store = ExperienceStore()
        corpus = ["box", "box cone", "cone mat jar", "totally different words here"]
        for t, text in enumerate(corpus):
            store.record(store.make_experience(t, text, t, "stop"))
        for query in corpus + ["box mat", ""]:
            result = store.retrieve(query)
            if result is not None:
                assert 0.0 <= result[1] <= 1.0 + 1e-12

    def test_permutation_invariance(self):
        texts = ["red pylon", "blue crate", "green door", "yellow sign"]
        query = "blue crate near door"
        results = []
        for perm in itertools.permutations(enumerate(texts)):
            store = ExperienceStore()
            for step, text in sorted(perm):
                store.record(store.make_experience(step, text, step, "stop"))
            exp, sim = store.retrieve(query)
            results.append((exp.scene_description, round(sim, 12)))
        assert len(set(results)) == 1
