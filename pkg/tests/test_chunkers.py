"""Baseline chunking strategies: length targeting, token windows, and
similarity splitting."""

import numpy as np
import pytest

from chunklab import ChunkerConfig, StubBackend, validate_partition
from chunklab.chunkers import (
    fixed_length,
    run_chunker,
    semantic_similarity,
    sentence_window,
    strategy_label,
)
from chunklab.errors import ConfigError

from .conftest import DISJOINT_SHIFT, make_doc


def doc_with_sentence_chars(n, chars_per_sentence):
    # "Sxxx...x." with exact content length per sentence.
    sentences = ["S" + "x" * (chars_per_sentence - 2) + "." for _ in range(n)]
    return make_doc("d", sentences)


class TestFixedLength:
    def test_four_sentences_target_200(self):
        doc = doc_with_sentence_chars(4, 100)
        part = fixed_length(doc, 200)
        assert list(part.boundaries) == [2]
        assert part.k == 2

    def test_target_larger_than_document(self):
        doc = doc_with_sentence_chars(3, 50)
        assert fixed_length(doc, 10_000).k == 1

    def test_one_chunk_per_sentence(self):
        doc = doc_with_sentence_chars(10, 40)
        assert fixed_length(doc, 40).k == 10

    def test_chunks_meet_target_except_final(self):
        doc = doc_with_sentence_chars(7, 30)
        part = fixed_length(doc, 70)
        lens = [sum(len(s.content) for s in doc.sentences[c.start_sentence : c.end_sentence])
                for c in part.chunks]
        assert all(v >= 70 for v in lens[:-1])


class TestSentenceWindow:
    def test_overshoot_beats_undershoot(self):
        # 100-token sentences, target 178: |200-178| < |100-178|.
        doc = make_doc("d", [" ".join(f"w{i}" for i in range(100)) + "." for _ in range(3)])
        part = sentence_window(doc, 178)
        assert list(part.boundaries) == [2]

    def test_single_sentence_doc(self):
        doc = make_doc("d", ["only one sentence."])
        assert sentence_window(doc, 178).k == 1

    def test_target_one_splits_everywhere(self):
        doc = make_doc("d", ["alpha beta gamma.", "delta epsilon.", "zeta."])
        part = sentence_window(doc, 1)
        assert part.k == 3

    def test_undershoot_beats_overshoot(self):
        # Tokens [5, 2]: cutting before the 4-token sentence keeps |5-6|=1
        # against |9-6|=3.
        doc = make_doc("d", ["a b c d e.", "f g h i.", "j k."])
        part = sentence_window(doc, 6)
        assert list(part.boundaries) == [1]

    def test_cjk_char_rule_counts_characters(self):
        doc = make_doc("d", ["你好吗。", "很好呀。"])
        part = sentence_window(doc, 4, token_rule="cjk_char")
        assert part.k == 2


class TestSemanticSimilarity:
    def test_identical_sentences_single_chunk(self, stub):
        doc = make_doc("d", ["the same sentence."] * 5)
        assert semantic_similarity(doc, stub, 0.75).k == 1

    def test_disjoint_halves_single_boundary(self, stub, disjoint_doc):
        part = semantic_similarity(disjoint_doc, stub, 0.5)
        assert list(part.boundaries) == [DISJOINT_SHIFT]

    def test_threshold_minus_one_single_chunk(self, stub, disjoint_doc):
        assert semantic_similarity(disjoint_doc, stub, -1.0).k == 1

    def test_threshold_above_max_cosine_splits_everywhere(self, stub, disjoint_doc):
        part = semantic_similarity(disjoint_doc, stub, 1.0 + 1e-9)
        assert part.k == disjoint_doc.sentence_count

    def test_config_rejects_threshold_out_of_range(self):
        with pytest.raises(ConfigError, match="similarity_threshold"):
            ChunkerConfig(strategy="semantic", similarity_threshold=1.5)


class TestConfigAndDispatch:
    def test_unknown_strategy(self):
        with pytest.raises(ConfigError, match="unknown strategy"):
            ChunkerConfig(strategy="zigzag")

    def test_run_chunker_dispatch(self, stub, disjoint_doc):
        fixed = run_chunker(disjoint_doc, ChunkerConfig(strategy="fixed", target_len=150))
        sent = run_chunker(disjoint_doc, ChunkerConfig(strategy="sentence", target_len=20))
        sem = run_chunker(
            disjoint_doc,
            ChunkerConfig(strategy="semantic", similarity_threshold=0.5),
            embedder=stub,
        )
        for part in (fixed, sent, sem):
            assert part.k >= 1

    def test_semantic_requires_embedder(self, disjoint_doc):
        with pytest.raises(ConfigError, match="embedder"):
            run_chunker(disjoint_doc, ChunkerConfig(strategy="semantic"))

    def test_strategy_label_flags_adaptation(self):
        assert strategy_label("fixed") == "fixed(sentence-granular)"
        assert strategy_label("semantic") == "semantic"


class TestValidityAndRoundTrip:
    def test_all_strategies_round_trip(self, stub):
        rng = np.random.default_rng(5)
        words = ["coral", "reef", "machine", "code", "lagoon", "graph", "algae", "pass"]
        for trial in range(25):
            n = int(rng.integers(1, 15))
            sentences = []
            for _ in range(n):
                k = int(rng.integers(2, 9))
                body = " ".join(words[int(i)] for i in rng.integers(0, len(words), k))
                sentences.append(body + rng.choice([".", "!", "?", "。"]))
            doc = make_doc(f"doc{trial}", sentences)
            parts = [
                fixed_length(doc, int(rng.integers(10, 120))),
                sentence_window(doc, int(rng.integers(1, 30))),
                semantic_similarity(doc, stub, float(rng.uniform(-0.5, 0.9))),
            ]
            for part in parts:
                revalidated = validate_partition(doc, part.boundaries)
                assert revalidated.boundaries == part.boundaries
                joined = "".join(c.text for c in part.chunks).encode("utf-8")
                assert joined == doc.encoded()
