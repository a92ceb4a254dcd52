"""Document ingestion, sentence splitting, and partition validation."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chunklab import (
    CorpusError,
    Document,
    PartitionError,
    load_jsonl,
    split_sentences,
    validate_partition,
)

from .conftest import make_doc


class TestSplitSentences:
    def test_three_ascii_sentences(self):
        got = split_sentences("A. B? C!")
        assert [(s.start, s.end) for s in got] == [(0, 2), (3, 5), (6, 8)]
        assert [s.content for s in got] == ["A.", "B?", "C!"]

    def test_no_punctuation_single_sentence(self):
        got = split_sentences("no punctuation")
        assert len(got) == 1
        assert got[0].content == "no punctuation"

    def test_cjk_byte_offsets(self):
        text = "你好。再见。"
        got = split_sentences(text)
        assert len(got) == 2
        # Oracle: byte offsets computed from the encoded prefix lengths.
        encoded = text.encode("utf-8")
        first = "你好。".encode("utf-8")
        assert (got[0].start, got[0].end) == (0, len(first))
        assert (got[1].start, got[1].end) == (len(first), len(encoded))
        assert encoded[got[1].start : got[1].end].decode("utf-8") == "再见。"

    def test_terminal_requires_whitespace_for_ascii(self):
        assert len(split_sentences("pi is 3.14 exactly")) == 1
        assert len(split_sentences("Really?! Yes.")) == 2

    def test_empty_and_whitespace(self):
        assert split_sentences("") == []
        assert split_sentences("   \n\t ") == []

    def test_trailing_text_without_terminal(self):
        got = split_sentences("First one. then a tail")
        assert [s.content for s in got] == ["First one.", "then a tail"]

    @given(st.text(min_size=1, max_size=200))
    @settings(max_examples=200)
    def test_deterministic_and_contents_match_offsets(self, text):
        a = split_sentences(text)
        b = split_sentences(text)
        assert a == b
        encoded = text.encode("utf-8")
        for s in a:
            assert s.start < s.end
            assert encoded[s.start : s.end].decode("utf-8") == s.content
            assert s.content.strip()

    @given(st.text(min_size=1, max_size=200))
    @settings(max_examples=200)
    def test_resplit_of_sentence_content_is_identity(self, text):
        for s in split_sentences(text):
            again = split_sentences(s.content)
            assert [x.content for x in again] == [s.content]


class TestValidatePartition:
    def make(self, n):
        return make_doc("d", [f"Sentence number {i} here." for i in range(n)])

    def test_two_boundaries(self):
        doc = self.make(10)
        part = validate_partition(doc, [3, 7])
        assert part.k == 3
        assert [(c.start_sentence, c.end_sentence) for c in part.chunks] == [
            (0, 3),
            (3, 7),
            (7, 10),
        ]

    def test_empty_boundaries_single_chunk(self):
        doc = self.make(4)
        part = validate_partition(doc, [])
        assert part.k == 1
        assert part.chunks[0].text == doc.text

    def test_non_increasing_names_position(self):
        doc = self.make(10)
        with pytest.raises(PartitionError, match="non-increasing at position 1"):
            validate_partition(doc, [7, 3])

    def test_out_of_range_names_position(self):
        doc = self.make(10)
        with pytest.raises(PartitionError, match="position 0"):
            validate_partition(doc, [0])
        with pytest.raises(PartitionError, match="position 1"):
            validate_partition(doc, [3, 10])

    def test_duplicate_is_non_increasing(self):
        doc = self.make(10)
        with pytest.raises(PartitionError, match="non-increasing"):
            validate_partition(doc, [3, 3])

    @given(
        st.integers(min_value=1, max_value=20),
        st.data(),
    )
    @settings(max_examples=100)
    def test_round_trip_bytes(self, n, data):
        doc = self.make(n)
        k = data.draw(st.integers(min_value=0, max_value=max(0, n - 1)))
        bounds = sorted(
            data.draw(
                st.sets(st.integers(min_value=1, max_value=n - 1), min_size=0, max_size=k)
            )
        ) if n > 1 else []
        part = validate_partition(doc, bounds)
        assert "".join(c.text for c in part.chunks).encode("utf-8") == doc.encoded()


class TestLoadJsonl:
    def write(self, tmp_path, lines):
        p = tmp_path / "corpus.jsonl"
        p.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        return p

    def test_two_sentence_doc(self, tmp_path):
        p = self.write(tmp_path, [json.dumps({"id": "a", "text": "X. Y."})])
        docs = load_jsonl(p)
        assert len(docs) == 1
        assert docs[0].sentence_count == 2

    def test_empty_file(self, tmp_path):
        p = self.write(tmp_path, [])
        assert load_jsonl(p) == []

    def test_missing_text_names_line(self, tmp_path):
        p = self.write(
            tmp_path,
            [json.dumps({"id": "a", "text": "Ok."}), json.dumps({"id": "b"})],
        )
        with pytest.raises(CorpusError, match="line 2"):
            load_jsonl(p)

    def test_malformed_json_names_line(self, tmp_path):
        p = self.write(tmp_path, ['{"id": "a", "text": "Ok."}', "{nope"])
        with pytest.raises(CorpusError, match="line 2"):
            load_jsonl(p)

    def test_duplicate_id(self, tmp_path):
        p = self.write(
            tmp_path,
            [
                json.dumps({"id": "a", "text": "Ok."}),
                json.dumps({"id": "a", "text": "Again."}),
            ],
        )
        with pytest.raises(CorpusError, match="duplicate id"):
            load_jsonl(p)

    def test_empty_text_rejected(self, tmp_path):
        p = self.write(tmp_path, [json.dumps({"id": "a", "text": "  "})])
        with pytest.raises(CorpusError, match="empty text"):
            load_jsonl(p)

    def test_meta_preserved_in_error_context(self, tmp_path):
        p = self.write(
            tmp_path,
            [json.dumps({"id": "a", "text": "", "meta": {"source": "unit"}})],
        )
        with pytest.raises(CorpusError, match="source"):
            load_jsonl(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="not found"):
            load_jsonl(tmp_path / "nope.jsonl")


def test_document_from_text_reconstruction():
    text = "Leading words here. Second sentence!  Third one?  "
    doc = Document.from_text("d", text)
    part = validate_partition(doc, [1, 2])
    assert "".join(c.text for c in part.chunks) == text
