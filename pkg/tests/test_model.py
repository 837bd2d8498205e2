import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annotium.model import (
    Annotation,
    Attribute,
    AttributeValue,
    Collection,
    Document,
    DuplicateAttributeError,
    InvalidRangeError,
    InvalidSpanError,
    NotFoundError,
    Span,
)
from support import (
    SENTENCE_ROWS,
    SENTENCE_TEXT,
    brute_by_type,
    brute_matching,
    brute_overlapping,
    random_document,
    sentence_document,
)


class TestSpan:
    def test_orders_and_compares(self):
        assert Span(0, 4).length == 4
        assert Span(0, 4) == Span(0, 4)
        assert Span(0, 4) < Span(1, 2)

    @pytest.mark.parametrize("start,end", [(5, 3), (-1, 2), (-3, -1)])
    def test_rejects_malformed(self, start, end):
        with pytest.raises(InvalidSpanError):
            Span(start, end)

    def test_zero_width_allowed(self):
        assert Span(3, 3).length == 0


class TestAttributeValue:
    def test_string_set_normalizes(self):
        a = AttributeValue.string_set(["b", "a", "b"])
        b = AttributeValue.string_set(["a", "b"])
        assert a == b
        assert a.value == ("a", "b")

    def test_ref_set_normalizes(self):
        assert AttributeValue.ref_set([4, 0, 4]).value == (0, 4)

    def test_kind_payload_mismatch(self):
        with pytest.raises(TypeError):
            AttributeValue.ref("not an id")  # type: ignore[arg-type]
        with pytest.raises(TypeError):
            AttributeValue.string(7)  # type: ignore[arg-type]
        with pytest.raises(TypeError):
            AttributeValue.ref(-1)

    def test_referenced_ids(self):
        assert AttributeValue.ref(3).referenced_ids() == (3,)
        assert AttributeValue.ref_set([2, 5]).referenced_ids() == (2, 5)
        assert AttributeValue.string("x").referenced_ids() == ()

    def test_empty_attribute_name_rejected(self):
        with pytest.raises(ValueError):
            Attribute.string("", "x")


class TestAddAnnotation:
    def test_ids_start_at_zero(self):
        doc = Document("d", SENTENCE_TEXT)
        first = doc.add_annotation(
            "token", [(0, 4)], [Attribute.string("type", "EFW"), Attribute.string("pos", "PN")]
        )
        assert first == 0

    def test_multi_span_link_gets_id_seven(self, figure_doc):
        # eighth add in the worked example is the two-span link annotation
        link = figure_doc.get_annotation(7)
        assert link.type == "link"
        assert link.spans == (Span(0, 4), Span(17, 25))

    def test_reversed_span_rejected(self):
        doc = Document("d", SENTENCE_TEXT)
        with pytest.raises(InvalidSpanError):
            doc.add_annotation("token", [(5, 3)])

    def test_out_of_bounds_rejected(self):
        doc = Document("d", "short")
        with pytest.raises(InvalidSpanError):
            doc.add_annotation("token", [(0, 6)])

    def test_overlapping_spans_rejected(self):
        doc = Document("d", SENTENCE_TEXT)
        with pytest.raises(InvalidSpanError):
            doc.add_annotation("link", [(0, 5), (4, 9)])

    def test_unsorted_spans_rejected(self):
        doc = Document("d", SENTENCE_TEXT)
        with pytest.raises(InvalidSpanError):
            doc.add_annotation("link", [(17, 25), (0, 4)])

    def test_empty_span_list_rejected(self):
        doc = Document("d", SENTENCE_TEXT)
        with pytest.raises(InvalidSpanError):
            doc.add_annotation("token", [])

    def test_duplicate_attribute_rejected(self):
        doc = Document("d", SENTENCE_TEXT)
        with pytest.raises(DuplicateAttributeError):
            doc.add_annotation(
                "token", [(0, 4)], [Attribute.string("pos", "a"), Attribute.string("pos", "b")]
            )

    def test_zero_width_span_allowed(self):
        doc = Document("d", SENTENCE_TEXT)
        aid = doc.add_annotation("anchor", [(4, 4)])
        assert doc.annotated_text(aid) == [""]


class TestGetRemove:
    def test_get_sentence_annotation(self, figure_doc):
        sentence = figure_doc.get_annotation(6)
        assert sentence.type == "sentence"
        assert sentence.spans == (Span(0, 26),)
        assert sentence.get_attribute("constituents") == AttributeValue.ref_set(range(6))

    def test_get_missing_raises(self):
        with pytest.raises(NotFoundError):
            Document("d").get_annotation(0)

    def test_add_then_get_round_trip(self):
        doc = Document("d", SENTENCE_TEXT)
        attrs = [Attribute.string("pos", "NN"), Attribute.string_set("tags", ["a", "b"])]
        aid = doc.add_annotation("token", [(17, 25)], attrs)
        stored = doc.get_annotation(aid)
        assert stored == Annotation(aid, "token", [(17, 25)], attrs)

    def test_removed_id_is_not_reused(self, figure_doc):
        figure_doc.remove_annotation(3)
        with pytest.raises(NotFoundError):
            figure_doc.get_annotation(3)
        assert figure_doc.add_annotation("chunk", [(0, 4)]) == 8

    def test_remove_twice_raises(self, figure_doc):
        figure_doc.remove_annotation(3)
        with pytest.raises(NotFoundError):
            figure_doc.remove_annotation(3)

    def test_remove_leaves_dangling_reference_flagged(self, figure_doc):
        figure_doc.remove_annotation(0)
        rules = {(v.rule, v.annotation_id) for v in figure_doc.validate()}
        assert ("DanglingReference", 6) in rules
        assert ("DanglingReference", 7) in rules

    def test_id_monotonicity(self):
        rng = random.Random(7)
        doc = Document("d", "x" * 40)
        issued = []
        for _ in range(200):
            if doc and rng.random() < 0.3:
                live = [a.id for a in doc.annotations()]
                if live:
                    doc.remove_annotation(rng.choice(live))
            issued.append(doc.add_annotation("t", [(0, 1)]))
        assert issued == sorted(issued)
        assert len(set(issued)) == len(issued)


class TestQueries:
    def test_tokens_in_order(self, figure_doc):
        assert [a.id for a in figure_doc.select_by_type("token")] == [0, 1, 2, 3, 4, 5]

    def test_unknown_type_empty(self, figure_doc):
        assert figure_doc.select_by_type("chunk") == []

    def test_matching_pos_nn(self, figure_doc):
        hits = figure_doc.select_matching("token", "pos", AttributeValue.string("NN"))
        assert [a.id for a in hits] == [4]

    def test_matching_no_hits(self, figure_doc):
        assert figure_doc.select_matching("token", "pos", AttributeValue.string("XX")) == []

    def test_overlapping_mid_token(self, figure_doc):
        # token "sentence", the sentence and the link; canonical order keys on
        # each annotation's first span, so the link ([0,4) first) leads
        hits = figure_doc.select_overlapping(18, 19)
        assert {a.id for a in hits} == {4, 6, 7}
        assert [a.id for a in hits] == [7, 6, 4]

    def test_zero_width_query_at_start(self, figure_doc):
        hits = figure_doc.select_overlapping(0, 0)
        assert {a.id for a in hits} == {0, 6, 7}
        assert [a.id for a in hits] == [0, 7, 6]

    def test_zero_width_query_past_end(self, figure_doc):
        assert figure_doc.select_overlapping(26, 26) == []

    def test_bad_range_rejected(self, figure_doc):
        with pytest.raises(InvalidRangeError):
            figure_doc.select_overlapping(9, 3)
        with pytest.raises(InvalidRangeError):
            figure_doc.select_overlapping(-1, 3)

    def test_zero_width_span_matched_by_zero_width_query(self):
        doc = Document("d", "abcdef")
        aid = doc.add_annotation("anchor", [(3, 3)])
        assert [a.id for a in doc.select_overlapping(3, 3)] == [aid]
        assert doc.select_overlapping(4, 4) == []

    @pytest.mark.parametrize("seed", range(5))
    def test_queries_equal_brute_force(self, seed):
        rng = random.Random(seed)
        doc = random_document(rng, max_annotations=60)
        for annotation_type in ["token", "chunk", "entity", "nope"]:
            assert doc.select_by_type(annotation_type) == brute_by_type(doc, annotation_type)
        value = AttributeValue.string("NN")
        assert doc.select_matching("token", "pos", value) == brute_matching(
            doc, "token", "pos", value
        )
        for _ in range(25):
            start = rng.randint(0, max(len(doc.text), 1))
            end = rng.randint(start, max(len(doc.text), 1))
            assert doc.select_overlapping(start, end) == brute_overlapping(doc, start, end)


class TestAnnotatedText:
    def test_single_span(self, figure_doc):
        assert figure_doc.annotated_text(0) == ["This"]

    def test_multi_span_link(self, figure_doc):
        assert figure_doc.annotated_text(7) == ["This", "sentence"]

    def test_missing_id(self, figure_doc):
        with pytest.raises(NotFoundError):
            figure_doc.annotated_text(99)

    def test_unicode_character_offsets(self):
        doc = Document("d", "αβ γ")
        aid = doc.add_annotation("token", [(0, 2)])
        assert doc.annotated_text(aid) == ["αβ"]


class TestAttributes:
    def test_put_and_get(self, figure_doc):
        token = figure_doc.get_annotation(0)
        assert token.put_attribute(Attribute.string("lemma", "this")) is None
        assert token.get_attribute("lemma") == AttributeValue.string("this")

    def test_put_replaces_and_returns_previous(self):
        doc = Document("d")
        assert doc.put_attribute(Attribute.string("lang", "en")) is None
        previous = doc.put_attribute(Attribute.string("lang", "el"))
        assert previous == AttributeValue.string("en")
        assert doc.get_attribute("lang") == AttributeValue.string("el")

    def test_put_is_idempotent(self):
        doc = Document("d")
        attr = Attribute.string("lang", "en")
        doc.put_attribute(attr)
        doc.put_attribute(attr)
        assert doc.attributes == (attr,)

    def test_document_and_collection_namespaces_independent(self):
        collection = Collection("c")
        doc = collection.add_document(Document("d"))
        doc.put_attribute(Attribute.string("owner", "doc"))
        collection.put_attribute(Attribute.string("owner", "collection"))
        assert doc.get_attribute("owner") == AttributeValue.string("doc")
        assert collection.get_attribute("owner") == AttributeValue.string("collection")

    def test_remove_attribute(self):
        doc = Document("d")
        doc.put_attribute(Attribute.string("x", "1"))
        assert doc.remove_attribute("x") == AttributeValue.string("1")
        assert doc.get_attribute("x") is None
        assert doc.remove_attribute("x") is None


class TestValidate:
    def test_clean_document(self, figure_doc):
        assert figure_doc.validate() == []

    def test_clean_random_documents(self):
        for seed in range(10):
            doc = random_document(random.Random(seed), max_annotations=40)
            assert doc.validate() == []

    def test_span_out_of_bounds_detected(self, figure_doc):
        figure_doc.text = figure_doc.text[:20]
        rules = {v.rule for v in figure_doc.validate()}
        assert "SpanOutOfBounds" in rules

    def test_stale_id_counter_detected(self, figure_doc):
        figure_doc._next_id = 3
        rules = {v.rule for v in figure_doc.validate()}
        assert "StaleIdCounter" in rules

    def test_document_level_dangling_reference(self):
        doc = Document("d", "abc")
        aid = doc.add_annotation("t", [(0, 1)])
        doc.put_attribute(Attribute.ref("head", aid))
        assert doc.validate() == []
        doc.remove_annotation(aid)
        violations = doc.validate()
        assert [v.rule for v in violations] == ["DanglingReference"]
        assert violations[0].annotation_id is None


class TestCollection:
    def test_duplicate_document_id_rejected(self):
        collection = Collection("c")
        collection.add_document(Document("d"))
        with pytest.raises(Exception):
            collection.add_document(Document("d"))

    def test_iteration_preserves_insertion_order(self):
        collection = Collection("c")
        for doc_id in ["b", "a", "c"]:
            collection.add_document(Document(doc_id))
        assert collection.document_ids == ["b", "a", "c"]

    def test_get_and_remove(self):
        collection = Collection("c")
        doc = collection.add_document(Document("d"))
        assert collection.get_document("d") is doc
        assert collection.remove_document("d") is doc
        with pytest.raises(NotFoundError):
            collection.get_document("d")


# ---------------------------------------------------------------------------
# Property tests

span_lists = st.lists(
    st.tuples(st.integers(0, 30), st.integers(0, 30)).map(lambda t: (min(t), max(t))),
    min_size=1,
    max_size=5,
)


@settings(max_examples=200)
@given(spans=span_lists)
def test_span_discipline_is_total(spans):
    """add_annotation either stores a valid span set or raises InvalidSpanError."""
    doc = Document("d", "x" * 30)
    try:
        aid = doc.add_annotation("t", spans)
    except InvalidSpanError:
        ordered = all(
            b[0] >= a[0] and b[0] >= a[1] for a, b in zip(spans, spans[1:])
        )
        assert not ordered or not spans
        return
    stored = doc.get_annotation(aid)
    for left, right in zip(stored.spans, stored.spans[1:]):
        assert left.end <= right.start


@settings(max_examples=100)
@given(
    positions=st.lists(st.integers(0, 12), min_size=2, max_size=2),
    anchors=st.lists(st.tuples(st.integers(0, 12), st.integers(0, 3)), max_size=8),
)
def test_overlap_matches_oracle(positions, anchors):
    doc = Document("d", "x" * 12)
    for start, width in anchors:
        end = min(start + width, 12)
        doc.add_annotation("t", [(start, end)])
    start, end = min(positions), max(positions)
    assert doc.select_overlapping(start, end) == brute_overlapping(doc, start, end)


def test_worked_example_rows_complete(figure_doc):
    assert len(figure_doc) == len(SENTENCE_ROWS)
    assert figure_doc.next_id == 8
