"""Shared test data and independent oracles.

The worked single-sentence example (text, eight annotations, their spans,
token class codes and pos values) is reproduced here as literal data and
used as the golden reference throughout the suite. The brute-force query
oracles reimplement the documented predicates as plain linear scans, kept
deliberately independent of the store's query methods.
"""

from __future__ import annotations

import random
from pathlib import Path

from annotium.model import Annotation, Attribute, AttributeValue, Document

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"

SENTENCE_TEXT = "This is a simple sentence."

# (id, type, spans, attrs) rows of the worked example.
SENTENCE_ROWS = [
    (0, "token", [(0, 4)], {"type": "EFW", "pos": "PN"}),
    (1, "token", [(5, 7)], {"type": "ELW", "pos": "VB"}),
    (2, "token", [(8, 9)], {"type": "ELW", "pos": "IDT"}),
    (3, "token", [(10, 16)], {"type": "ELW", "pos": "ADJ"}),
    (4, "token", [(17, 25)], {"type": "ELW", "pos": "NN"}),
    (5, "token", [(25, 26)], {"type": "PUNC", "pos": "."}),
    (6, "sentence", [(0, 26)], {"constituents": (0, 1, 2, 3, 4, 5)}),
    (7, "link", [(0, 4), (17, 25)], {"constituents": (0, 4)}),
]


def _attr(name: str, value) -> Attribute:
    if isinstance(value, tuple):
        return Attribute.ref_set(name, value)
    return Attribute.string(name, value)


def sentence_document(doc_id: str = "figure2") -> Document:
    """The worked-example document, built row by row from the literal table."""
    doc = Document(doc_id, SENTENCE_TEXT)
    for row_id, row_type, spans, attrs in SENTENCE_ROWS:
        assigned = doc.add_annotation(row_type, spans, [_attr(n, v) for n, v in attrs.items()])
        assert assigned == row_id
    return doc


# ---------------------------------------------------------------------------
# Brute-force oracles


def oracle_sort_key(annotation: Annotation):
    first = annotation.spans[0]
    return (first.start, first.end, annotation.id)


def brute_by_type(doc, annotation_type: str) -> list[Annotation]:
    hits = [a for a in doc.annotations() if a.type == annotation_type]
    return sorted(hits, key=oracle_sort_key)


def brute_matching(doc, annotation_type, attr_name, attr_value) -> list[Annotation]:
    hits = []
    for a in doc.annotations():
        if a.type != annotation_type:
            continue
        value = a.get_attribute(attr_name)
        if value is not None and value == attr_value:
            hits.append(a)
    return sorted(hits, key=oracle_sort_key)


def brute_overlapping(doc, start: int, end: int) -> list[Annotation]:
    hits = []
    for a in doc.annotations():
        for span in a.spans:
            if start == end:
                hit = span.start <= start < span.end or span.start == span.end == start
            else:
                hit = span.start < end and span.end > start
            if hit:
                hits.append(a)
                break
    return sorted(hits, key=oracle_sort_key)


# ---------------------------------------------------------------------------
# Random document corpus

TYPE_POOL = ["token", "sentence", "chunk", "link", "entity"]
ATTR_NAME_POOL = ["pos", "lemma", "category", "note"]
STRING_POOL = ["NN", "VB", "ADJ", "x", "εδώ", "long value with spaces"]
TEXT_ALPHABET = "ab γδ x\n."


def random_document(rng: random.Random, max_annotations: int = 200, max_spans: int = 5) -> Document:
    """A structurally valid random document: sorted disjoint spans, live refs."""
    text = "".join(rng.choice(TEXT_ALPHABET) for _ in range(rng.randint(0, 60)))
    doc = Document(f"rand-{rng.randrange(1 << 30)}", text)
    for _ in range(rng.randint(0, max_annotations)):
        span_count = rng.randint(1, max_spans)
        bounds = sorted(rng.randint(0, len(text)) for _ in range(2 * span_count))
        spans = [(bounds[2 * i], bounds[2 * i + 1]) for i in range(span_count)]
        # collapse accidental overlaps from duplicate bounds
        cleaned = []
        cursor = 0
        for s, e in spans:
            s = max(s, cursor)
            e = max(e, s)
            cleaned.append((s, e))
            cursor = e
        attrs = []
        if rng.random() < 0.7:
            attrs.append(Attribute.string(rng.choice(ATTR_NAME_POOL), rng.choice(STRING_POOL)))
        if rng.random() < 0.2:
            attrs.append(Attribute.string_set("tags", rng.sample(STRING_POOL, rng.randint(0, 3))))
        doc.add_annotation(rng.choice(TYPE_POOL), cleaned, attrs)
    # sprinkle reference attributes over existing ids only
    ids = [a.id for a in doc.annotations()]
    if ids:
        for a in doc.annotations():
            if rng.random() < 0.15:
                a.put_attribute(Attribute.ref("head", rng.choice(ids)))
            if rng.random() < 0.1:
                a.put_attribute(
                    Attribute.ref_set("members", rng.sample(ids, min(len(ids), rng.randint(1, 4))))
                )
    if rng.random() < 0.5:
        doc.put_attribute(Attribute.string("language", rng.choice(["el", "en"])))
    return doc
