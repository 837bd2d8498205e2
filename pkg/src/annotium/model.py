"""In-memory standoff annotation store: collections, documents, annotations.

A document holds plain Unicode text plus annotations that reference it by
character offsets (half-open ``[start, end)`` spans, counted in Unicode
scalar values). Each annotation carries a numeric id that is unique within
its document and never reused, a type string, one or more disjoint spans,
and named typed attributes. Documents are grouped into collections, and
attributes may sit on annotations, documents or collections alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence, Union


class ModelError(Exception):
    """Base class for errors raised by the annotation store."""


class InvalidSpanError(ModelError):
    """A span is malformed, out of bounds, or conflicts with its siblings."""


class InvalidRangeError(ModelError):
    """A query range does not satisfy 0 <= start <= end."""


class DuplicateAttributeError(ModelError):
    """Two attributes in the same set share a name."""


class NotFoundError(ModelError):
    """Lookup of an annotation or document id failed."""


class DuplicateDocumentError(ModelError):
    """A document with the same id already exists in the collection."""


@dataclass(frozen=True, order=True)
class Span:
    """Half-open character interval [start, end) into a document's text."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start <= self.end):
            raise InvalidSpanError(f"bad span [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


SpanLike = Union[Span, Sequence[int]]


def _coerce_span(value: SpanLike) -> Span:
    if isinstance(value, Span):
        return value
    start, end = value
    return Span(int(start), int(end))


class AttrKind(str, Enum):
    """Value kinds an attribute can carry."""

    STRING = "STRING"
    STRING_SET = "STRING_SET"
    ANNOTATION_ID = "ANNOTATION_ID"
    ANNOTATION_ID_SET = "ANNOTATION_ID_SET"


@dataclass(frozen=True)
class AttributeValue:
    """Tagged attribute payload: a string, string set, or annotation reference(s).

    Set payloads are normalized to sorted, duplicate-free tuples so that two
    values built from the same elements always compare (and serialize) equal.
    """

    kind: AttrKind
    value: Union[str, int, tuple]

    def __post_init__(self) -> None:
        kind, value = self.kind, self.value
        if kind is AttrKind.STRING:
            if not isinstance(value, str):
                raise TypeError(f"STRING value must be str, got {type(value).__name__}")
        elif kind is AttrKind.ANNOTATION_ID:
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise TypeError("ANNOTATION_ID value must be a non-negative int")
        elif kind is AttrKind.STRING_SET:
            if not isinstance(value, tuple) or not all(isinstance(v, str) for v in value):
                raise TypeError("STRING_SET value must be a tuple of str")
            object.__setattr__(self, "value", tuple(sorted(set(value))))
        elif kind is AttrKind.ANNOTATION_ID_SET:
            if not isinstance(value, tuple) or not all(
                isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in value
            ):
                raise TypeError("ANNOTATION_ID_SET value must be a tuple of non-negative ints")
            object.__setattr__(self, "value", tuple(sorted(set(value))))
        else:  # pragma: no cover - enum is closed
            raise TypeError(f"unknown attribute kind {kind!r}")

    @classmethod
    def string(cls, value: str) -> "AttributeValue":
        return cls(AttrKind.STRING, value)

    @classmethod
    def string_set(cls, values: Iterable[str]) -> "AttributeValue":
        return cls(AttrKind.STRING_SET, tuple(values))

    @classmethod
    def ref(cls, annotation_id: int) -> "AttributeValue":
        return cls(AttrKind.ANNOTATION_ID, annotation_id)

    @classmethod
    def ref_set(cls, annotation_ids: Iterable[int]) -> "AttributeValue":
        return cls(AttrKind.ANNOTATION_ID_SET, tuple(annotation_ids))

    def referenced_ids(self) -> tuple:
        """Annotation ids this value points at (empty for string kinds)."""
        if self.kind is AttrKind.ANNOTATION_ID:
            return (self.value,)
        if self.kind is AttrKind.ANNOTATION_ID_SET:
            return self.value
        return ()


@dataclass(frozen=True)
class Attribute:
    """A named, typed value attached to an annotation, document or collection."""

    name: str
    value: AttributeValue

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("attribute name must be non-empty")

    @classmethod
    def string(cls, name: str, value: str) -> "Attribute":
        return cls(name, AttributeValue.string(value))

    @classmethod
    def string_set(cls, name: str, values: Iterable[str]) -> "Attribute":
        return cls(name, AttributeValue.string_set(values))

    @classmethod
    def ref(cls, name: str, annotation_id: int) -> "Attribute":
        return cls(name, AttributeValue.ref(annotation_id))

    @classmethod
    def ref_set(cls, name: str, annotation_ids: Iterable[int]) -> "Attribute":
        return cls(name, AttributeValue.ref_set(annotation_ids))


class AttributeCarrier:
    """Shared attribute-set behaviour: unique names, replace-on-put."""

    def __init__(self) -> None:
        self._attrs: dict[str, AttributeValue] = {}

    def put_attribute(self, attr: Attribute) -> AttributeValue | None:
        """Store ``attr``, replacing any same-named attribute.

        Returns the previous value, or None if the name was new.
        """
        previous = self._attrs.get(attr.name)
        self._attrs[attr.name] = attr.value
        return previous

    def get_attribute(self, name: str) -> AttributeValue | None:
        return self._attrs.get(name)

    def remove_attribute(self, name: str) -> AttributeValue | None:
        return self._attrs.pop(name, None)

    @property
    def attributes(self) -> tuple[Attribute, ...]:
        """Attributes in canonical (name-sorted) order."""
        return tuple(Attribute(n, v) for n, v in sorted(self._attrs.items()))

    def _set_attributes(self, attrs: Iterable[Attribute]) -> None:
        fresh: dict[str, AttributeValue] = {}
        for attr in attrs:
            if attr.name in fresh:
                raise DuplicateAttributeError(f"duplicate attribute name {attr.name!r}")
            fresh[attr.name] = attr.value
        self._attrs = fresh


class Annotation(AttributeCarrier):
    """A typed, id-bearing record tying attributes to one or more text spans."""

    def __init__(
        self,
        annotation_id: int,
        annotation_type: str,
        spans: Iterable[SpanLike],
        attrs: Iterable[Attribute] = (),
    ) -> None:
        super().__init__()
        if annotation_id < 0:
            raise ModelError("annotation id must be non-negative")
        if not annotation_type:
            raise ModelError("annotation type must be non-empty")
        self.id = annotation_id
        self.type = annotation_type
        self.spans = _checked_spans(spans)
        self._set_attributes(attrs)

    @property
    def first_span(self) -> Span:
        return self.spans[0]

    def sort_key(self) -> tuple[int, int, int]:
        """Canonical query ordering: (first-span start, first-span end, id)."""
        return (self.spans[0].start, self.spans[0].end, self.id)

    def copy(self) -> "Annotation":
        return Annotation(self.id, self.type, self.spans, self.attributes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Annotation):
            return NotImplemented
        return (
            self.id == other.id
            and self.type == other.type
            and self.spans == other.spans
            and self._attrs == other._attrs
        )

    def __hash__(self) -> int:
        return hash((self.id, self.type, self.spans))

    def __repr__(self) -> str:
        spans = ",".join(f"[{s.start},{s.end})" for s in self.spans)
        return f"Annotation(id={self.id}, type={self.type!r}, spans={spans})"


def _checked_spans(spans: Iterable[SpanLike]) -> tuple[Span, ...]:
    """Coerce and verify a span list: non-empty, ascending, pairwise disjoint."""
    out = tuple(_coerce_span(s) for s in spans)
    if not out:
        raise InvalidSpanError("annotation needs at least one span")
    for prev, cur in zip(out, out[1:]):
        if cur.start < prev.start or cur.start < prev.end:
            raise InvalidSpanError(
                f"spans must be sorted and disjoint: [{prev.start},{prev.end}) then [{cur.start},{cur.end})"
            )
    return out


def range_overlaps(span_start: int, span_end: int, start: int, end: int) -> bool:
    """Whether span [span_start, span_end) intersects the query range [start, end).

    A zero-width query [p, p) matches spans that cover p (start <= p < end)
    and zero-width spans sitting exactly at p.
    """
    if start == end:
        return span_start <= start < span_end or span_start == span_end == start
    return span_start < end and span_end > start


def span_overlaps(span: Span, start: int, end: int) -> bool:
    return range_overlaps(span.start, span.end, start, end)


@dataclass(frozen=True)
class Violation:
    """One broken invariant found by document validation."""

    rule: str
    annotation_id: int | None
    detail: str

    def __str__(self) -> str:
        where = f"annotation {self.annotation_id}" if self.annotation_id is not None else "document"
        return f"{self.rule} ({where}): {self.detail}"


class Document(AttributeCarrier):
    """Text plus its standoff annotations and document-level attributes.

    Annotation ids are assigned from a monotonically increasing counter and
    are never reused, even after removal. A document is a single-writer
    value: concurrent readers are safe once no writer is active.
    """

    def __init__(self, doc_id: str, text: str = "", attrs: Iterable[Attribute] = ()) -> None:
        super().__init__()
        self.id = doc_id
        self.text = text
        self._annotations: dict[int, Annotation] = {}
        self._next_id = 0
        self._set_attributes(attrs)

    @property
    def next_id(self) -> int:
        return self._next_id

    def __len__(self) -> int:
        return len(self._annotations)

    def annotations(self) -> Iterator[Annotation]:
        """All annotations in ascending id order."""
        return iter(sorted(self._annotations.values(), key=lambda a: a.id))

    def add_annotation(
        self,
        annotation_type: str,
        spans: Iterable[SpanLike],
        attrs: Iterable[Attribute] = (),
    ) -> int:
        """Create an annotation and return its freshly assigned id."""
        annotation = Annotation(self._next_id, annotation_type, spans, attrs)
        for span in annotation.spans:
            if span.end > len(self.text):
                raise InvalidSpanError(
                    f"span [{span.start},{span.end}) exceeds text length {len(self.text)}"
                )
        self._annotations[annotation.id] = annotation
        self._next_id += 1
        return annotation.id

    def get_annotation(self, annotation_id: int) -> Annotation:
        try:
            return self._annotations[annotation_id]
        except KeyError:
            raise NotFoundError(f"no annotation {annotation_id} in document {self.id!r}") from None

    def remove_annotation(self, annotation_id: int) -> Annotation:
        """Remove and return an annotation. Its id is never handed out again.

        References to the removed id elsewhere are allowed to dangle; they
        are reported by :meth:`validate`, not here.
        """
        removed = self.get_annotation(annotation_id)
        del self._annotations[annotation_id]
        return removed

    def replace_annotation(
        self,
        annotation_id: int,
        annotation_type: str,
        spans: Iterable[SpanLike],
        attrs: Iterable[Attribute] = (),
    ) -> Annotation:
        """Swap an annotation's content, keeping its id (editor support)."""
        self.get_annotation(annotation_id)
        replacement = Annotation(annotation_id, annotation_type, spans, attrs)
        for span in replacement.spans:
            if span.end > len(self.text):
                raise InvalidSpanError(
                    f"span [{span.start},{span.end}) exceeds text length {len(self.text)}"
                )
        self._annotations[annotation_id] = replacement
        return replacement

    def select_by_type(self, annotation_type: str) -> list[Annotation]:
        """All annotations of a type, in canonical (start, end, id) order."""
        found = [a for a in self._annotations.values() if a.type == annotation_type]
        found.sort(key=Annotation.sort_key)
        return found

    def select_matching(
        self, annotation_type: str, attr_name: str, attr_value: AttributeValue
    ) -> list[Annotation]:
        """Annotations of a type whose named attribute equals the given value."""
        return [
            a
            for a in self.select_by_type(annotation_type)
            if a.get_attribute(attr_name) == attr_value
        ]

    def select_overlapping(self, start: int, end: int) -> list[Annotation]:
        """Annotations with at least one span intersecting [start, end)."""
        if not (0 <= start <= end):
            raise InvalidRangeError(f"bad range [{start}, {end})")
        found = [
            a
            for a in self._annotations.values()
            if any(span_overlaps(s, start, end) for s in a.spans)
        ]
        found.sort(key=Annotation.sort_key)
        return found

    def annotated_text(self, annotation_id: int) -> list[str]:
        """The text slice under each span of an annotation, in span order."""
        annotation = self.get_annotation(annotation_id)
        return [self.text[s.start : s.end] for s in annotation.spans]

    def validate(self) -> list[Violation]:
        """Check every stored invariant; an empty list means the document is sound.

        Documents built purely through this API only ever report dangling
        references (an allowed consequence of removal); the remaining rules
        guard against hand-built or deserialized state.
        """
        violations: list[Violation] = []
        max_id = -1
        for key, annotation in self._annotations.items():
            max_id = max(max_id, annotation.id)
            if key != annotation.id:
                violations.append(
                    Violation("IdMismatch", annotation.id, f"indexed under {key}")
                )
            if not annotation.type:
                violations.append(Violation("EmptyType", annotation.id, "type is empty"))
            prev: Span | None = None
            for span in annotation.spans:
                if span.start > span.end:
                    violations.append(
                        Violation("InvalidSpan", annotation.id, f"[{span.start},{span.end})")
                    )
                if span.end > len(self.text):
                    violations.append(
                        Violation(
                            "SpanOutOfBounds",
                            annotation.id,
                            f"[{span.start},{span.end}) exceeds text length {len(self.text)}",
                        )
                    )
                if prev is not None and (span.start < prev.start or span.start < prev.end):
                    violations.append(
                        Violation(
                            "SpanOverlap",
                            annotation.id,
                            f"[{prev.start},{prev.end}) then [{span.start},{span.end})",
                        )
                    )
                prev = span
            violations.extend(self._reference_violations(annotation.id, annotation))
        violations.extend(self._reference_violations(None, self))
        if self._next_id <= max_id:
            violations.append(
                Violation("StaleIdCounter", None, f"next_id {self._next_id} <= max id {max_id}")
            )
        return violations

    def _reference_violations(
        self, owner_id: int | None, carrier: AttributeCarrier
    ) -> list[Violation]:
        out = []
        for attr in carrier.attributes:
            for ref in attr.value.referenced_ids():
                if ref not in self._annotations:
                    out.append(
                        Violation(
                            "DanglingReference",
                            owner_id,
                            f"attribute {attr.name!r} references missing annotation {ref}",
                        )
                    )
        return out

    def copy(self) -> "Document":
        doc = Document(self.id, self.text, self.attributes)
        doc._annotations = {a.id: a.copy() for a in self._annotations.values()}
        doc._next_id = self._next_id
        return doc

    def assign(self, other: "Document") -> None:
        """Replace this document's content with another's, keeping identity.

        Used when an external component or a failure rollback produces a
        fresh document object that must take this one's place without
        breaking references held by collections or callers.
        """
        self.text = other.text
        self._annotations = {a.id: a.copy() for a in other._annotations.values()}
        self._next_id = other._next_id
        self._attrs = dict(other._attrs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Document):
            return NotImplemented
        return (
            self.id == other.id
            and self.text == other.text
            and self._next_id == other._next_id
            and self._attrs == other._attrs
            and self._annotations == other._annotations
        )

    def __repr__(self) -> str:
        return f"Document(id={self.id!r}, text={len(self.text)} chars, annotations={len(self)})"


class Collection(AttributeCarrier):
    """A named, ordered set of documents with collection-level attributes."""

    def __init__(self, name: str, attrs: Iterable[Attribute] = ()) -> None:
        super().__init__()
        self.name = name
        self._documents: dict[str, Document] = {}
        self._set_attributes(attrs)

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._documents.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._documents

    @property
    def document_ids(self) -> list[str]:
        return list(self._documents)

    def add_document(self, document: Document) -> Document:
        if document.id in self._documents:
            raise DuplicateDocumentError(f"document id {document.id!r} already in {self.name!r}")
        self._documents[document.id] = document
        return document

    def get_document(self, doc_id: str) -> Document:
        try:
            return self._documents[doc_id]
        except KeyError:
            raise NotFoundError(f"no document {doc_id!r} in collection {self.name!r}") from None

    def remove_document(self, doc_id: str) -> Document:
        document = self.get_document(doc_id)
        del self._documents[doc_id]
        return document

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Collection):
            return NotImplemented
        return (
            self.name == other.name
            and self._attrs == other._attrs
            and self._documents == other._documents
        )

    def __repr__(self) -> str:
        return f"Collection(name={self.name!r}, documents={len(self)})"


def validate_document(document: Document) -> list[Violation]:
    """Convenience alias for :meth:`Document.validate`."""
    return document.validate()


def filter_annotations(
    doc: Document,
    annotation_type: str | None = None,
    attr_name: str | None = None,
    attr_value: AttributeValue | None = None,
    start: int | None = None,
    end: int | None = None,
) -> list[Annotation]:
    """Compose the select operations behind one filter surface.

    Shared by the CLI and the HTTP query endpoint so both answer
    identically. ``attr_name``/``attr_value`` and ``start``/``end`` must be
    given in pairs.
    """
    if (attr_name is None) != (attr_value is None):
        raise InvalidRangeError("attribute name and value must be given together")
    if (start is None) != (end is None):
        raise InvalidRangeError("start and end must be given together")
    if annotation_type is not None:
        found = doc.select_by_type(annotation_type)
    else:
        found = sorted(doc.annotations(), key=Annotation.sort_key)
    if attr_name is not None:
        found = [a for a in found if a.get_attribute(attr_name) == attr_value]
    if start is not None:
        if not (0 <= start <= end):
            raise InvalidRangeError(f"bad range [{start}, {end})")
        found = [a for a in found if any(span_overlaps(s, start, end) for s in a.spans)]
    return found
