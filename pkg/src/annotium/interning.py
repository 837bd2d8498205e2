"""Memory-compact document layout: string interning plus flat span arrays.

Large corpora repeat the same annotation types, attribute names and string
values millions of times. :class:`InternTable` maps each distinct string to
a small integer once, and :class:`CompactDocument` stores annotations as
fixed-width integer arrays keyed by those symbols. Queries answer
identically to the plain :class:`~annotium.model.Document` they were built
from; matching annotations are materialized on demand.
"""

from __future__ import annotations

import threading
from array import array
from typing import Iterable, Union

from annotium.model import (
    Annotation,
    AttrKind,
    Attribute,
    AttributeValue,
    Document,
    InvalidRangeError,
    range_overlaps,
)


class UnknownSymbolError(KeyError):
    """resolve() was asked for an id this table never issued."""


class InternTable:
    """Bidirectional string <-> symbol-id map with insertion-ordered ids.

    Interning the same string twice returns the same id, and ids stay
    stable for the table's lifetime. Mutation is serialized internally, so
    concurrent intern() calls are safe.
    """

    def __init__(self) -> None:
        self._by_string: dict[str, int] = {}
        self._by_id: list[str] = []
        self._lock = threading.Lock()

    def intern(self, value: str) -> int:
        existing = self._by_string.get(value)
        if existing is not None:
            return existing
        with self._lock:
            existing = self._by_string.get(value)
            if existing is not None:
                return existing
            symbol = len(self._by_id)
            self._by_id.append(value)
            self._by_string[value] = symbol
            return symbol

    def resolve(self, symbol: int) -> str:
        try:
            return self._by_id[symbol]
        except (IndexError, TypeError):
            raise UnknownSymbolError(symbol) from None

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, value: str) -> bool:
        return value in self._by_string


# Attribute kinds packed as small ints inside compact records.
_KIND_CODE = {
    AttrKind.STRING: 0,
    AttrKind.STRING_SET: 1,
    AttrKind.ANNOTATION_ID: 2,
    AttrKind.ANNOTATION_ID_SET: 3,
}
_CODE_KIND = {code: kind for kind, code in _KIND_CODE.items()}


class CompactDocument:
    """Read-only, interned form of a document.

    Annotation ids, types and spans live in flat integer arrays; attribute
    names and string values are intern-table symbols. The query surface
    mirrors the plain document, and every result is returned as an ordinary
    :class:`Annotation`.
    """

    def __init__(self, doc: Document, table: InternTable | None = None) -> None:
        self.id = doc.id
        self.text = doc.text
        self.next_id = doc.next_id
        self.table = table if table is not None else InternTable()
        self.attributes = doc.attributes

        ids = array("q")
        types = array("q")
        span_index = array("q", [0])
        spans = array("q")
        attr_records: list[tuple] = []
        for annotation in doc.annotations():
            ids.append(annotation.id)
            types.append(self.table.intern(annotation.type))
            for span in annotation.spans:
                spans.append(span.start)
                spans.append(span.end)
            span_index.append(len(spans))
            attr_records.append(
                tuple(self._pack_attr(attr) for attr in annotation.attributes)
            )
        self._ids = ids
        self._types = types
        self._span_index = span_index
        self._spans = spans
        self._attrs = tuple(attr_records)
        self._row_by_id = {aid: row for row, aid in enumerate(ids)}

    def _pack_attr(self, attr: Attribute) -> tuple:
        value = attr.value
        if value.kind is AttrKind.STRING:
            payload: Union[int, tuple] = self.table.intern(value.value)
        elif value.kind is AttrKind.STRING_SET:
            payload = tuple(self.table.intern(v) for v in value.value)
        elif value.kind is AttrKind.ANNOTATION_ID:
            payload = value.value
        else:
            payload = value.value
        return (self.table.intern(attr.name), _KIND_CODE[value.kind], payload)

    def _unpack_attr(self, record: tuple) -> Attribute:
        name_sym, code, payload = record
        kind = _CODE_KIND[code]
        if kind is AttrKind.STRING:
            value = AttributeValue.string(self.table.resolve(payload))
        elif kind is AttrKind.STRING_SET:
            value = AttributeValue.string_set(self.table.resolve(s) for s in payload)
        elif kind is AttrKind.ANNOTATION_ID:
            value = AttributeValue.ref(payload)
        else:
            value = AttributeValue.ref_set(payload)
        return Attribute(self.table.resolve(name_sym), value)

    def __len__(self) -> int:
        return len(self._ids)

    def _row_spans(self, row: int) -> list[tuple[int, int]]:
        lo, hi = self._span_index[row], self._span_index[row + 1]
        flat = self._spans
        return [(flat[i], flat[i + 1]) for i in range(lo, hi, 2)]

    def _materialize(self, row: int) -> Annotation:
        return Annotation(
            self._ids[row],
            self.table.resolve(self._types[row]),
            self._row_spans(row),
            (self._unpack_attr(r) for r in self._attrs[row]),
        )

    def get_annotation(self, annotation_id: int) -> Annotation:
        try:
            row = self._row_by_id[annotation_id]
        except KeyError:
            raise UnknownSymbolError(annotation_id) from None
        return self._materialize(row)

    def annotations(self) -> list[Annotation]:
        return sorted((self._materialize(r) for r in range(len(self._ids))), key=lambda a: a.id)

    def select_by_type(self, annotation_type: str) -> list[Annotation]:
        if annotation_type not in self.table:
            return []
        wanted = self.table.intern(annotation_type)
        found = [self._materialize(r) for r, sym in enumerate(self._types) if sym == wanted]
        found.sort(key=Annotation.sort_key)
        return found

    def select_matching(
        self, annotation_type: str, attr_name: str, attr_value: AttributeValue
    ) -> list[Annotation]:
        return [
            a
            for a in self.select_by_type(annotation_type)
            if a.get_attribute(attr_name) == attr_value
        ]

    def select_overlapping(self, start: int, end: int) -> list[Annotation]:
        if not (0 <= start <= end):
            raise InvalidRangeError(f"bad range [{start}, {end})")
        found = []
        for row in range(len(self._ids)):
            lo, hi = self._span_index[row], self._span_index[row + 1]
            flat = self._spans
            for i in range(lo, hi, 2):
                if range_overlaps(flat[i], flat[i + 1], start, end):
                    found.append(self._materialize(row))
                    break
        found.sort(key=Annotation.sort_key)
        return found

    def annotated_text(self, annotation_id: int) -> list[str]:
        row = self._row_by_id[annotation_id]
        return [self.text[s:e] for s, e in self._row_spans(row)]

    def to_document(self) -> Document:
        """Expand back into a plain, fully materialized document."""
        doc = Document(self.id, self.text, self.attributes)
        for row in range(len(self._ids)):
            annotation = self._materialize(row)
            doc._annotations[annotation.id] = annotation
        doc._next_id = self.next_id
        return doc


def intern_document(doc: Document, table: InternTable | None = None) -> CompactDocument:
    """Build the compact, interned form of ``doc``."""
    return CompactDocument(doc, table)


def intern(table: InternTable, value: str) -> int:
    """Module-level convenience over :meth:`InternTable.intern`."""
    return table.intern(value)


def resolve(table: InternTable, symbol: int) -> str:
    """Module-level convenience over :meth:`InternTable.resolve`."""
    return table.resolve(symbol)
