"""Persistence: the JSON interchange format, encoding filters, collection I/O.

The interchange format is the platform's single serialization: it is the
on-disk document file, the HTTP payload and the wrapper-protocol payload.
Serialization is deterministic (fixed key order, name-sorted attributes,
sorted sets, two-space indent) so exported documents can be compared and
diffed byte-for-byte.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Union

from annotium.model import (
    Annotation,
    AttrKind,
    Attribute,
    AttributeValue,
    Collection,
    Document,
    Violation,
)

INTERCHANGE_VERSION = 1
MANIFEST_NAME = "manifest.json"
DOCS_DIR = "docs"

# Document ids double as file names inside a collection directory.
_SAFE_DOC_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class StorageError(Exception):
    """Base class for persistence and serialization errors."""


class DecodeError(StorageError):
    """Input bytes are not valid in the requested encoding."""

    def __init__(self, encoding: str, offset: int, reason: str) -> None:
        super().__init__(f"cannot decode byte at offset {offset} as {encoding}: {reason}")
        self.encoding = encoding
        self.offset = offset


class ParseError(StorageError):
    """Malformed interchange payload; ``path`` points at the offending field."""

    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class UnknownVersionError(StorageError):
    def __init__(self, version: Any) -> None:
        super().__init__(f"unsupported interchange version {version!r}")
        self.version = version


class ValidationFailedError(StorageError):
    """A document failed invariant validation before export."""

    def __init__(self, violations: list[Violation]) -> None:
        super().__init__("; ".join(str(v) for v in violations) or "validation failed")
        self.violations = violations


class MissingDocumentError(StorageError):
    def __init__(self, doc_id: str, path: Path) -> None:
        super().__init__(f"manifest lists document {doc_id!r} but {path} does not exist")
        self.doc_id = doc_id


class IoError(StorageError):
    """Filesystem-level failure while saving or loading."""


class EncodingId(str, Enum):
    """Supported import encodings, each a total byte -> text decode."""

    UTF_8 = "UTF-8"
    UTF_16LE = "UTF-16LE"
    UTF_16BE = "UTF-16BE"
    ISO_8859_1 = "ISO-8859-1"
    ISO_8859_7 = "ISO-8859-7"
    WINDOWS_1252 = "WINDOWS-1252"
    WINDOWS_1253 = "WINDOWS-1253"

    @property
    def codec(self) -> str:
        return _CODECS[self]

    @classmethod
    def from_name(cls, name: str) -> "EncodingId":
        try:
            return cls(name.upper())
        except ValueError:
            raise StorageError(f"unknown encoding {name!r}") from None


_CODECS = {
    EncodingId.UTF_8: "utf-8",
    EncodingId.UTF_16LE: "utf-16-le",
    EncodingId.UTF_16BE: "utf-16-be",
    EncodingId.ISO_8859_1: "iso8859-1",
    EncodingId.ISO_8859_7: "iso8859-7",
    EncodingId.WINDOWS_1252: "cp1252",
    EncodingId.WINDOWS_1253: "cp1253",
}

SOURCE_ENCODING_ATTR = "source_encoding"


def decode_bytes(data: bytes, encoding: EncodingId) -> str:
    """Decode bytes to text, reporting the byte offset of the first bad sequence."""
    try:
        return data.decode(encoding.codec)
    except UnicodeDecodeError as exc:
        raise DecodeError(encoding.value, exc.start, exc.reason) from None


def import_document(data: bytes, encoding: EncodingId, doc_id: str) -> Document:
    """Build an annotation-free document from raw text bytes.

    The input encoding is recorded on the document as the
    ``source_encoding`` attribute.
    """
    text = decode_bytes(data, encoding)
    doc = Document(doc_id, text)
    doc.put_attribute(Attribute.string(SOURCE_ENCODING_ATTR, encoding.value))
    return doc


# ---------------------------------------------------------------------------
# Interchange format v1


def attribute_to_obj(attr: Attribute) -> dict:
    value = attr.value.value
    if isinstance(value, tuple):
        value = list(value)
    return {"name": attr.name, "kind": attr.value.kind.value, "value": value}


def attributes_to_obj(attrs: Iterable[Attribute]) -> list[dict]:
    return [attribute_to_obj(a) for a in attrs]


def annotation_to_obj(annotation: Annotation) -> dict:
    return {
        "id": annotation.id,
        "type": annotation.type,
        "spans": [[s.start, s.end] for s in annotation.spans],
        "attributes": attributes_to_obj(annotation.attributes),
    }


def document_to_obj(doc: Document) -> dict:
    """The interchange dictionary for a document (schema order, sorted attrs)."""
    return {
        "version": INTERCHANGE_VERSION,
        "id": doc.id,
        "attributes": attributes_to_obj(doc.attributes),
        "text": doc.text,
        "next_id": doc.next_id,
        "annotations": [annotation_to_obj(a) for a in doc.annotations()],
    }


def _dump_json(obj: Any) -> bytes:
    return (json.dumps(obj, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def export_document(doc: Document) -> bytes:
    """Serialize a document as UTF-8 interchange JSON.

    The document must validate cleanly first; exporting a broken document
    would propagate the breakage into files and onto the wire.
    """
    violations = doc.validate()
    if violations:
        raise ValidationFailedError(violations)
    return _dump_json(document_to_obj(doc))


def _expect(obj: Any, key: str, types: Union[type, tuple], path: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(path, f"expected object, got {type(obj).__name__}")
    if key not in obj:
        raise ParseError(f"{path}.{key}", "missing field")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ParseError(f"{path}.{key}", f"unexpected type {type(value).__name__}")
    return value


def _attr_from_obj(obj: Any, path: str) -> Attribute:
    name = _expect(obj, "name", str, path)
    kind_name = _expect(obj, "kind", str, path)
    try:
        kind = AttrKind(kind_name)
    except ValueError:
        raise ParseError(f"{path}.kind", f"unknown kind {kind_name!r}") from None
    raw = _expect(obj, "value", (str, int, list), path)
    try:
        if kind is AttrKind.STRING:
            value = AttributeValue.string(raw)
        elif kind is AttrKind.ANNOTATION_ID:
            value = AttributeValue.ref(raw)
        elif kind is AttrKind.STRING_SET:
            value = AttributeValue.string_set(raw)
        else:
            value = AttributeValue.ref_set(raw)
    except TypeError as exc:
        raise ParseError(f"{path}.value", str(exc)) from None
    try:
        return Attribute(name, value)
    except ValueError as exc:
        raise ParseError(f"{path}.name", str(exc)) from None


def attributes_from_obj(obj: Any, path: str) -> list[Attribute]:
    if not isinstance(obj, list):
        raise ParseError(path, "expected array")
    attrs = [_attr_from_obj(item, f"{path}[{i}]") for i, item in enumerate(obj)]
    if len({a.name for a in attrs}) != len(attrs):
        raise ParseError(path, "duplicate attribute name")
    return attrs


def document_from_obj(obj: Any, path: str = "$") -> Document:
    """Rebuild a document from a parsed interchange dictionary."""
    version = _expect(obj, "version", int, path)
    if version != INTERCHANGE_VERSION:
        raise UnknownVersionError(version)
    doc_id = _expect(obj, "id", str, path)
    text = _expect(obj, "text", str, path)
    next_id = _expect(obj, "next_id", int, path)
    attrs = attributes_from_obj(_expect(obj, "attributes", list, path), f"{path}.attributes")
    try:
        doc = Document(doc_id, text, attrs)
    except Exception as exc:
        raise ParseError(f"{path}.attributes", str(exc)) from None

    annotations = _expect(obj, "annotations", list, path)
    seen: set[int] = set()
    max_id = -1
    for i, entry in enumerate(annotations):
        apath = f"{path}.annotations[{i}]"
        aid = _expect(entry, "id", int, apath)
        if aid < 0:
            raise ParseError(f"{apath}.id", "negative id")
        if aid in seen:
            raise ParseError(f"{apath}.id", f"duplicate annotation id {aid}")
        seen.add(aid)
        max_id = max(max_id, aid)
        atype = _expect(entry, "type", str, apath)
        spans_raw = _expect(entry, "spans", list, apath)
        spans = []
        for j, pair in enumerate(spans_raw):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
            ):
                raise ParseError(f"{apath}.spans[{j}]", "expected [start, end] integer pair")
            spans.append((pair[0], pair[1]))
        aattrs = attributes_from_obj(_expect(entry, "attributes", list, apath), f"{apath}.attributes")
        try:
            annotation = Annotation(aid, atype, spans, aattrs)
        except Exception as exc:
            raise ParseError(apath, str(exc)) from None
        doc._annotations[annotation.id] = annotation

    if next_id <= max_id:
        raise ParseError(f"{path}.next_id", f"next_id {next_id} not past max id {max_id}")
    doc._next_id = next_id
    return doc


def import_interchange(data: bytes) -> Document:
    """Parse interchange JSON bytes back into a document."""
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError("$", f"not valid UTF-8 JSON: {exc}") from None
    return document_from_obj(obj)


# ---------------------------------------------------------------------------
# Collection directories


def _atomic_write(path: Path, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial content."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except OSError:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _doc_path(root: Path, doc_id: str) -> Path:
    if not _SAFE_DOC_ID.match(doc_id):
        raise IoError(f"document id {doc_id!r} is not usable as a file name")
    return root / DOCS_DIR / f"{doc_id}.json"


def manifest_to_obj(collection: Collection) -> dict:
    return {
        "version": INTERCHANGE_VERSION,
        "name": collection.name,
        "documents": collection.document_ids,
        "attributes": attributes_to_obj(collection.attributes),
    }


def save_collection(collection: Collection, path: Union[str, Path]) -> None:
    """Persist a collection as ``<dir>/manifest.json`` + ``<dir>/docs/<id>.json``.

    Every file is replaced atomically; re-saving an unchanged collection is
    byte-for-byte idempotent. Document files no longer listed by the
    manifest are removed.
    """
    root = Path(path)
    docs_dir = root / DOCS_DIR
    try:
        docs_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create collection directory {root}: {exc}") from exc

    payloads = [(_doc_path(root, doc.id), export_document(doc)) for doc in collection]
    try:
        for doc_path, payload in payloads:
            _atomic_write(doc_path, payload)
        _atomic_write(root / MANIFEST_NAME, _dump_json(manifest_to_obj(collection)))
        keep = {p.name for p, _ in payloads}
        for stale in docs_dir.glob("*.json"):
            if stale.name not in keep:
                stale.unlink()
    except OSError as exc:
        raise IoError(f"cannot write collection at {root}: {exc}") from exc


def load_collection(path: Union[str, Path]) -> Collection:
    """Load a collection directory written by :func:`save_collection`."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise IoError(f"no manifest at {manifest_path}")
    try:
        obj = json.loads(manifest_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError("$", f"unreadable manifest: {exc}") from None

    version = _expect(obj, "version", int, "$")
    if version != INTERCHANGE_VERSION:
        raise UnknownVersionError(version)
    name = _expect(obj, "name", str, "$")
    doc_ids = _expect(obj, "documents", list, "$")
    attrs = attributes_from_obj(_expect(obj, "attributes", list, "$"), "$.attributes")

    collection = Collection(name, attrs)
    for doc_id in doc_ids:
        if not isinstance(doc_id, str):
            raise ParseError("$.documents", f"document id {doc_id!r} is not a string")
        doc_path = _doc_path(root, doc_id)
        if not doc_path.is_file():
            raise MissingDocumentError(doc_id, doc_path)
        try:
            data = doc_path.read_bytes()
        except OSError as exc:
            raise IoError(f"cannot read {doc_path}: {exc}") from exc
        doc = import_interchange(data)
        if doc.id != doc_id:
            raise ParseError("$.id", f"file {doc_path.name} holds document {doc.id!r}")
        collection.add_document(doc)
    return collection
