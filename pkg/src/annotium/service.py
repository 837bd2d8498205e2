"""HTTP processing service: collections, components and runs over REST.

Exposes the platform to remote clients and the browser annotator. Every
mutation persists before the response goes out, so a restarted server picks
up exactly the committed state. Per-document mutations are serialized; a
run that finds its document busy answers 409 rather than queueing.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from annotium import storage
from annotium.broker import Broker, BrokerError
from annotium.components import (
    ComponentSystemError,
    Registry,
    System,
    UnknownComponentError,
    descriptor_to_obj,
)
from annotium.engine import (
    ComponentError,
    Engine,
    RunOptions,
    ValidationFailedError as RunValidationError,
)
from annotium.model import (
    Attribute,
    AttributeValue,
    Collection,
    Document,
    DuplicateDocumentError,
    InvalidRangeError,
    ModelError,
    NotFoundError,
    filter_annotations,
)

DEFAULT_PORT = 7720
DEFAULT_MAX_UPLOAD = 16 * 1024 * 1024


@dataclass
class ServerConfig:
    root: Union[str, Path]
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    static_dir: Optional[Union[str, Path]] = None

    def __post_init__(self) -> None:
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port {self.port} out of range")
        self.root = Path(self.root)


class ApiError(Exception):
    """An error with a fixed HTTP status and JSON body."""

    def __init__(self, status: int, error: str, detail: Any = None) -> None:
        super().__init__(error)
        self.status = status
        self.error = error
        self.detail = detail

    def response(self) -> JSONResponse:
        return JSONResponse({"error": self.error, "detail": self.detail}, status_code=self.status)


class CollectionStore:
    """Disk-backed collections under one root directory, cached in memory.

    Persisting writes the whole collection directory through the atomic
    save path; per-document locks serialize mutation so two writers never
    interleave on one document.
    """

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Collection] = {}
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._mutex = threading.Lock()

    def _dir(self, name: str) -> Path:
        if not name or "/" in name or name.startswith("."):
            raise ApiError(400, f"invalid collection name {name!r}")
        return self.root / name

    def names(self) -> list[str]:
        found = set(self._cache)
        for entry in self.root.iterdir() if self.root.is_dir() else []:
            if (entry / storage.MANIFEST_NAME).is_file():
                found.add(entry.name)
        return sorted(found)

    def create(self, name: str) -> Collection:
        with self._mutex:
            if name in self._cache or (self._dir(name) / storage.MANIFEST_NAME).exists():
                raise ApiError(409, f"collection {name!r} already exists")
            collection = Collection(name)
            self._cache[name] = collection
        self.persist(collection)
        return collection

    def get(self, name: str) -> Collection:
        with self._mutex:
            if name in self._cache:
                return self._cache[name]
        path = self._dir(name)
        if not (path / storage.MANIFEST_NAME).is_file():
            raise ApiError(404, f"unknown collection {name!r}")
        collection = storage.load_collection(path)
        with self._mutex:
            return self._cache.setdefault(name, collection)

    def persist(self, collection: Collection) -> None:
        storage.save_collection(collection, self._dir(collection.name))

    def lock_for(self, collection_name: str, doc_id: str) -> threading.Lock:
        with self._mutex:
            return self._locks.setdefault((collection_name, doc_id), threading.Lock())


def _get_document(store: CollectionStore, collection_name: str, doc_id: str) -> tuple[Collection, Document]:
    collection = store.get(collection_name)
    try:
        return collection, collection.get_document(doc_id)
    except NotFoundError:
        raise ApiError(404, f"unknown document {doc_id!r} in collection {collection_name!r}") from None


def _attrs_from_body(raw: Any, path: str = "attributes") -> list[Attribute]:
    try:
        return storage.attributes_from_obj(raw if raw is not None else [], path)
    except storage.ParseError as exc:
        raise ApiError(400, "invalid attributes", str(exc)) from None


def _mutate_and_persist(store: CollectionStore, collection: Collection, doc: Document, mutate):
    """Apply a document mutation, roll back and report if it breaks invariants."""
    snapshot = storage.document_to_obj(doc)
    try:
        result = mutate()
    except (ModelError, ApiError) as exc:
        if isinstance(exc, ApiError):
            raise
        raise ApiError(400, "invalid annotation data", str(exc)) from None
    violations = doc.validate()
    if violations:
        doc.assign(storage.document_from_obj(snapshot))
        raise ApiError(400, "validation failed", [str(v) for v in violations])
    store.persist(collection)
    return result


def create_app(
    config: ServerConfig,
    registry: Registry,
    broker: Optional[Broker] = None,
) -> FastAPI:
    """Build the REST application around a registry and collection root."""
    app = FastAPI(title="annotium", docs_url=None, redoc_url=None)
    store = CollectionStore(Path(config.root))
    engine = Engine(registry, broker)
    app.state.store = store
    app.state.engine = engine
    app.state.config = config

    @app.exception_handler(ApiError)
    async def handle_api_error(_req: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse({"error": "invalid request", "detail": str(exc)}, status_code=400)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/v1/components")
    def list_components():
        return [descriptor_to_obj(d) for d in registry.descriptors()]

    @app.get("/api/v1/systems")
    def list_systems():
        return [
            {"name": s.name, "components": list(s.components), "params": s.params}
            for s in registry.systems()
        ]

    @app.get("/api/v1/collections")
    def list_collections():
        out = []
        for name in store.names():
            collection = store.get(name)
            out.append({"name": name, "documents": collection.document_ids})
        return out

    @app.post("/api/v1/collections", status_code=201)
    async def create_collection(request: Request):
        body = await _json_body(request)
        name = body.get("name")
        if not isinstance(name, str) or not name:
            raise ApiError(400, "collection name required")
        store.create(name)
        return {"name": name, "documents": []}

    @app.post("/api/v1/collections/{collection_name}/documents", status_code=201)
    async def upload_document(collection_name: str, request: Request):
        collection = store.get(collection_name)
        body = await request.body()
        if len(body) > config.max_upload_bytes:
            raise ApiError(413, f"upload exceeds {config.max_upload_bytes} bytes")
        content_type = request.headers.get("content-type", "text/plain").split(";")[0].strip()
        if content_type == "application/json":
            try:
                doc = storage.import_interchange(body)
            except storage.UnknownVersionError as exc:
                raise ApiError(400, "unsupported interchange version", str(exc)) from None
            except storage.ParseError as exc:
                raise ApiError(400, "malformed interchange document", exc.path) from None
            requested = request.query_params.get("id")
            if requested:
                doc.id = requested
        elif content_type in ("text/plain", ""):
            encoding_name = request.query_params.get("encoding", "UTF-8")
            try:
                encoding = storage.EncodingId.from_name(encoding_name)
            except storage.StorageError as exc:
                raise ApiError(400, "unknown encoding", str(exc)) from None
            doc_id = request.query_params.get("id") or f"doc-{uuid.uuid4().hex[:12]}"
            try:
                doc = storage.import_document(body, encoding, doc_id)
            except storage.DecodeError as exc:
                raise ApiError(400, "decode error", str(exc)) from None
        else:
            raise ApiError(400, f"unsupported content type {content_type!r}")

        lock = store.lock_for(collection_name, doc.id)
        with lock:
            try:
                collection.add_document(doc)
            except DuplicateDocumentError as exc:
                raise ApiError(409, str(exc)) from None
            store.persist(collection)
        return {"id": doc.id}

    @app.get("/api/v1/collections/{collection_name}/documents/{doc_id}")
    def download_document(collection_name: str, doc_id: str):
        _, doc = _get_document(store, collection_name, doc_id)
        try:
            payload = storage.export_document(doc)
        except storage.ValidationFailedError as exc:
            raise ApiError(500, "document failed validation", [str(v) for v in exc.violations])
        return Response(content=payload, media_type="application/json")

    @app.delete("/api/v1/collections/{collection_name}/documents/{doc_id}", status_code=204)
    def delete_document(collection_name: str, doc_id: str):
        collection, _ = _get_document(store, collection_name, doc_id)
        with store.lock_for(collection_name, doc_id):
            collection.remove_document(doc_id)
            store.persist(collection)
        return Response(status_code=204)

    @app.get("/api/v1/collections/{collection_name}/documents/{doc_id}/annotations")
    def query_annotations(
        collection_name: str,
        doc_id: str,
        type: Optional[str] = None,
        attr: Optional[str] = None,
        value: Optional[str] = None,
        start: Optional[int] = None,
        end: Optional[int] = None,
    ):
        _, doc = _get_document(store, collection_name, doc_id)
        try:
            found = filter_annotations(
                doc,
                annotation_type=type,
                attr_name=attr,
                attr_value=AttributeValue.string(value) if value is not None else None,
                start=start,
                end=end,
            )
        except InvalidRangeError as exc:
            raise ApiError(400, str(exc)) from None
        return [storage.annotation_to_obj(a) for a in found]

    @app.post(
        "/api/v1/collections/{collection_name}/documents/{doc_id}/annotations", status_code=201
    )
    async def create_annotation(collection_name: str, doc_id: str, request: Request):
        collection, doc = _get_document(store, collection_name, doc_id)
        body = await _json_body(request)
        annotation_type = body.get("type")
        if not isinstance(annotation_type, str) or not annotation_type:
            raise ApiError(400, "annotation type required")
        spans = _spans_from_body(body.get("spans"))
        attrs = _attrs_from_body(body.get("attributes"))
        with store.lock_for(collection_name, doc_id):
            aid = _mutate_and_persist(
                store, collection, doc, lambda: doc.add_annotation(annotation_type, spans, attrs)
            )
        return storage.annotation_to_obj(doc.get_annotation(aid))

    @app.put("/api/v1/collections/{collection_name}/documents/{doc_id}/annotations/{annotation_id}")
    async def replace_annotation(
        collection_name: str, doc_id: str, annotation_id: int, request: Request
    ):
        collection, doc = _get_document(store, collection_name, doc_id)
        try:
            existing = doc.get_annotation(annotation_id)
        except NotFoundError:
            raise ApiError(404, f"unknown annotation {annotation_id}") from None
        body = await _json_body(request)
        annotation_type = body.get("type", existing.type)
        spans = (
            _spans_from_body(body["spans"])
            if "spans" in body
            else [(s.start, s.end) for s in existing.spans]
        )
        attrs = (
            _attrs_from_body(body.get("attributes"))
            if "attributes" in body
            else existing.attributes
        )
        with store.lock_for(collection_name, doc_id):
            annotation = _mutate_and_persist(
                store,
                collection,
                doc,
                lambda: doc.replace_annotation(annotation_id, annotation_type, spans, attrs),
            )
        return storage.annotation_to_obj(annotation)

    @app.delete(
        "/api/v1/collections/{collection_name}/documents/{doc_id}/annotations/{annotation_id}",
        status_code=204,
    )
    def delete_annotation(collection_name: str, doc_id: str, annotation_id: int):
        collection, doc = _get_document(store, collection_name, doc_id)
        try:
            doc.get_annotation(annotation_id)
        except NotFoundError:
            raise ApiError(404, f"unknown annotation {annotation_id}") from None
        with store.lock_for(collection_name, doc_id):
            _mutate_and_persist(
                store, collection, doc, lambda: doc.remove_annotation(annotation_id)
            )
        return Response(status_code=204)

    @app.post("/api/v1/collections/{collection_name}/documents/{doc_id}/run")
    async def run_pipeline(collection_name: str, doc_id: str, request: Request):
        collection, doc = _get_document(store, collection_name, doc_id)
        body = await _json_body(request)
        if "system" in body:
            try:
                system = registry.get_system(str(body["system"]))
            except UnknownComponentError as exc:
                raise ApiError(404, str(exc)) from None
        else:
            components = body.get("components")
            if not isinstance(components, list) or not components:
                raise ApiError(400, "components list (or system name) required")
            system = System("adhoc", [str(c) for c in components], body.get("params") or {})
        raw_options = body.get("options") or {}
        options = RunOptions(
            continue_on_error=False,
            strict_postconditions=bool(raw_options.get("strict_postconditions", False)),
            dry_run=bool(raw_options.get("dry_run", False)),
            wrapper_timeout=float(raw_options.get("wrapper_timeout", 60.0)),
        )

        lock = store.lock_for(collection_name, doc_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, f"document {doc_id!r} is busy with another run")
        try:
            try:
                report = engine.run_system(system, doc, options)
            except UnknownComponentError as exc:
                raise ApiError(404, str(exc)) from None
            except ComponentSystemError as exc:
                raise ApiError(400, str(exc)) from None
            except RunValidationError as exc:
                raise ApiError(
                    422,
                    "system validation failed",
                    [
                        {"document": d, "component": v.component, "condition": str(v.condition)}
                        for d, v in exc.violations
                    ],
                ) from None
            except (ComponentError, BrokerError) as exc:
                raise ApiError(500, "component failed", str(exc)) from None
            if not options.dry_run:
                store.persist(collection)
        finally:
            lock.release()
        return report.to_obj()

    if config.static_dir:
        app.mount("/", StaticFiles(directory=str(config.static_dir), html=True), name="ui")

    return app


def _spans_from_body(raw: Any) -> list[tuple[int, int]]:
    if not isinstance(raw, list) or not raw:
        raise ApiError(400, "spans must be a non-empty list of [start, end] pairs")
    spans = []
    for pair in raw:
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
        ):
            raise ApiError(400, f"bad span entry {pair!r}")
        spans.append((pair[0], pair[1]))
    return spans


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ApiError(400, "request body must be JSON") from None
    if not isinstance(body, dict):
        raise ApiError(400, "request body must be a JSON object")
    return body


def serve(config: ServerConfig, registry: Registry, broker: Optional[Broker] = None) -> None:
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    app = create_app(config, registry, broker)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
