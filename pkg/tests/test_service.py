import json

import pytest
from fastapi.testclient import TestClient

from annotium.builtins import builtin_registry
from annotium.components import System
from annotium.engine import run_system
from annotium.model import Document
from annotium.service import ServerConfig, create_app
from annotium.storage import EncodingId, export_document, import_document
from support import FIXTURES, SENTENCE_TEXT, sentence_document

LEXICON = str(FIXTURES / "figure2.lex")
TRIO = ["tokenizer", "sentence_splitter", "pos_tagger"]
RUN_BODY = {"components": TRIO, "params": {"pos_tagger": {"lexicon": LEXICON}}}


@pytest.fixture
def registry():
    registry = builtin_registry()
    registry.register_system(System("trio", list(TRIO), {"pos_tagger": {"lexicon": LEXICON}}))
    return registry


@pytest.fixture
def client(tmp_path, registry):
    config = ServerConfig(root=tmp_path / "collections")
    app = create_app(config, registry)
    with TestClient(app) as client:
        yield client


def make_collection(client, name="demo"):
    response = client.post("/api/v1/collections", json={"name": name})
    assert response.status_code == 201
    return name


def upload_text(client, collection, text=SENTENCE_TEXT, doc_id="doc1", **params):
    response = client.post(
        f"/api/v1/collections/{collection}/documents",
        params={"id": doc_id, **params},
        content=text.encode("utf-8") if isinstance(text, str) else text,
        headers={"content-type": "text/plain"},
    )
    assert response.status_code == 201, response.text
    return response.json()["id"]


class TestBasics:
    def test_healthz(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_components_listing(self, client):
        names = {d["name"] for d in client.get("/api/v1/components").json()}
        assert names == {"tokenizer", "html_tokenizer", "sentence_splitter", "pos_tagger"}

    def test_systems_listing(self, client):
        systems = client.get("/api/v1/systems").json()
        assert systems[0]["name"] == "trio"
        assert systems[0]["components"] == TRIO

    def test_collections_lifecycle(self, client):
        assert client.get("/api/v1/collections").json() == []
        make_collection(client, "demo")
        listing = client.get("/api/v1/collections").json()
        assert listing == [{"name": "demo", "documents": []}]
        duplicate = client.post("/api/v1/collections", json={"name": "demo"})
        assert duplicate.status_code == 409
        assert "error" in duplicate.json()


class TestUpload:
    def test_plain_text_round_trip(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.get(f"/api/v1/collections/demo/documents/{doc_id}")
        assert response.status_code == 200
        assert response.json()["text"] == SENTENCE_TEXT

    def test_greek_encoding_param(self, client):
        make_collection(client)
        greek = (FIXTURES / "greek_iso8859_7.bin").read_bytes()
        doc_id = upload_text(client, "demo", text=greek, doc_id="el", encoding="ISO-8859-7")
        body = client.get(f"/api/v1/collections/demo/documents/{doc_id}").json()
        assert "γρήγορη" in body["text"]

    def test_interchange_upload(self, client, figure_doc):
        make_collection(client)
        response = client.post(
            "/api/v1/collections/demo/documents",
            content=export_document(figure_doc),
            headers={"content-type": "application/json"},
        )
        assert response.status_code == 201
        assert response.json()["id"] == "figure2"

    def test_malformed_interchange_reports_path(self, client):
        make_collection(client)
        broken = {"version": 1, "id": "x", "attributes": [], "next_id": 0, "annotations": []}
        response = client.post(
            "/api/v1/collections/demo/documents",
            content=json.dumps(broken),
            headers={"content-type": "application/json"},
        )
        assert response.status_code == 400
        assert response.json()["detail"] == "$.text"

    def test_unknown_collection_404(self, client):
        response = client.post(
            "/api/v1/collections/ghost/documents",
            content=b"x",
            headers={"content-type": "text/plain"},
        )
        assert response.status_code == 404

    def test_duplicate_doc_id_409(self, client):
        make_collection(client)
        upload_text(client, "demo", doc_id="same")
        response = client.post(
            "/api/v1/collections/demo/documents",
            params={"id": "same"},
            content=b"again",
            headers={"content-type": "text/plain"},
        )
        assert response.status_code == 409

    def test_oversize_upload_413(self, tmp_path, registry):
        config = ServerConfig(root=tmp_path / "c", max_upload_bytes=64)
        with TestClient(create_app(config, registry)) as client:
            make_collection(client)
            response = client.post(
                "/api/v1/collections/demo/documents",
                content=b"x" * 100,
                headers={"content-type": "text/plain"},
            )
            assert response.status_code == 413
            assert "error" in response.json()

    def test_bad_encoding_name_400(self, client):
        make_collection(client)
        response = client.post(
            "/api/v1/collections/demo/documents",
            params={"encoding": "EBCDIC"},
            content=b"x",
            headers={"content-type": "text/plain"},
        )
        assert response.status_code == 400

    def test_undecodable_body_400(self, client):
        make_collection(client)
        response = client.post(
            "/api/v1/collections/demo/documents",
            content=b"ab\xff",
            headers={"content-type": "text/plain"},
        )
        assert response.status_code == 400
        assert "offset 2" in response.json()["detail"]


class TestRunAndQuery:
    def test_run_trio_then_query(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.post(f"/api/v1/collections/demo/documents/{doc_id}/run", json=RUN_BODY)
        assert response.status_code == 200, response.text
        report = response.json()
        assert report["totals"]["ok"] == 1
        assert report["totals"]["annotations_added"] == {"sentence": 1, "token": 6}

        tokens = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations", params={"type": "token"}
        ).json()
        assert len(tokens) == 6

        ranged = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"start": 18, "end": 19},
        ).json()
        assert {a["id"] for a in ranged} == {4, 6}  # no link fixture on this doc

    def test_run_by_registered_system_name(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/run", json={"system": "trio"}
        )
        assert response.status_code == 200
        assert response.json()["totals"]["annotations_added"]["token"] == 6

    def test_missing_precondition_422(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/run",
            json={"components": ["pos_tagger"], "params": {"pos_tagger": {"lexicon": LEXICON}}},
        )
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert {"document": doc_id, "component": "pos_tagger", "condition": "(token,·)"} in detail

    def test_unknown_component_404(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/run", json={"components": ["ghost"]}
        )
        assert response.status_code == 404
        assert "ghost" in response.json()["error"]

    def test_concurrent_run_on_same_document_409(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        lock = client.app.state.store.lock_for("demo", doc_id)
        assert lock.acquire(blocking=False)
        try:
            response = client.post(
                f"/api/v1/collections/demo/documents/{doc_id}/run", json=RUN_BODY
            )
            assert response.status_code == 409
        finally:
            lock.release()

    def test_query_bad_range_400(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"start": 9, "end": 3},
        )
        assert response.status_code == 400

    def test_query_matching_attribute(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        client.post(f"/api/v1/collections/demo/documents/{doc_id}/run", json=RUN_BODY)
        hits = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"type": "token", "attr": "pos", "value": "NN"},
        ).json()
        assert [a["id"] for a in hits] == [4]

    def test_remote_equals_local(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo", doc_id="fig2")
        client.post(f"/api/v1/collections/demo/documents/{doc_id}/run", json=RUN_BODY)
        remote = client.get(f"/api/v1/collections/demo/documents/{doc_id}").content

        local = import_document(SENTENCE_TEXT.encode(), EncodingId.UTF_8, "fig2")
        run_system(
            builtin_registry(),
            System("trio", list(TRIO), {"pos_tagger": {"lexicon": LEXICON}}),
            local,
        )
        assert remote == export_document(local)

    def test_dry_run_option(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/run",
            json={**RUN_BODY, "options": {"dry_run": True}},
        )
        assert response.status_code == 200
        assert response.json()["dry_run"] is True
        tokens = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations", params={"type": "token"}
        ).json()
        assert tokens == []


class TestAnnotationCrud:
    def _prepared(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        client.post(f"/api/v1/collections/demo/documents/{doc_id}/run", json=RUN_BODY)
        return doc_id

    def test_create_annotation(self, client):
        doc_id = self._prepared(client)
        response = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            json={"type": "phrase", "spans": [[10, 25]], "attributes": []},
        )
        assert response.status_code == 201
        created = response.json()
        assert created["spans"] == [[10, 25]]
        fetched = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"type": "phrase"},
        ).json()
        assert fetched == [created]

    def test_create_with_dangling_reference_rejected(self, client):
        doc_id = self._prepared(client)
        response = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            json={
                "type": "rel",
                "spans": [[0, 4]],
                "attributes": [{"name": "head", "kind": "ANNOTATION_ID", "value": 999}],
            },
        )
        assert response.status_code == 400
        assert any("DanglingReference" in v for v in response.json()["detail"])
        # rollback: nothing persisted
        assert (
            client.get(
                f"/api/v1/collections/demo/documents/{doc_id}/annotations",
                params={"type": "rel"},
            ).json()
            == []
        )

    def test_replace_annotation_attributes(self, client):
        doc_id = self._prepared(client)
        before = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"type": "token", "attr": "pos", "value": "NN"},
        ).json()
        target = before[0]
        target["attributes"] = [
            {"name": "pos", "kind": "STRING", "value": "NNS"},
            {"name": "type", "kind": "STRING", "value": "ELW"},
        ]
        response = client.put(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations/{target['id']}",
            json={"attributes": target["attributes"]},
        )
        assert response.status_code == 200
        refreshed = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"type": "token", "attr": "pos", "value": "NNS"},
        ).json()
        assert [a["id"] for a in refreshed] == [target["id"]]

    def test_delete_annotation_and_dangling_protection(self, client):
        doc_id = self._prepared(client)
        # token 0 is referenced by the sentence's constituents: delete must roll back
        response = client.delete(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations/0"
        )
        assert response.status_code == 400
        still_there = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations", params={"type": "token"}
        ).json()
        assert len(still_there) == 6
        # but an unreferenced annotation deletes fine
        created = client.post(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            json={"type": "scratch", "spans": [[0, 1]]},
        ).json()
        response = client.delete(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations/{created['id']}"
        )
        assert response.status_code == 204

    def test_annotation_404s(self, client):
        doc_id = self._prepared(client)
        assert (
            client.put(
                f"/api/v1/collections/demo/documents/{doc_id}/annotations/999", json={}
            ).status_code
            == 404
        )
        assert (
            client.delete(
                f"/api/v1/collections/demo/documents/{doc_id}/annotations/999"
            ).status_code
            == 404
        )


class TestPersistence:
    def test_restart_loses_nothing(self, tmp_path, registry):
        root = tmp_path / "collections"
        config = ServerConfig(root=root)
        with TestClient(create_app(config, registry)) as client:
            make_collection(client)
            doc_id = upload_text(client, "demo")
            client.post(f"/api/v1/collections/demo/documents/{doc_id}/run", json=RUN_BODY)
            before = client.get(f"/api/v1/collections/demo/documents/{doc_id}").content

        with TestClient(create_app(ServerConfig(root=root), builtin_registry())) as fresh:
            after = fresh.get(f"/api/v1/collections/demo/documents/{doc_id}").content
            assert after == before

    def test_document_delete_persists(self, tmp_path, registry):
        root = tmp_path / "collections"
        with TestClient(create_app(ServerConfig(root=root), registry)) as client:
            make_collection(client)
            doc_id = upload_text(client, "demo")
            assert client.delete(f"/api/v1/collections/demo/documents/{doc_id}").status_code == 204
        with TestClient(create_app(ServerConfig(root=root), builtin_registry())) as fresh:
            assert fresh.get(f"/api/v1/collections/demo/documents/{doc_id}").status_code == 404


class TestErrorShape:
    def test_api_errors_are_json(self, client):
        response = client.get("/api/v1/collections/ghost/documents/nope")
        assert response.status_code == 404
        body = response.json()
        assert set(body) == {"error", "detail"}

    def test_invalid_query_param_type_is_json_400(self, client):
        make_collection(client)
        doc_id = upload_text(client, "demo")
        response = client.get(
            f"/api/v1/collections/demo/documents/{doc_id}/annotations",
            params={"start": "abc", "end": "2"},
        )
        assert response.status_code == 400
        assert "error" in response.json()


class TestStaticUi:
    def test_static_dir_served_at_root(self, tmp_path, registry):
        static = tmp_path / "ui"
        static.mkdir()
        (static / "index.html").write_text("<html><body>annotator</body></html>")
        config = ServerConfig(root=tmp_path / "collections", static_dir=static)
        with TestClient(create_app(config, registry)) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert "annotator" in response.text
            # api still wins over static
            assert client.get("/api/v1/components").status_code == 200
