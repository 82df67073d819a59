"""HTTP/websocket service: routes, websocket sessions, error frames."""

import json

import pytest
from fastapi.testclient import TestClient

from collabgraph import protocol as p
from collabgraph.server import GraphServer
from collabgraph.service import ServiceConfig, create_app, load_config


@pytest.fixture()
def app(flowchart_spec):
    server = GraphServer(flowchart_spec, auto_create=True)
    return create_app(ServiceConfig(), server=server)


@pytest.fixture()
def client(app):
    return TestClient(app)


def test_health(client):
    res = client.get("/health")
    assert res.status_code == 200
    assert res.json()["status"] == "ok"


def test_meta_returns_metamodel(client):
    res = client.get("/meta")
    assert res.status_code == 200
    doc = res.json()
    assert doc["graphModel"]["name"] == "Flowchart"
    assert any(n["name"] == "Task" for n in doc["nodes"])


def test_model_crud(client):
    assert client.get("/models").json() == {"models": []}
    res = client.post("/models", json={"id": "m1"})
    assert res.status_code == 200
    assert res.json() == {"id": "m1"}
    assert client.get("/models").json() == {"models": ["m1"]}
    assert client.post("/models", json={"id": "m1"}).status_code == 409
    generated = client.post("/models", json={}).json()["id"]
    assert generated and generated != "m1"


def _recv(ws):
    return json.loads(ws.receive_text())


def test_websocket_init_and_edit_roundtrip(client):
    client.post("/models", json={"id": "m1"})
    with client.websocket_connect("/model/m1?user=alice") as ws:
        init = _recv(ws)
        assert init["kind"] == "init"
        assert init["snapshot"]["id"] == "m1"

        edit = p.edit_message("m1", "alice", [
            p.CreateNode(id="n1", typeName="Start", containerId="m1", x=3, y=4)])
        length, _, body = p.encode_message(edit).partition(b"\n")
        ws.send_text(body.decode())

        echo = _recv(ws)
        assert echo["kind"] == "edit"
        assert echo["messageId"] == edit.messageId
        assert echo["commands"][0]["id"] == "n1"
        assert echo["commands"][0]["version"] == 1


def test_websocket_broadcast_between_sessions(client):
    client.post("/models", json={"id": "m1"})
    with client.websocket_connect("/model/m1?user=alice") as alice, \
            client.websocket_connect("/model/m1?user=bob") as bob:
        _recv(alice), _recv(bob)
        edit = p.edit_message("m1", "alice", [
            p.CreateNode(id="n1", typeName="Task", containerId="m1")])
        _, _, body = p.encode_message(edit).partition(b"\n")
        alice.send_text(body.decode())
        for ws in (alice, bob):
            msg = _recv(ws)
            assert msg["kind"] == "edit"
            assert msg["commands"][0]["id"] == "n1"


def test_websocket_stale_edit_gets_revert(client):
    client.post("/models", json={"id": "m1"})
    with client.websocket_connect("/model/m1?user=alice") as ws:
        _recv(ws)
        create = p.edit_message("m1", "alice", [
            p.CreateNode(id="n1", typeName="Start", containerId="m1", x=10, y=10)])
        _, _, body = p.encode_message(create).partition(b"\n")
        ws.send_text(body.decode())
        _recv(ws)
        stale = p.edit_message("m1", "alice", [
            p.MoveNode(id="n1", fromContainerId="m1", toContainerId="m1",
                       from_=[99, 99], to=[0, 0])])
        _, _, body = p.encode_message(stale).partition(b"\n")
        ws.send_text(body.decode())
        msg = _recv(ws)
        assert msg["kind"] == "revert"
        assert msg["messageId"] == stale.messageId
        assert msg["commands"][0]["state"]["x"] == 10


def test_websocket_malformed_json_yields_error(client):
    client.post("/models", json={"id": "m1"})
    with client.websocket_connect("/model/m1?user=alice") as ws:
        _recv(ws)
        ws.send_text("{ this is not json")
        msg = _recv(ws)
        assert "error" in msg


def test_websocket_unknown_model_rejected(flowchart_spec):
    server = GraphServer(flowchart_spec, auto_create=False)
    app = create_app(ServiceConfig(auto_create=False), server=server)
    client = TestClient(app)
    with pytest.raises(Exception):
        with client.websocket_connect("/model/nope") as ws:
            ws.receive_text()


def test_load_config(tmp_path):
    path = tmp_path / "svc.yaml"
    path.write_text("host: 0.0.0.0\nport: 9001\npersist: true\n")
    config = load_config(path)
    assert config.host == "0.0.0.0"
    assert config.port == 9001
    assert config.persist is True
    assert config.metamodel_path is None


def test_persisting_server_snapshots(flowchart_spec):
    from collabgraph.schema import TableStore

    store = TableStore(flowchart_spec)
    server = GraphServer(flowchart_spec, auto_create=True, store=store)
    app = create_app(ServiceConfig(persist=True), server=server)
    client = TestClient(app)
    client.post("/models", json={"id": "m1"})
    with client.websocket_connect("/model/m1?user=alice") as ws:
        _recv(ws)
        edit = p.edit_message("m1", "alice", [
            p.CreateNode(id="n1", typeName="Task", containerId="m1")])
        _, _, body = p.encode_message(edit).partition(b"\n")
        ws.send_text(body.decode())
        _recv(ws)
    assert any(row["id"] == "n1" for row in store.rows["task"])
