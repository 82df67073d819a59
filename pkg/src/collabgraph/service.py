"""HTTP/websocket front for the graph server.

Routes:
  GET  /health                 liveness probe
  GET  /meta                   the loaded metamodel document
  GET  /models                 known model ids
  POST /models                 create a model (optional {"id": ...})
  WS   /model/{modelId}        JSON frames, one message per websocket frame

Static files (the browser client, when built) are served from the
configured directory at /.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import yaml
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import metamodel as metamodel_mod
from . import protocol as proto
from .errors import CollabGraphError, DecodeError, ProtocolError, UnknownModelError
from .schema import TableStore
from .server import GraphServer, Session


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    metamodel_path: str | None = None  # None = bundled flowchart sample
    auto_create: bool = True
    persist: bool = False
    static_dir: str | None = None


def load_config(path) -> ServiceConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    return ServiceConfig(
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8000)),
        metamodel_path=raw.get("metamodel"),
        auto_create=bool(raw.get("autoCreate", True)),
        persist=bool(raw.get("persist", False)),
        static_dir=raw.get("staticDir"),
    )


def _load_spec(config: ServiceConfig):
    if config.metamodel_path is None:
        import importlib.resources as ir

        text = (ir.files("collabgraph") / "samples" / "flowchart.yaml").read_text()
    else:
        text = Path(config.metamodel_path).read_text(encoding="utf-8")
    return metamodel_mod.parse_metamodel(text)


def create_app(config: ServiceConfig | None = None, server: GraphServer | None = None):
    config = config or ServiceConfig()
    if server is None:
        spec = _load_spec(config)
        store = TableStore(spec) if config.persist else None
        server = GraphServer(spec, auto_create=config.auto_create, store=store)

    app = FastAPI(title="collabgraph")
    app.state.server = server
    app.state.config = config

    @app.get("/health")
    def health():
        return {"status": "ok", "models": len(server.models)}

    @app.get("/meta")
    def meta():
        return metamodel_mod.metamodel_to_dict(server.spec)

    @app.get("/models")
    def models():
        return {"models": sorted(server.models)}

    @app.post("/models")
    def create_model(body: dict | None = None):
        model_id = (body or {}).get("id")
        if model_id is not None and model_id in server.models:
            raise HTTPException(status_code=409, detail=f"model {model_id!r} exists")
        m = server.create_model(model_id)
        return {"id": m.id}

    @app.websocket("/model/{model_id}")
    async def model_ws(ws: WebSocket, model_id: str):
        await ws.accept()
        try:
            server.get_model(model_id)
        except UnknownModelError:
            await ws.close(code=4404, reason=f"unknown model {model_id!r}")
            return
        import asyncio

        wakeup = asyncio.Event()
        session = Session(
            sessionId=proto.new_id(),
            userId=ws.query_params.get("user", "anonymous"),
            notify=wakeup.set,
        )
        server.handle_connect(session, model_id)

        async def writer():
            while True:
                await wakeup.wait()
                wakeup.clear()
                while session.outbound:
                    frame = session.outbound.popleft()
                    # strip the length header: websocket frames delimit themselves
                    _, _, body = frame.partition(b"\n")
                    await ws.send_text(body.decode("utf-8"))

        writer_task = asyncio.create_task(writer())
        wakeup.set()  # flush the init snapshot
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = proto.decode_json_message(text)
                    server.handle_message(session, msg)
                except (ProtocolError, DecodeError, CollabGraphError) as exc:
                    await ws.send_text(json.dumps({"error": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            writer_task.cancel()
            server.handle_disconnect(session)

    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="static")

    return app


def run_service(config: ServiceConfig):
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
