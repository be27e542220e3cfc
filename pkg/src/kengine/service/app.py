"""HTTP + WebSocket surface over the engine.

Endpoints (all JSON):
  POST   /api/session                     new chat session
  POST   /api/chat                        {session_id, text} -> turn
  GET    /api/trace/{turn_id}             full reasoning trace
  GET    /api/graph/{node_id}?depth=N     neighborhood fragment
  DELETE /api/edge/{edge_id}?confirm=     challenge or delete+undo token
  POST   /api/edge/{edge_id}/restore      undo a deletion
  GET    /api/scene                       ground-truth snapshot
  GET    /api/health
  WS     /api/events?session=&from_seq=   snapshot + ordered deltas

Errors carry machine-readable codes in the response body.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..errors import (
    BadArgument,
    BadCallTree,
    EdgeAlreadyDeleted,
    EdgeNotDeleted,
    EdgeProtected,
    EngineError,
    NoTrace,
    UnknownEdge,
    UnknownId,
    UnknownSession,
    UnknownTurn,
    UnresolvedLemma,
)
from .engine import Engine

logger = logging.getLogger(__name__)

HEARTBEAT_SECONDS = 2.0
POLL_SECONDS = 0.05

_STATUS = {
    UnknownId.code: 404,
    UnknownEdge.code: 404,
    UnknownTurn.code: 404,
    UnknownSession.code: 404,
    NoTrace.code: 404,
    EdgeAlreadyDeleted.code: 409,
    EdgeNotDeleted.code: 409,
    EdgeProtected.code: 409,
    UnresolvedLemma.code: 400,
    BadArgument.code: 400,
    BadCallTree.code: 400,
}


def _http_error(exc: EngineError) -> HTTPException:
    return HTTPException(status_code=_STATUS.get(exc.code, 400),
                         detail=exc.to_payload())


class ChatRequest(BaseModel):
    session_id: str
    text: str


def create_app(engine: Engine, tick_hz: float = 0.0,
               static_dir: Path | None = None,
               on_shutdown=None) -> FastAPI:
    """Wire the engine into a FastAPI app.  With tick_hz > 0 a background
    task drives the simulator; otherwise commands only advance when the
    engine runs synchronously (CLI, tests)."""

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = None
        if tick_hz > 0:
            async def drive():
                while True:
                    await asyncio.sleep(1.0 / tick_hz)
                    engine.tick()

            task = asyncio.create_task(drive())
        try:
            yield
        finally:
            if task is not None:
                task.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await task
            if on_shutdown is not None:
                on_shutdown()

    app = FastAPI(title="kengine", lifespan=lifespan)
    app.state.engine = engine

    @app.post("/api/session")
    def create_session():
        session = engine.create_session()
        return {"session_id": session.id}

    @app.post("/api/chat")
    def chat(request: ChatRequest):
        try:
            turn = engine.post_chat(request.session_id, request.text)
        except EngineError as exc:
            raise _http_error(exc)
        return turn.to_json()

    @app.get("/api/trace/{turn_id}")
    def trace(turn_id: int):
        try:
            return engine.get_trace(turn_id)
        except EngineError as exc:
            raise _http_error(exc)

    @app.get("/api/graph/{node_id}")
    def graph_neighborhood(node_id: str, depth: int = 1):
        try:
            return engine.get_graph_neighborhood(node_id, depth)
        except EngineError as exc:
            raise _http_error(exc)

    @app.delete("/api/edge/{edge_id}")
    def delete_edge(edge_id: str, confirm: bool = False):
        try:
            return engine.delete_edge(edge_id, confirm=confirm)
        except EngineError as exc:
            raise _http_error(exc)

    @app.post("/api/edge/{edge_id}/restore")
    def restore_edge(edge_id: str):
        try:
            return engine.restore_edge(edge_id)
        except EngineError as exc:
            raise _http_error(exc)

    @app.get("/api/scene")
    def scene():
        return engine.scene_snapshot()

    @app.get("/api/health")
    def health():
        return engine.health()

    @app.websocket("/api/events")
    async def events(ws: WebSocket):
        await ws.accept()
        from_seq = ws.query_params.get("from_seq")
        try:
            if from_seq is None:
                snapshot, cursor = engine.snapshot_with_seq()
                await ws.send_json({"type": "snapshot", "seq": cursor,
                                    "scene": snapshot})
            else:
                cursor = int(from_seq)
            idle = 0.0
            while True:
                fresh = engine.bus.since(cursor)
                if fresh:
                    for event in fresh:
                        await ws.send_json({"type": "event", **event})
                        cursor = event["seq"]
                    idle = 0.0
                else:
                    await asyncio.sleep(POLL_SECONDS)
                    idle += POLL_SECONDS
                    if idle >= HEARTBEAT_SECONDS:
                        await ws.send_json({"type": "heartbeat", "seq": cursor})
                        idle = 0.0
        except WebSocketDisconnect:
            return

    if static_dir is not None and static_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return FileResponse(static_dir / "index.html")

    return app
