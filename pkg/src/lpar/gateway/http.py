"""HTTP and WebSocket channel adapter.

All bodies are UTF-8 JSON. Error responses always carry a machine
readable `code` field alongside a human `message`.
"""

from __future__ import annotations

from contextlib import asynccontextmanager

import anyio
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from ..registry import UnknownAgent, UnknownApp
from ..runtime import Platform
from ..stores import (
    FeedbackRecord,
    InvalidScore,
    SessionClosed,
    SessionNotActive,
    UnknownSession,
    UnsupportedChannel,
)


class BindError(Exception):
    pass


_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (UnknownSession, 404, "unknown_session"),
    (UnknownApp, 404, "unknown_app"),
    (UnknownAgent, 404, "unknown_agent"),
    (UnsupportedChannel, 400, "unsupported_channel"),
    (InvalidScore, 400, "invalid_score"),
    (SessionClosed, 409, "session_closed"),
    (SessionNotActive, 409, "session_not_active"),
]


def _error_response(exc: Exception) -> JSONResponse:
    for exc_type, status, code in _ERROR_MAP:
        if isinstance(exc, exc_type):
            return JSONResponse(status_code=status, content={"code": code, "message": str(exc)})
    return JSONResponse(status_code=500, content={"code": "internal_error", "message": str(exc)})


def create_app(platform: Platform) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        platform.snapshot()

    app = FastAPI(title="lpar gateway", lifespan=lifespan)

    async def handle_platform_error(request: Request, exc: Exception):
        return _error_response(exc)

    for exc_type, _status, _code in _ERROR_MAP:
        app.add_exception_handler(exc_type, handle_platform_error)

    @app.post("/api/apps/{app_id}/sessions", status_code=201)
    async def open_session(app_id: str, body: dict):
        user = str(body.get("user", "anonymous"))
        channel = str(body.get("channel", "web"))
        profile = platform.stores.resolve_user(channel, user)
        session, greeting = platform.open_conversation(app_id, profile.user_id, channel)
        return {"session_id": session.session_id, "greeting": greeting}

    @app.post("/api/sessions/{session_id}/messages")
    async def post_message(session_id: str, body: dict):
        text = str(body.get("text", "")).strip()
        if not text:
            return JSONResponse(status_code=400, content={"code": "empty_text", "message": "text required"})
        result = await anyio.to_thread.run_sync(platform.turn, session_id, text)
        return result.to_wire()

    @app.get("/api/apps/{app_id}/agents")
    async def list_agents(app_id: str):
        # Private topic names and centroids stay internal.
        return [
            {
                "agent_id": d.agent_id,
                "name": d.name,
                "version": d.version,
                "node_type": d.node_type.value,
                "status": d.status.value,
                "agent_class": d.agent_class.value,
                "rating": d.rating.value,
                "avg_response_time_ms": d.avg_response_time_ms,
            }
            for d in platform.registry.agents_of(app_id)
        ]

    @app.post("/api/sessions/{session_id}/feedback", status_code=204)
    async def post_feedback(session_id: str, body: dict):
        record = FeedbackRecord(
            session_id=session_id,
            agent_id=str(body.get("agent_id", "")),
            score=int(body.get("score", 0)),
            comment=str(body.get("comment", "")),
        )
        platform.stores.session(session_id)  # 404 on unknown session
        platform.stores.record_feedback(record)
        return None

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        return platform.stores.session(session_id).to_dict()

    @app.websocket("/ws/sessions/{session_id}")
    async def ws_session(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            platform.stores.session(session_id)
        except UnknownSession:
            await websocket.send_json({"type": "error", "code": "unknown_session"})
            await websocket.close()
            return
        try:
            while True:
                frame = await websocket.receive_json()
                if frame.get("type") != "user_message":
                    await websocket.send_json({"type": "error", "code": "unknown_frame"})
                    continue
                text = str(frame.get("text", "")).strip()
                if not text:
                    await websocket.send_json({"type": "error", "code": "empty_text"})
                    continue
                result = await anyio.to_thread.run_sync(platform.turn, session_id, text)
                await websocket.send_json({"type": "bot_message", **result.to_wire()})
                if result.handover_reason is not None:
                    await websocket.send_json({"type": "handover", "reason": result.handover_reason})
        except WebSocketDisconnect:
            return

    return app


def serve_http(platform: Platform, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(platform)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        raise BindError(f"{host}:{port}: {exc}") from exc
