"""Request/response session management plus a websocket state stream.

The per-session pump task is the sole mutator: websocket handlers only
enqueue commands, which are applied at step boundaries. Any number of
read-only subscribers may watch one session.
"""

from __future__ import annotations

import asyncio
import os
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .configs import build_episode_driver, episode_config_from
from .steering import Session, handle_command


class _LiveSession:
    def __init__(self, session: Session):
        self.session = session
        self.commands: asyncio.Queue = asyncio.Queue()
        self.subscribers: set[asyncio.Queue] = set()
        self.pump_task: Optional[asyncio.Task] = None
        self.step_requests = 0

    async def broadcast(self, message: dict) -> None:
        for q in list(self.subscribers):
            await q.put(message)

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self.subscribers.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        self.subscribers.discard(q)


async def _pump(live: _LiveSession) -> None:
    """Owns all session mutation; runs until the episode ends."""
    session = live.session
    while True:
        timeout: Optional[float] = None
        if session.mode == "running" and not session.driver.env.done:
            timeout = 1.0 / session.rate
        try:
            command, reply_q = await asyncio.wait_for(live.commands.get(),
                                                      timeout=timeout)
        except asyncio.TimeoutError:
            command, reply_q = None, None

        if command is not None:
            ack = handle_command(session, command)
            if command.get("type") == "step" and ack.get("ok"):
                live.step_requests += 1
            await reply_q.put(ack)

        should_step = False
        if not session.driver.env.done:
            if session.mode == "running" and command is None:
                should_step = True
            elif session.mode == "stepping" and live.step_requests > 0:
                live.step_requests -= 1
                should_step = True

        if should_step:
            await live.broadcast(session.step_message())
            if session.driver.env.done:
                await live.broadcast(session.end_message())
                session.mode = "paused"


def create_app() -> FastAPI:
    app = FastAPI(title="dynaplan steering service")
    app.state.sessions = {}

    @app.post("/sessions")
    async def create_session(config: dict):
        cfg = episode_config_from(config)
        driver = build_episode_driver(cfg)
        record_path = cfg.record_path
        session = Session(driver=driver, record_path=record_path)
        live = _LiveSession(session)
        app.state.sessions[session.session_id] = live
        live.pump_task = asyncio.create_task(_pump(live))
        return {"session_id": session.session_id,
                "env_kind": cfg.env_kind, "seed": cfg.seed}

    @app.get("/sessions")
    async def list_sessions():
        return [{
            "session_id": sid,
            "mode": live.session.mode,
            "t": live.session.driver.t,
            "done": live.session.driver.env.done,
            "subscribers": len(live.subscribers),
        } for sid, live in app.state.sessions.items()]

    @app.get("/sessions/{session_id}")
    async def session_detail(session_id: str):
        live = app.state.sessions.get(session_id)
        if live is None:
            raise HTTPException(404, f"no such session {session_id}")
        s = live.session
        return {"session_id": session_id, "mode": s.mode, "t": s.driver.t,
                "done": s.driver.env.done, "seq": s.seq,
                "record_path": s.record_path, "saved_path": s.saved_path}

    @app.websocket("/ws/{session_id}")
    async def session_ws(ws: WebSocket, session_id: str):
        await ws.accept()
        live = app.state.sessions.get(session_id)
        if live is None:
            await ws.send_json({"type": "error",
                                "detail": f"no such session {session_id}"})
            await ws.close()
            return
        updates = live.subscribe()
        # New subscribers immediately receive a full snapshot.
        await ws.send_json(live.session.snapshot_message())
        if live.session.driver.env.done:
            await ws.send_json(live.session.end_message())

        async def forward_updates():
            while True:
                await ws.send_json(await updates.get())

        forwarder = asyncio.create_task(forward_updates())
        try:
            while True:
                command = await ws.receive_json()
                if not isinstance(command, dict):
                    await ws.send_json({"type": "ack", "ok": False,
                                        "detail": "malformed command"})
                    continue
                reply_q: asyncio.Queue = asyncio.Queue()
                await live.commands.put((command, reply_q))
                await ws.send_json(await reply_q.get())
        except WebSocketDisconnect:
            pass
        finally:
            forwarder.cancel()
            live.unsubscribe(updates)

    console_dir = os.path.join(os.path.dirname(os.path.dirname(
        os.path.dirname(os.path.abspath(__file__)))), "frontend")
    if os.path.isfile(os.path.join(console_dir, "index.html")) \
            and os.path.isdir(os.path.join(console_dir, "dist")):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=console_dir, html=True),
                  name="console")
    return app


def serve(host: str = "127.0.0.1", port: int = 8710) -> None:
    import uvicorn
    uvicorn.run(create_app(), host=host, port=port, log_level="warning")
