"""HTTP/JSON + SSE surface over one running engine.

Endpoints (all under ``/api/v1``):

- ``GET  /assets``                   fleet summaries
- ``GET  /assets/{id}``              health, condition, rul, recommendation, history
- ``GET  /alarms?since=N``           alert events with seq > N
- ``GET  /recommendations``          latest active recommendation per asset
- ``POST /actions``                  {asset_id, action:{kind, amount?}, due}
- ``POST /whatif``                   {asset_id, action, defer_steps}
- ``GET  /stream?since=N``           server-sent events, one encoded EventRecord
                                     per message, catch-up from seq N then live

A single lock serializes engine access: the tick loop is the only writer,
API reads take snapshots, and operator submissions queue for the next tick.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading
from typing import Any, AsyncIterator

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import NotFound, StateError
from .events import encode_event
from .simulator import ActionKind, MaintenanceAction


class ActionBody(BaseModel):
    kind: str
    amount: float = 0.0


class ActionSubmission(BaseModel):
    asset_id: str
    action: ActionBody
    due: int = 0


class WhatIfBody(BaseModel):
    asset_id: str
    action: str = "replace"
    defer_steps: int = Field(0, ge=0)


class EngineHost:
    """Engine plus lock, subscriber fan-out, and an optional tick loop."""

    def __init__(self, engine: Engine, tick_interval_s: float | None = None):
        self.engine = engine
        self.lock = threading.Lock()
        self.tick_interval_s = tick_interval_s
        self._subscribers: list[queue.Queue] = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def tick(self) -> None:
        with self.lock:
            if self.engine.clock >= self.engine.horizon:
                return
            events = self.engine.tick()
            lines = [(e.seq, encode_event(e)) for e in events]
            subscribers = list(self._subscribers)
        for q in subscribers:
            for item in lines:
                q.put(item)

    def start(self) -> None:
        if self.tick_interval_s is None:
            return

        def loop() -> None:
            while not self._stop.is_set():
                self.tick()
                if self.engine.clock >= self.engine.horizon:
                    return
                self._stop.wait(self.tick_interval_s)

        self._thread = threading.Thread(target=loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
        with self.lock:
            self.engine.close()


def create_app(host: EngineHost) -> FastAPI:
    app = FastAPI(title="railcbm", version="0.1.0")
    app.state.host = host

    @app.on_event("startup")
    def _start() -> None:
        host.start()

    @app.on_event("shutdown")
    def _stop() -> None:
        host.stop()

    @app.get("/api/v1/assets")
    def list_assets() -> list[dict[str, Any]]:
        with host.lock:
            return [host.engine.asset_summary(rt) for rt in host.engine.assets.values()]

    @app.get("/api/v1/assets/{asset_id}")
    def get_asset(asset_id: str) -> dict[str, Any]:
        with host.lock:
            rt = host.engine.assets.get(asset_id)
            if rt is None:
                raise HTTPException(status_code=404, detail=f"unknown asset {asset_id!r}")
            summary = host.engine.asset_summary(rt)
            summary["history"] = [[t, h] for t, h in rt.history[-120:]]
            summary["recommendation"] = host.engine.recommendation_payload(rt)
            diag = rt.last_diag
            summary["diagnosis"] = (
                None
                if diag is None
                else {
                    "source": diag.source.value,
                    "fault_label": diag.fault_label,
                    "cause": diag.cause,
                    "matched_case": diag.matched_case,
                    "matched_rule": diag.matched_rule,
                    "residual": diag.residual,
                }
            )
            return summary

    @app.get("/api/v1/alarms")
    def get_alarms(since: int = 0) -> dict[str, Any]:
        with host.lock:
            alarms = host.engine.alarms_since(since)
            return {"alarms": [json.loads(encode_event(e)) for e in alarms]}

    @app.get("/api/v1/recommendations")
    def get_recommendations() -> list[dict[str, Any]]:
        with host.lock:
            out = []
            for rt in host.engine.assets.values():
                payload = host.engine.recommendation_payload(rt)
                if payload is not None:
                    out.append(payload)
            return out

    @app.post("/api/v1/actions", status_code=202)
    def post_action(body: ActionSubmission) -> dict[str, Any]:
        try:
            kind = ActionKind(body.action.kind)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown action kind {body.action.kind!r}")
        action = MaintenanceAction(asset=body.asset_id, kind=kind, amount=body.action.amount)
        with host.lock:
            try:
                effective = host.engine.submit_action(action, due=body.due)
            except NotFound as exc:
                raise HTTPException(status_code=404, detail=str(exc))
        return {"accepted": True, "asset": body.asset_id, "due": effective}

    @app.post("/api/v1/whatif")
    def post_whatif(body: WhatIfBody) -> dict[str, Any]:
        try:
            kind = ActionKind(body.action)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown action kind {body.action!r}")
        with host.lock:
            try:
                outcome = host.engine.what_if(body.asset_id, kind, body.defer_steps)
            except NotFound as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            except StateError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
        return {
            "asset": body.asset_id,
            "action": kind.value,
            "defer_steps": body.defer_steps,
            "projected_cost": outcome.projected_cost,
            "failure_probability": outcome.failure_probability,
            "projected_state_at_action": outcome.projected_state_at_action.label,
        }

    @app.get("/api/v1/stream")
    def stream(request: Request, since: int = 0) -> StreamingResponse:
        async def frames() -> AsyncIterator[str]:
            q = host.subscribe()
            try:
                with host.lock:
                    backlog = host.engine.events_since(since)
                    lines = [(e.seq, encode_event(e)) for e in backlog]
                last_seq = since
                yield "retry: 2000\n\n"
                for seq, line in lines:
                    last_seq = seq
                    yield f"id: {seq}\ndata: {line}\n\n"
                idle = 0.0
                while True:
                    try:
                        seq, line = q.get_nowait()
                        idle = 0.0
                    except queue.Empty:
                        if host.engine.clock >= host.engine.horizon and q.empty():
                            return
                        # cancellation on client disconnect lands at this await
                        await asyncio.sleep(0.05)
                        idle += 0.05
                        if idle >= 10.0:
                            yield ": keep-alive\n\n"
                            idle = 0.0
                        continue
                    if seq <= last_seq:
                        continue
                    last_seq = seq
                    yield f"id: {seq}\ndata: {line}\n\n"
            finally:
                host.unsubscribe(q)

        return StreamingResponse(frames(), media_type="text/event-stream")

    return app


def serve(engine: Engine, port: int, tick_interval_s: float = 0.2) -> None:
    """Run the API until interrupted; exits nonzero if the port is busy."""
    import uvicorn

    host = EngineHost(engine, tick_interval_s=tick_interval_s)
    app = create_app(host)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
