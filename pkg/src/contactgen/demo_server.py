"""WebSocket service for live demonstration recording.

One simulated scene per connected client: pointer targets arrive as JSON text
frames, the box-and-two-hands world steps at the control rate, and state
frames stream back. `stop_recording` persists the captured DemoTrajectory and
reports the file path.

Two stepping modes share every other code path:
  - realtime (the `serve` command): a background task ticks on the wall clock;
    incoming targets are sampled-and-held, so client latency shifts *which*
    tick sees a target but never how a tick is computed.
  - lockstep (tests, scripted capture): each `targets` message advances
    exactly one control tick, making target sequence -> trajectory a pure
    function.

Protocol (client -> server):
    {"type": "targets", "fingers": [[x, y], [x, y]]}
    {"type": "start_recording", "goal": [x, y, theta]}   goal optional
    {"type": "stop_recording"}
    {"type": "reset", "params": {...}}                   PhysicalParams overrides
Server -> client:
    {"type": "hello", ...scene geometry...}              once, on connect
    {"type": "state", "t", "object", "fingers", "recording", "goal"}
    {"type": "saved", "path": ...}                       after stop_recording
    {"type": "error", "msg": ...}
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .dynamics import PhysicalParams
from .geometry import Pose2
from .session import DemoSession, SessionConfig, SessionError

_PARAM_FIELDS = {f.name for f in dataclasses.fields(PhysicalParams)}


@dataclass
class ServerConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    session: SessionConfig = field(default_factory=SessionConfig)
    demo_dir: Path = Path("demos")
    ui_dir: Path | None = None
    realtime: bool = True


def _state_frame(snapshot: dict) -> str:
    return json.dumps(
        {
            "type": "state",
            "t": snapshot["time"],
            "object": snapshot["object"],
            "fingers": snapshot["hands"],
            "recording": snapshot["recording"],
            "goal": snapshot["goal"],
        }
    )


def _hello_frame(session: DemoSession, config: ServerConfig) -> str:
    snap = session.snapshot()
    return json.dumps(
        {
            "type": "hello",
            "object_side": snap["object_side"],
            "finger_radius": snap["hand_radius"],
            "bounds": snap["bounds"],
            "control_hz": config.session.control_hz,
            "realtime": config.realtime,
        }
    )


def _error(msg: str) -> str:
    return json.dumps({"type": "error", "msg": msg})


def _next_demo_path(demo_dir: Path) -> Path:
    demo_dir.mkdir(parents=True, exist_ok=True)
    k = 0
    while (demo_dir / f"demo_{k:04d}.json").exists():
        k += 1
    return demo_dir / f"demo_{k:04d}.json"


def _make_session(config: ServerConfig, overrides: dict | None = None) -> DemoSession:
    params = config.params
    if overrides:
        unknown = set(overrides) - _PARAM_FIELDS
        if unknown:
            raise SessionError(f"unknown physics parameters: {sorted(unknown)}")
        params = dataclasses.replace(params, **overrides)
    return DemoSession(params, config.session)


async def _handle_message(ws: WebSocket, session_box: list[DemoSession], config: ServerConfig, raw: str) -> None:
    """Apply one client message; replies with error frames instead of raising."""
    session = session_box[0]
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError:
        await ws.send_text(_error("malformed JSON"))
        return
    kind = msg.get("type")
    try:
        if kind == "targets":
            session.set_targets(msg["fingers"])
            if not config.realtime:
                await ws.send_text(_state_frame(session.tick()))
        elif kind == "start_recording":
            goal = msg.get("goal")
            session.start_recording(None if goal is None else Pose2(*map(float, goal)))
            await ws.send_text(_state_frame(session.snapshot()))
        elif kind == "stop_recording":
            demo = session.stop_recording()
            path = _next_demo_path(config.demo_dir)
            demo.save(path)
            await ws.send_text(json.dumps({"type": "saved", "path": str(path)}))
        elif kind == "reset":
            session_box[0] = _make_session(config, msg.get("params") or None)
            await ws.send_text(_state_frame(session_box[0].snapshot()))
        else:
            await ws.send_text(_error(f"unknown message type {kind!r}"))
    except (SessionError, ValueError, TypeError, KeyError) as exc:
        await ws.send_text(_error(str(exc)))


async def _ticker(ws: WebSocket, session_box: list[DemoSession], config: ServerConfig) -> None:
    """Wall-clock stepping for realtime mode; errors reset the scene."""
    period = config.session.control_dt
    loop = asyncio.get_running_loop()
    next_t = loop.time() + period
    while True:
        delay = next_t - loop.time()
        if delay > 0:
            await asyncio.sleep(delay)
        next_t += period
        try:
            snap = session_box[0].tick()
        except SessionError as exc:
            await ws.send_text(_error(str(exc)))
            session_box[0] = _make_session(config)
            snap = session_box[0].snapshot()
        await ws.send_text(_state_frame(snap))


def build_app(config: ServerConfig | None = None) -> FastAPI:
    cfg = config or ServerConfig()
    app = FastAPI(title="contactgen demo server")

    @app.get("/health")
    async def health() -> JSONResponse:
        return JSONResponse({"status": "ok", "realtime": cfg.realtime})

    @app.websocket("/session")
    async def session_socket(ws: WebSocket) -> None:
        await ws.accept()
        box = [_make_session(cfg)]
        await ws.send_text(_hello_frame(box[0], cfg))
        await ws.send_text(_state_frame(box[0].snapshot()))
        ticker = asyncio.create_task(_ticker(ws, box, cfg)) if cfg.realtime else None
        try:
            while True:
                raw = await ws.receive_text()
                await _handle_message(ws, box, cfg, raw)
        except WebSocketDisconnect:
            pass
        finally:
            if ticker is not None:
                ticker.cancel()

    ui_dir = cfg.ui_dir
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/ui")
        async def ui_placeholder() -> HTMLResponse:
            return HTMLResponse(
                "<html><body><h3>contactgen</h3>"
                "<p>No UI bundle found. Build the frontend (see frontend/README.md) "
                "and point the server at its dist/ directory.</p></body></html>"
            )

    return app


def serve(host: str, port: int, config: ServerConfig | None = None) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    uvicorn.run(build_app(config), host=host, port=port, log_level="warning")
