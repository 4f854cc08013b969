"""Real-time deploy session with a human-driven evader over a websocket.

One stepper owns the world and advances it against the wall clock at the
decision rate; connection handlers exchange JSON text messages with it
through a latest-wins command slot and a broadcast fan-out.  The first
client to connect drives the evader; later clients spectate.  Commands
older than the staleness cutoff (or after the driver disconnects) decay
to zero, so the evader coasts to a stop through the usual command lag.

Wire protocol (schema_version 1):
  server -> client   hello frame: arena bounds, roster, assigned role
  server -> client   frame: agent states, estimate, live metrics (10 Hz)
  client -> server   command: {"schema_version": 1, "v_cmd": [x, y],
                               "client_time": <seconds>}
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .evaders import Drive
from .scenario import EpisodeStepper, RunMode, ScenarioConfig

logger = logging.getLogger("bearing_pursuit.livebridge")

SCHEMA_VERSION = 1
COMMAND_STALENESS_S = 0.5
STALL_LIMIT_S = 0.1


@dataclass
class _Session:
    stepper: EpisodeStepper
    drive: Drive
    evader_v_max: float
    clients: list[WebSocket] = field(default_factory=list)
    driver: WebSocket | None = None
    command: tuple[float, float] = (0.0, 0.0)
    command_time: float = -math.inf  # loop.time() at receipt

    def effective_command(self, now: float) -> tuple[float, float]:
        if self.driver is None or now - self.command_time > COMMAND_STALENESS_S:
            return (0.0, 0.0)
        return self.command


def _clip_command(v, v_max: float) -> tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("v_cmd must be finite")
    norm = math.hypot(x, y)
    if norm > v_max and norm > 0.0:
        x *= v_max / norm
        y *= v_max / norm
    return x, y


def _hello_frame(session: _Session, role: str) -> dict:
    config = session.stepper.config
    return {
        "type": "hello",
        "schema_version": SCHEMA_VERSION,
        "role": role,
        "arena_half": config.arena_half,
        "r_d": config.r_d,
        "decision_hz": config.decision_hz,
        "fov": config.fov,
        "evader_v_max": session.evader_v_max,
        "pursuers": [
            {"mode": spec.mode.value, "radius": spec.radius}
            for spec in config.pursuers
        ],
        "target_radius": config.target.radius,
    }


def _frame(session: _Session, record) -> dict:
    world = session.stepper.world
    return {
        "type": "frame",
        "schema_version": SCHEMA_VERSION,
        "t": world.t,
        "pursuers": [
            {
                "p": [a.p[0], a.p[1]],
                "v": [a.v[0], a.v[1]],
                "theta": a.theta,
                "detect_flag": int(det),
            }
            for a, det in zip(world.pursuers, record.detections)
        ],
        "target": {
            "p": [world.target.p[0], world.target.p[1]],
            "v": [world.target.v[0], world.target.v[1]],
        },
        "estimate": (
            None if not all(math.isfinite(v) for v in record.estimate)
            else {
                "p": list(record.estimate[:3]),
                "v": list(record.estimate[3:]),
                "cov_diag": list(record.cov_diag),
            }
        ),
        "metrics": {
            "range_error": record.range_error,
            "observability": record.observability,
            "detection_count": record.detection_count,
            "pos_error": (record.pos_error
                          if math.isfinite(record.pos_error) else None),
        },
    }


async def _broadcast(session: _Session, payload: dict) -> None:
    text = json.dumps(payload)
    dead = []
    for ws in session.clients:
        try:
            await ws.send_text(text)
        except Exception:
            dead.append(ws)
    for ws in dead:
        _drop_client(session, ws)


def _drop_client(session: _Session, ws: WebSocket) -> None:
    if ws in session.clients:
        session.clients.remove(ws)
    if session.driver is ws:
        session.driver = None
        session.command = (0.0, 0.0)
        logger.info("driver disconnected; evader coasting to stop")


async def _stepper_loop(session: _Session, period: float) -> None:
    loop = asyncio.get_running_loop()
    next_t = loop.time()
    while True:
        now = loop.time()
        if now - next_t > STALL_LIMIT_S:
            # host stalled: pause simulated time instead of jumping
            next_t = now
        session.drive.set_velocity(session.effective_command(now))
        record = session.stepper.step()
        await _broadcast(session, _frame(session, record))
        next_t += period
        await asyncio.sleep(max(0.0, next_t - loop.time()))


def create_app(
    config: ScenarioConfig,
    policies: Sequence,
    seed: int | None = None,
) -> FastAPI:
    """FastAPI app hosting one live deploy session on ``/ws``."""
    drive = Drive()
    stepper = EpisodeStepper(
        config, policies, mode=RunMode.DEPLOY, seed=seed, evader_script=drive,
    )
    session = _Session(stepper=stepper, drive=drive,
                       evader_v_max=config.evader_v_max)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(
            _stepper_loop(session, 1.0 / config.decision_hz)
        )
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="bearing-pursuit live bridge", lifespan=lifespan)
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        role = "driver" if session.driver is None else "spectator"
        if role == "driver":
            session.driver = ws
        session.clients.append(ws)
        await ws.send_text(json.dumps(_hello_frame(session, role)))
        loop = asyncio.get_running_loop()
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                    if msg.get("schema_version") != SCHEMA_VERSION:
                        raise ValueError("unsupported schema_version")
                    v_cmd = _clip_command(msg["v_cmd"], session.evader_v_max)
                except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
                    await ws.send_text(json.dumps({
                        "type": "error",
                        "schema_version": SCHEMA_VERSION,
                        "message": f"malformed command: {exc}",
                    }))
                    await ws.close()
                    break
                if ws is session.driver:
                    session.command = v_cmd
                    session.command_time = loop.time()
        except WebSocketDisconnect:
            pass
        finally:
            _drop_client(session, ws)

    return app


def serve(config: ScenarioConfig, policies: Sequence, port: int,
          seed: int | None = None, host: str = "127.0.0.1") -> None:
    """Run the live bridge until interrupted."""
    import uvicorn

    from .errors import BearingPursuitError

    app = create_app(config, policies, seed=seed)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        raise BearingPursuitError(f"port {port} unavailable: {exc}") from exc
