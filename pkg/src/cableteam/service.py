"""Live interaction gateway: streams state frames, ingests operator commands.

The simulation advances on its own thread; the websocket side talks to it
exclusively through two thread-safe queues (commands in, frames out), so a
slow or stalled client can never hold up the control loop. Commands take
effect at the next control-step boundary and are recorded in the run log,
which keeps interactive sessions replayable.
"""
from __future__ import annotations

import asyncio
import logging
import queue
import threading
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import ScenarioConfig
from .protocol import (
    Command,
    MalformedMessage,
    decode_command,
    encode_ack,
    encode_error,
    encode_frame,
    encode_hello,
)
from .runner import ScenarioRunner

log = logging.getLogger(__name__)


class SimSession:
    """Owns the runner thread and the command/frame queues."""

    def __init__(self, config: ScenarioConfig, realtime: bool | None = None):
        self.config = config
        self.runner = ScenarioRunner(config)
        self.stride = max(1, int(config.raw["service"]["frame_stride"]))
        self.realtime = config.raw["service"]["realtime"] \
            if realtime is None else realtime
        self.frame_hz = 1.0 / (config.control_dt * self.stride)
        self.commands: queue.Queue = queue.Queue()
        self._frame_lock = threading.Lock()
        self._latest: tuple[int, str] | None = None
        self._frame_seq = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name="sim-loop")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    # -- command ingestion (runs on the sim thread) ----------------------------

    def submit(self, cmd: Command) -> None:
        self.commands.put(cmd)

    def _apply(self, cmd: Command) -> None:
        runner = self.runner
        if cmd.kind == "apply_wrench":
            runner.inject_wrench(cmd.force, cmd.moment, cmd.duration)
        elif cmd.kind == "set_human":
            runner.set_human_position(cmd.position)
        elif cmd.kind == "set_admittance_gains":
            runner.set_admittance_gains(cmd.mass, cmd.damping, cmd.stiffness)
        elif cmd.kind == "set_safety_mode":
            runner.set_safety_mode(cmd.mode, cmd.human_radius, cmd.robot_radius)
        elif cmd.kind == "reset":
            runner.reset(cmd.seed)

    def _loop(self) -> None:
        runner = self.runner
        start_wall = time.monotonic()
        start_sim = runner.t
        while not self._stop.is_set() and runner.step_index < self.config.steps:
            # commands land exactly on control-step boundaries
            while True:
                try:
                    self._apply(self.commands.get_nowait())
                except queue.Empty:
                    break
            frame = runner.step()
            if runner.step_index % self.stride == 0:
                with self._frame_lock:
                    self._frame_seq += 1
                    self._latest = (self._frame_seq, encode_frame(frame, self._frame_seq))
            if self.realtime:
                ahead = (runner.t - start_sim) - (time.monotonic() - start_wall)
                if ahead > 0.0:
                    time.sleep(ahead)
        self._stop.set()

    def latest_frame(self, after_seq: int) -> tuple[int, str] | None:
        """Newest encoded frame if fresher than ``after_seq`` (latest-value
        semantics: intermediate frames are dropped for slow consumers)."""
        with self._frame_lock:
            if self._latest is None or self._latest[0] <= after_seq:
                return None
            return self._latest

    @property
    def finished(self) -> bool:
        return self._stop.is_set()


def build_app(session: SimSession) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if session._thread is None:
            session.start()
        yield
        session.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(socket: WebSocket):
        await socket.accept()
        await socket.send_text(encode_hello(
            session.config.n, session.config.control_dt, session.frame_hz))

        async def pump_frames():
            seen = 0
            interval = 1.0 / (2.0 * session.frame_hz)
            while True:
                latest = session.latest_frame(seen)
                if latest is not None:
                    seen = latest[0]
                    await socket.send_text(latest[1])
                else:
                    await asyncio.sleep(interval)

        pump = asyncio.create_task(pump_frames())
        try:
            while True:
                text = await socket.receive_text()
                try:
                    cmd = decode_command(text)
                except MalformedMessage as exc:
                    await socket.send_text(encode_error(str(exc)))
                    continue
                session.submit(cmd)
                await socket.send_text(encode_ack(cmd.kind, cmd.seq))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()

    return app


def serve(config: ScenarioConfig, out_dir=None) -> None:
    """Run the interaction service until the scenario ends or interrupted."""
    import uvicorn

    session = SimSession(config)
    app = build_app(session)
    port = int(config.raw["service"]["port"])
    try:
        uvicorn.run(app, host="0.0.0.0", port=port, log_level="warning")
    finally:
        session.stop()
        if out_dir is not None:
            from pathlib import Path
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            session.runner.log.trim()
            session.runner.log.to_jsonl(out / "run.jsonl")
