"""Session service: HTTP control API, per-session event stream, TCP ingest.

Each session runs a single-writer loop: facilitator commands and skeleton
frames merge into one ordered inbox and are applied serially to the pure
engine, so results never depend on scheduling. Event consumers (websocket
subscribers, the log file) read from a broadcast of emitted events. Frames
are buffered with capacity 256, dropping the oldest when full: a stalled
consumer must never stall scoring.

Surfaces:

* ``POST /api/session`` -> 201 ``{"id": ...}``
* ``GET /api/session/{id}`` -> stage, selected gesture, counters
* ``POST /api/session/{id}/command`` -> 200 with the new stage, 409 on
  illegal transitions / unknown gestures / missing selection
* ``GET /api/gestures`` -> the gesture library
* ``WS /api/session/{id}/events`` -> events as JSON, in sequence order;
  messages sent by the client are treated as commands
* TCP ingest (separate listener): first line ``{"session": "<id>"}`` binds
  the connection, every further line is a wire-protocol frame
"""

import asyncio
import json
import os
import uuid
from collections import deque
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .errors import PosemimeError
from .ingestion import decode_frame_line
from .session import (
    CommandKind,
    Session,
    SessionCommand,
    SessionConfig,
    SessionEngine,
    record_to_line,
)

FRAME_QUEUE_CAPACITY = 256
SUBSCRIBER_QUEUE_CAPACITY = 1024
INGEST_LINE_LIMIT = 128 * 1024


class Inbox:
    """Merged command/frame queue; frames beyond capacity drop oldest-first."""

    def __init__(self, frame_capacity=FRAME_QUEUE_CAPACITY):
        self.frame_capacity = frame_capacity
        self.dropped_frames = 0
        self._items = deque()
        self._wakeup = asyncio.Event()

    def _notify(self):
        self._wakeup.set()

    def put_command(self, command, future):
        self._items.append(("command", command, future))
        self._notify()

    def put_frame(self, frame):
        pending = sum(1 for kind, _, _ in self._items if kind == "frame")
        if pending >= self.frame_capacity:
            for i, (kind, _, _) in enumerate(self._items):
                if kind == "frame":
                    del self._items[i]
                    self.dropped_frames += 1
                    break
        self._items.append(("frame", frame, None))
        self._notify()

    def put_stop(self):
        self._items.append(("stop", None, None))
        self._notify()

    async def get(self):
        while not self._items:
            self._wakeup.clear()
            await self._wakeup.wait()
        return self._items.popleft()


class SessionRuntime:
    """One live session plus its worker task, subscribers, and log file."""

    def __init__(self, engine, session_id, log_path=None):
        self.session = Session(engine, session_id)
        self.id = session_id
        self.inbox = Inbox()
        self.subscribers = set()
        self.bad_lines = 0
        self.dropped_events = 0
        self._log_path = log_path
        self._log_file = None
        self._task = None

    def start(self):
        if self._task is None:
            if self._log_path:
                self._log_file = open(self._log_path, "a", encoding="utf-8")
            self._task = asyncio.get_running_loop().create_task(self._run())
        return self

    async def stop(self):
        if self._task is not None:
            self.inbox.put_stop()
            await self._task
            self._task = None
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def subscribe(self):
        queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_CAPACITY)
        self.subscribers.add(queue)
        return queue

    def unsubscribe(self, queue):
        self.subscribers.discard(queue)

    async def submit_command(self, command):
        future = asyncio.get_running_loop().create_future()
        self.inbox.put_command(command, future)
        return await future

    def submit_frame(self, frame):
        self.inbox.put_frame(frame)

    async def _run(self):
        while True:
            kind, payload, future = await self.inbox.get()
            if kind == "stop":
                break
            mark = len(self.session.records)
            try:
                if kind == "command":
                    events = self.session.apply_command(payload)
                else:
                    events = self.session.apply_frame(payload)
            except PosemimeError as exc:
                if future is not None and not future.cancelled():
                    future.set_exception(exc)
                continue
            if future is not None and not future.cancelled():
                future.set_result(self.session.state)
            if self._log_file is not None:
                for record in self.session.records[mark:]:
                    self._log_file.write(record_to_line(record))
                    self._log_file.write("\n")
                self._log_file.flush()
            for event in events:
                doc = event.to_json()
                for queue in list(self.subscribers):
                    try:
                        queue.put_nowait(doc)
                    except asyncio.QueueFull:
                        self.dropped_events += 1

    def describe(self):
        state = self.session.state
        return {
            "id": self.id,
            "stage": state.stage.value,
            "selected_gesture": state.selected_gesture,
            "capture_open": state.capture_open,
            "counters": state.counters(),
            "dropped_frames": self.inbox.dropped_frames,
            "bad_lines": self.bad_lines,
        }


class SessionService:
    def __init__(self, library, config=None, log_dir=None):
        self.engine = SessionEngine(library, config or SessionConfig())
        self.library = library
        self.log_dir = log_dir
        self.sessions = {}
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

    def create_session(self):
        session_id = uuid.uuid4().hex
        log_path = (
            os.path.join(self.log_dir, f"{session_id}.ndjson") if self.log_dir else None
        )
        runtime = SessionRuntime(self.engine, session_id, log_path).start()
        self.sessions[session_id] = runtime
        return runtime

    def get(self, session_id):
        return self.sessions.get(session_id)

    async def shutdown(self):
        for runtime in list(self.sessions.values()):
            await runtime.stop()

    def gestures_json(self):
        return [
            {
                "id": entry.id,
                "display_name": entry.display_name,
                "uses_object": entry.uses_object,
                "calibrated": entry.calibration is not None,
                "threshold": (
                    entry.calibration.threshold if entry.calibration is not None else None
                ),
            }
            for entry in self.library
        ]


def _command_from_body(body):
    if not isinstance(body, dict):
        raise ValueError("command body must be a JSON object")
    try:
        kind = CommandKind(body.get("kind"))
    except ValueError:
        raise ValueError(f"unknown command kind {body.get('kind')!r}") from None
    return SessionCommand(kind=kind, gesture_id=body.get("gesture_id"))


def create_app(service):
    @asynccontextmanager
    async def lifespan(app):
        yield
        await service.shutdown()

    app = FastAPI(title="posemime session service", lifespan=lifespan)
    app.state.service = service

    @app.post("/api/session", status_code=201)
    async def create_session():
        runtime = service.create_session()
        return {"id": runtime.id}

    @app.get("/api/session/{session_id}")
    async def get_session(session_id: str):
        runtime = service.get(session_id)
        if runtime is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return runtime.describe()

    @app.post("/api/session/{session_id}/command")
    async def post_command(session_id: str, body: dict):
        runtime = service.get(session_id)
        if runtime is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        try:
            command = _command_from_body(body)
        except ValueError as exc:
            return JSONResponse({"error": "bad_command", "message": str(exc)}, status_code=400)
        try:
            state = await runtime.submit_command(command)
        except PosemimeError as exc:
            return JSONResponse(
                {"error": type(exc).__name__, "message": str(exc)}, status_code=409
            )
        return {"stage": state.stage.value, "selected_gesture": state.selected_gesture}

    @app.get("/api/gestures")
    async def gestures():
        return service.gestures_json()

    @app.websocket("/api/session/{session_id}/events")
    async def events(websocket: WebSocket, session_id: str):
        runtime = service.get(session_id)
        if runtime is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        queue = runtime.subscribe()

        async def pump_out():
            while True:
                doc = await queue.get()
                await websocket.send_json(doc)

        async def pump_in():
            while True:
                text = await websocket.receive_text()
                try:
                    command = _command_from_body(json.loads(text))
                except (ValueError, json.JSONDecodeError):
                    continue
                runtime.inbox.put_command(command, None)

        out_task = asyncio.ensure_future(pump_out())
        in_task = asyncio.ensure_future(pump_in())
        try:
            await asyncio.wait({out_task, in_task}, return_when=asyncio.FIRST_EXCEPTION)
        except WebSocketDisconnect:
            pass
        finally:
            out_task.cancel()
            in_task.cancel()
            runtime.unsubscribe(queue)

    return app


# --- TCP frame ingest ---------------------------------------------------------


async def _read_line(reader):
    """One LF-terminated line, tolerating and skipping oversized ones."""
    while True:
        try:
            return await reader.readuntil(b"\n")
        except asyncio.IncompleteReadError as exc:
            return exc.partial  # EOF; whatever remains
        except asyncio.LimitOverrunError as exc:
            await reader.readexactly(exc.consumed)
            # discard until the newline that ends the oversized line
            while True:
                chunk = await reader.read(4096)
                if not chunk or b"\n" in chunk:
                    break
            raise ValueError("oversized line")


async def handle_ingest_connection(service, reader, writer):
    try:
        first = await _read_line(reader)
        binding = json.loads(first)
        runtime = service.get(binding["session"])
        if runtime is None:
            raise KeyError(binding["session"])
    except Exception:
        writer.write(b'{"error":"expected {\\"session\\":\\"<id>\\"} as the first line"}\n')
        try:
            await writer.drain()
        finally:
            writer.close()
        return
    writer.write(b'{"ok":true}\n')
    await writer.drain()
    while True:
        try:
            line = await _read_line(reader)
        except ValueError:
            runtime.bad_lines += 1
            continue
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        try:
            frame = decode_frame_line(line)
        except PosemimeError:
            runtime.bad_lines += 1
            continue
        runtime.submit_frame(frame)
    writer.close()


async def serve_ingest(service, host, port):
    async def handler(reader, writer):
        await handle_ingest_connection(service, reader, writer)

    return await asyncio.start_server(handler, host, port, limit=INGEST_LINE_LIMIT)
