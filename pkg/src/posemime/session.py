"""The staged imitation-game protocol as a pure, event-sourced state machine.

Stages run Idle -> Greeting -> Pairing -> InducedImitation ->
SpontaneousImitation -> Closing, advanced by facilitator commands; End jumps
to Closing from anywhere. Prompt (in an imitation stage, with a gesture
selected) emits the gesture's reference trajectory and opens an attempt
capture window; the window closes on StopCapture or after a timeout
measured on frame timestamps, never on wall clock, so a session replayed
from its log lands in the identical state.

Induced attempts are scored against the selected gesture. Spontaneous
attempts are scored against every gesture in the library and the best
match is reported, since a spontaneous imitation is by definition
un-prompted and the engine must guess which gesture it saw.
"""

import enum
import json
from dataclasses import dataclass, replace

from .errors import (
    CorruptRecord,
    EmptySequence,
    IllegalTransition,
    NoGestureSelected,
    PosemimeError,
    UnknownGesture,
)
from .gmm import generate_trajectory
from .ingestion import coverage_percent, decode_frame_line, drop_incomplete, encode_frame
from .scoring import score_sequence
from .skeleton import encode_sequence, pose_point_to_joints


class SessionStage(enum.Enum):
    IDLE = "idle"
    GREETING = "greeting"
    PAIRING = "pairing"
    INDUCED_IMITATION = "induced_imitation"
    SPONTANEOUS_IMITATION = "spontaneous_imitation"
    CLOSING = "closing"


ADVANCE_ORDER = (
    SessionStage.IDLE,
    SessionStage.GREETING,
    SessionStage.PAIRING,
    SessionStage.INDUCED_IMITATION,
    SessionStage.SPONTANEOUS_IMITATION,
    SessionStage.CLOSING,
)
IMITATION_STAGES = (SessionStage.INDUCED_IMITATION, SessionStage.SPONTANEOUS_IMITATION)


class CommandKind(enum.Enum):
    START = "start"
    ADVANCE = "advance"
    SELECT_GESTURE = "select_gesture"
    PROMPT = "prompt"
    STOP_CAPTURE = "stop_capture"
    END = "end"


@dataclass(frozen=True)
class SessionCommand:
    kind: CommandKind
    gesture_id: str = None

    def to_json(self):
        doc = {"kind": self.kind.value}
        if self.gesture_id is not None:
            doc["gesture_id"] = self.gesture_id
        return doc

    @classmethod
    def from_json(cls, doc):
        return cls(kind=CommandKind(doc["kind"]), gesture_id=doc.get("gesture_id"))

    def __str__(self):
        if self.gesture_id is not None:
            return f"{self.kind.value}({self.gesture_id})"
        return self.kind.value


class EventKind(enum.Enum):
    STATE_CHANGED = "state_changed"
    FRAME_COVERAGE = "frame_coverage"
    REFERENCE_POSE = "reference_pose"
    ATTEMPT_SCORED = "attempt_scored"
    ERROR = "error"


@dataclass(frozen=True)
class SessionEvent:
    kind: EventKind
    payload: dict
    sequence_number: int
    timestamp: float

    def to_json(self):
        return {
            "seq": self.sequence_number,
            "kind": self.kind.value,
            "t": self.timestamp,
            "payload": self.payload,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            kind=EventKind(doc["kind"]),
            payload=doc["payload"],
            sequence_number=doc["seq"],
            timestamp=doc["t"],
        )


@dataclass(frozen=True)
class GestureEntry:
    id: str
    display_name: str
    model: object
    calibration: object = None
    uses_object: bool = False


class GestureLibrary:
    def __init__(self, entries=()):
        self._entries = {}
        for entry in entries:
            if entry.id in self._entries:
                raise ValueError(f"duplicate gesture id {entry.id!r}")
            self._entries[entry.id] = entry

    def get(self, gesture_id):
        entry = self._entries.get(gesture_id)
        if entry is None:
            raise UnknownGesture(gesture_id)
        return entry

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self):
        return len(self._entries)

    def ids(self):
        return list(self._entries.keys())


@dataclass(frozen=True)
class SessionConfig:
    capture_timeout: float = 5.0
    coverage_interval: float = 0.2  # at most 5 coverage events per second
    reference_frames: int = 30


@dataclass(frozen=True)
class SessionState:
    stage: SessionStage = SessionStage.IDLE
    selected_gesture: str = None
    capture_open: bool = False
    capture_opened_at: float = 0.0
    capture_gesture: str = None
    attempt: tuple = ()
    next_seq: int = 0
    clock: float = 0.0
    last_coverage_at: float = None
    frames_before_start: int = 0
    frames_seen: int = 0
    attempts_scored: int = 0
    attempt_frames_dropped: int = 0

    def counters(self):
        return {
            "frames_seen": self.frames_seen,
            "frames_before_start": self.frames_before_start,
            "attempts_scored": self.attempts_scored,
            "attempt_frames_dropped": self.attempt_frames_dropped,
            "events_emitted": self.next_seq,
        }


class SessionEngine:
    """Pure transition functions over SessionState for a fixed gesture library."""

    def __init__(self, library, config=None):
        self.library = library
        self.config = config or SessionConfig()

    # -- commands ---------------------------------------------------------

    def handle_command(self, state, command):
        kind = command.kind
        if kind is CommandKind.START:
            if state.stage is not SessionStage.IDLE:
                raise IllegalTransition(state.stage, command)
            return self._change_stage(state, SessionStage.GREETING)

        if kind is CommandKind.ADVANCE:
            idx = ADVANCE_ORDER.index(state.stage)
            if state.stage is SessionStage.IDLE or idx + 1 >= len(ADVANCE_ORDER):
                raise IllegalTransition(state.stage, command)
            state, events = self._abort_open_capture(state, "stage advanced")
            nstate, nevents = self._change_stage(state, ADVANCE_ORDER[idx + 1])
            return nstate, events + nevents

        if kind is CommandKind.SELECT_GESTURE:
            if state.stage not in IMITATION_STAGES:
                raise IllegalTransition(state.stage, command)
            entry = self.library.get(command.gesture_id)
            return replace(state, selected_gesture=entry.id), []

        if kind is CommandKind.PROMPT:
            if state.stage not in IMITATION_STAGES or state.capture_open:
                raise IllegalTransition(state.stage, command)
            if state.selected_gesture is None:
                raise NoGestureSelected("prompt requires a selected gesture")
            entry = self.library.get(state.selected_gesture)
            events = []
            for t, point, _cov in generate_trajectory(
                entry.model, self.config.reference_frames
            ):
                joints = pose_point_to_joints(point, entry.model.encoding)
                state, ev = self._emit(
                    state,
                    EventKind.REFERENCE_POSE,
                    {
                        "gesture_id": entry.id,
                        "phase": t,
                        "joints": [[float(c) for c in row] for row in joints],
                    },
                )
                events.append(ev)
            state = replace(
                state,
                capture_open=True,
                capture_opened_at=state.clock,
                capture_gesture=entry.id,
                attempt=(),
            )
            return state, events

        if kind is CommandKind.STOP_CAPTURE:
            if not state.capture_open:
                raise IllegalTransition(state.stage, command)
            return self._close_capture(state)

        if kind is CommandKind.END:
            state, events = self._abort_open_capture(state, "session ended")
            nstate, nevents = self._change_stage(state, SessionStage.CLOSING)
            return nstate, events + nevents

        raise IllegalTransition(state.stage, command)

    # -- frames -----------------------------------------------------------

    def on_frame(self, state, frame):
        if state.stage is SessionStage.IDLE:
            return replace(state, frames_before_start=state.frames_before_start + 1), []

        events = []
        state = replace(state, clock=frame.timestamp, frames_seen=state.frames_seen + 1)

        if state.capture_open:
            elapsed = frame.timestamp - state.capture_opened_at
            if elapsed >= self.config.capture_timeout:
                state, closing = self._close_capture(state)
                events.extend(closing)
            else:
                state = replace(state, attempt=state.attempt + (frame,))

        if (
            state.last_coverage_at is None
            or frame.timestamp - state.last_coverage_at >= self.config.coverage_interval
        ):
            detected = frame.detected_count()
            joints = [
                [float(kp.position[0]), float(kp.position[1])] if kp is not None else None
                for kp in frame.keypoints
            ]
            state, ev = self._emit(
                state,
                EventKind.FRAME_COVERAGE,
                {
                    "label": str(state.frames_seen - 1),
                    "detected": detected,
                    "percent": coverage_percent(detected),
                    "joints": joints,
                },
            )
            state = replace(state, last_coverage_at=frame.timestamp)
            events.append(ev)
        return state, events

    # -- internals ----------------------------------------------------------

    def _emit(self, state, kind, payload):
        event = SessionEvent(
            kind=kind,
            payload=payload,
            sequence_number=state.next_seq,
            timestamp=state.clock,
        )
        return replace(state, next_seq=state.next_seq + 1), event

    def _change_stage(self, state, stage):
        state = replace(state, stage=stage)
        state, event = self._emit(state, EventKind.STATE_CHANGED, {"stage": stage.value})
        return state, [event]

    def _abort_open_capture(self, state, reason):
        if not state.capture_open:
            return state, []
        state = replace(state, capture_open=False, attempt=(), capture_gesture=None)
        state, event = self._emit(
            state, EventKind.ERROR, {"message": f"capture window aborted: {reason}"}
        )
        return state, [event]

    def _close_capture(self, state):
        frames = state.attempt
        gesture_id = state.capture_gesture
        stage = state.stage
        state = replace(state, capture_open=False, attempt=(), capture_gesture=None)
        try:
            payload = self._score_attempt(stage, gesture_id, frames)
        except PosemimeError as exc:
            state, event = self._emit(
                state, EventKind.ERROR, {"message": f"attempt discarded: {exc}"}
            )
            return state, [event]
        state = replace(
            state,
            attempts_scored=state.attempts_scored + 1,
            attempt_frames_dropped=state.attempt_frames_dropped + payload["dropped_frames"],
        )
        state, event = self._emit(state, EventKind.ATTEMPT_SCORED, payload)
        return state, [event]

    def _score_attempt(self, stage, gesture_id, frames):
        if not frames:
            raise EmptySequence("no frames captured in the attempt window")
        kept, dropped = drop_incomplete(frames)
        if not kept:
            raise EmptySequence(f"frames dropped: all ({dropped} of {dropped})")

        def score_against(entry):
            seq = encode_sequence(kept, entry.model.encoding)
            return score_sequence(seq, entry.model, entry.calibration)

        if stage is SessionStage.SPONTANEOUS_IMITATION:
            candidates = [(entry, score_against(entry)) for entry in self.library]
            if not candidates:
                raise UnknownGesture("<empty library>")
            best_entry, best = max(
                candidates, key=lambda pair: pair[1].normalized_score
            )
            ranking = {
                entry.id: report.normalized_score for entry, report in candidates
            }
            payload = {"gesture_id": best_entry.id, "ranking": ranking}
            report = best
        else:
            entry = self.library.get(gesture_id)
            report = score_against(entry)
            payload = {"gesture_id": entry.id}

        payload.update(report.to_json())
        payload["dropped_frames"] = dropped
        return payload


# --- append-only log ---------------------------------------------------------


def command_record(command):
    return {"kind": "command", "command": command.to_json()}


def frame_record(frame):
    return {"kind": "frame", "frame": json.loads(encode_frame(frame))}


def event_record(event):
    return {"kind": "event", "event": event.to_json()}


def record_to_line(record):
    return json.dumps(record, separators=(",", ":"))


class Session:
    """One live session: state + engine + its append-only in-memory log."""

    def __init__(self, engine, session_id="local"):
        self.engine = engine
        self.id = session_id
        self.state = SessionState()
        self.records = []

    def apply_command(self, command):
        state, events = self.engine.handle_command(self.state, command)
        self.state = state
        self.records.append(command_record(command))
        self.records.extend(event_record(e) for e in events)
        return events

    def apply_frame(self, frame):
        state, events = self.engine.on_frame(self.state, frame)
        self.state = state
        self.records.append(frame_record(frame))
        self.records.extend(event_record(e) for e in events)
        return events


def replay_log(records, engine):
    """Reconstruct the final state by re-applying commands and frames.

    Accepts parsed record objects or raw NDJSON lines; event records are
    outputs and are skipped. Raises CorruptRecord with the 1-based index
    of the offending record.
    """
    state = SessionState()
    for number, record in enumerate(records, start=1):
        if isinstance(record, (str, bytes)):
            record = record.strip()
            if not record:
                raise CorruptRecord(number, "blank line")
            try:
                record = json.loads(record)
            except json.JSONDecodeError as exc:
                raise CorruptRecord(number, f"not valid JSON: {exc.msg}") from None
        if not isinstance(record, dict):
            raise CorruptRecord(number, "record is not an object")
        kind = record.get("kind")
        try:
            if kind == "command":
                command = SessionCommand.from_json(record["command"])
                state, _ = engine.handle_command(state, command)
            elif kind == "frame":
                frame = decode_frame_line(json.dumps(record["frame"]))
                state, _ = engine.on_frame(state, frame)
            elif kind == "event":
                continue
            else:
                raise CorruptRecord(number, f"unknown record kind {kind!r}")
        except CorruptRecord:
            raise
        except (KeyError, ValueError, TypeError, PosemimeError) as exc:
            raise CorruptRecord(number, str(exc)) from None
    return state


# --- gesture library loading --------------------------------------------------


def load_gesture_library(directory):
    """Gestures from a directory of ``<id>.model.json`` (+ optional
    ``<id>.cal.json`` and ``<id>.meta.json`` with display_name/uses_object)."""
    import os

    from .gmm import load_model
    from .scoring import load_calibration

    entries = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".model.json"):
            continue
        gesture_id = name[: -len(".model.json")]
        model = load_model(os.path.join(directory, name))
        cal_path = os.path.join(directory, f"{gesture_id}.cal.json")
        calibration = load_calibration(cal_path) if os.path.exists(cal_path) else None
        display_name = gesture_id
        uses_object = False
        meta_path = os.path.join(directory, f"{gesture_id}.meta.json")
        if os.path.exists(meta_path):
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            display_name = meta.get("display_name", gesture_id)
            uses_object = bool(meta.get("uses_object", False))
        entries.append(
            GestureEntry(
                id=gesture_id,
                display_name=display_name,
                model=model,
                calibration=calibration,
                uses_object=uses_object,
            )
        )
    return GestureLibrary(entries)
