"""Keypoint ingestion: estimator exports, the wire protocol, coverage.

Three input surfaces feed the pipeline:

* estimator files — a JSON array of frames, each carrying a ``people`` list
  of flat ``[x0,y0,c0, ..., x17,y17,c17]`` COCO-18 triplets (the common
  pose-estimator export); with several people the one with the most
  detected keypoints wins, ties going to the first listed.
* wire protocol v1 — one frame per line:
  ``{"v":1,"t":<seconds>,"kp":[[x,y,c] x14]}``, keypoints in BodyPart
  ordinal order, ``null`` marking a missing keypoint, UTF-8, LF terminated.
  Recorded-sequence files are the same lines (NDJSON).
* live streams — the same lines over TCP, read elsewhere; this module
  provides the bounded drop-oldest buffer those readers push into.

COCO slots 0..13 coincide ordinal-for-ordinal with the 14-part body model
(eyes and ears, slots 14..17, are discarded).
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LabelArityMismatch,
    MalformedDocument,
    MalformedLine,
    NegativeTimestamp,
    NonMonotoneTimestamps,
    TooShort,
    WrongKeypointArity,
)
from .skeleton import BODY_PART_COUNT, Body14Frame, BodyPart, DETECTION_THRESHOLD, Keypoint

COCO18_NAMES = (
    "nose", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow",
    "l_wrist", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
)
COCO18_COUNT = 18
DEFAULT_FRAME_RATE = 30.0
MAX_LINE_BYTES = 64 * 1024


@dataclass
class Coco18Frame:
    """One estimator observation; eyes/ears included, later discarded."""

    keypoints: tuple  # 18 entries, each Keypoint or None
    timestamp: float = 0.0

    def __post_init__(self):
        self.keypoints = tuple(self.keypoints)
        if len(self.keypoints) != COCO18_COUNT:
            raise ValueError(f"expected {COCO18_COUNT} keypoints, got {len(self.keypoints)}")

    def detected_count(self, threshold=DETECTION_THRESHOLD):
        return sum(
            1 for kp in self.keypoints if kp is not None and kp.confidence >= threshold
        )


@dataclass
class CoverageRow:
    label: str
    detected: int
    percent: int


@dataclass
class CoverageReport:
    rows: list = field(default_factory=list)

    def to_json(self):
        return [
            {"label": r.label, "detected": r.detected, "percent": r.percent}
            for r in self.rows
        ]


def _round_half_away(x):
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def coverage_percent(detected):
    return _round_half_away(100.0 * detected / BODY_PART_COUNT)


def _person_keypoints(flat, threshold):
    if len(flat) != 3 * COCO18_COUNT:
        raise MalformedDocument(
            f"pose_keypoints_2d must hold {3 * COCO18_COUNT} numbers, got {len(flat)}"
        )
    kps = []
    for i in range(COCO18_COUNT):
        x, y, c = flat[3 * i : 3 * i + 3]
        if not all(isinstance(v, (int, float)) for v in (x, y, c)):
            raise MalformedDocument(f"non-numeric keypoint triplet at slot {i}")
        if c < threshold:
            kps.append(None)
        else:
            kps.append(Keypoint(np.array([x, y], dtype=float), min(float(c), 1.0)))
    return tuple(kps)


def parse_estimator_doc(document, threshold=DETECTION_THRESHOLD):
    """Frames of an estimator JSON export, best person per frame."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not valid JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(doc, list):
        raise MalformedDocument("estimator document must be a JSON array of frames")
    frames = []
    for idx, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise MalformedDocument(f"frame {idx} is not an object")
        t = entry.get("t", idx / DEFAULT_FRAME_RATE)
        if not isinstance(t, (int, float)):
            raise MalformedDocument(f"frame {idx} has a non-numeric timestamp")
        people = entry.get("people", [])
        if not isinstance(people, list):
            raise MalformedDocument(f"frame {idx} 'people' is not a list")
        candidates = []
        for person in people:
            if not isinstance(person, dict) or "pose_keypoints_2d" not in person:
                raise MalformedDocument(f"frame {idx} person lacks pose_keypoints_2d")
            candidates.append(_person_keypoints(person["pose_keypoints_2d"], threshold))
        if candidates:
            best = max(
                range(len(candidates)),
                key=lambda i: (sum(kp is not None for kp in candidates[i]), -i),
            )
            kps = candidates[best]
        else:
            kps = (None,) * COCO18_COUNT
        frames.append(Coco18Frame(keypoints=kps, timestamp=float(t)))
    return frames


def map_coco18_to_body14(frame, timestamp=None):
    """COCO slots 0..13 onto BodyPart ordinals; eyes and ears dropped."""
    t = frame.timestamp if timestamp is None else timestamp
    return Body14Frame(timestamp=t, keypoints=frame.keypoints[:BODY_PART_COUNT])


def convert_estimator_doc(document, threshold=DETECTION_THRESHOLD):
    return [map_coco18_to_body14(f) for f in parse_estimator_doc(document, threshold)]


def coverage(frames, labels=None):
    """Detected-part counts and percentages, one row per frame."""
    frames = list(frames)
    if labels is None:
        labels = [str(i) for i in range(len(frames))]
    else:
        labels = list(labels)
        if len(labels) != len(frames):
            raise LabelArityMismatch(
                f"{len(labels)} labels for {len(frames)} frames"
            )
    rows = [
        CoverageRow(label=lbl, detected=f.detected_count(), percent=coverage_percent(f.detected_count()))
        for lbl, f in zip(labels, frames)
    ]
    return CoverageReport(rows=rows)


def resample_uniform(sequence, target_count, threshold=DETECTION_THRESHOLD):
    """Linear resampling to a uniform time grid over the original span.

    A keypoint missing (undetected) in either bracketing frame is missing in
    the interpolated frame; the first and last frames are copied verbatim.
    """
    sequence = list(sequence)
    if len(sequence) < 2:
        raise TooShort("resampling needs at least two frames")
    if target_count < 2:
        raise ValueError("target_count must be >= 2")
    times = np.array([f.timestamp for f in sequence])
    if np.any(np.diff(times) <= 0):
        raise NonMonotoneTimestamps("frame timestamps must be strictly increasing")

    grid = np.linspace(times[0], times[-1], target_count)
    out = [sequence[0]]
    for tau in grid[1:-1]:
        j = int(np.searchsorted(times, tau, side="right") - 1)
        j = min(max(j, 0), len(sequence) - 2)
        a, b = sequence[j], sequence[j + 1]
        w = (tau - times[j]) / (times[j + 1] - times[j])
        kps = []
        for part in BodyPart:
            ka, kb = a.keypoints[part], b.keypoints[part]
            if (
                ka is None or kb is None
                or ka.confidence < threshold or kb.confidence < threshold
            ):
                kps.append(None)
                continue
            pos = ka.position + w * (kb.position - ka.position)
            conf = ka.confidence + w * (kb.confidence - ka.confidence)
            kps.append(Keypoint(pos, conf))
        out.append(Body14Frame(timestamp=float(tau), keypoints=kps))
    out.append(sequence[-1])
    return out


def drop_incomplete(frames, threshold=DETECTION_THRESHOLD):
    """Frames with all 14 parts detected, plus how many were dropped."""
    kept = [f for f in frames if f.detected_count(threshold) == BODY_PART_COUNT]
    return kept, len(frames) - len(kept)


# --- wire protocol v1 ---------------------------------------------------------


def encode_frame(frame):
    """One protocol line (without the newline) for a 2D frame."""
    if frame.dimension not in (2, None):
        raise ValueError("wire protocol v1 carries 2D keypoints only")
    kp = []
    for entry in frame.keypoints:
        if entry is None:
            kp.append(None)
        else:
            kp.append([float(entry.position[0]), float(entry.position[1]), float(entry.confidence)])
    return json.dumps({"v": 1, "t": frame.timestamp, "kp": kp}, separators=(",", ":"))


def decode_frame_line(line):
    """Parse one protocol line into a frame; strict about the v1 schema."""
    if isinstance(line, bytes):
        if len(line) > MAX_LINE_BYTES:
            raise MalformedLine(f"line exceeds {MAX_LINE_BYTES} bytes")
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedLine(f"line is not UTF-8: {exc}") from None
    elif len(line.encode("utf-8", errors="replace")) > MAX_LINE_BYTES:
        raise MalformedLine(f"line exceeds {MAX_LINE_BYTES} bytes")
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise MalformedLine("frame line must be a JSON object")
    if doc.get("v", 1) != 1:
        raise MalformedLine(f"unsupported protocol version {doc.get('v')!r}")
    if "t" not in doc or not isinstance(doc["t"], (int, float)):
        raise MalformedLine("frame line lacks a numeric 't'")
    if doc["t"] < 0:
        raise NegativeTimestamp(f"timestamp {doc['t']} is negative")
    kp = doc.get("kp")
    if not isinstance(kp, list):
        raise MalformedLine("frame line lacks a 'kp' array")
    if len(kp) != BODY_PART_COUNT:
        raise WrongKeypointArity(len(kp))
    keypoints = []
    for i, entry in enumerate(kp):
        if entry is None:
            keypoints.append(None)
            continue
        if (
            not isinstance(entry, list)
            or len(entry) != 3
            or not all(isinstance(v, (int, float)) for v in entry)
        ):
            raise MalformedLine(f"keypoint {i} must be null or [x, y, c]")
        x, y, c = entry
        if not 0.0 <= c <= 1.0:
            raise MalformedLine(f"keypoint {i} confidence {c} outside [0, 1]")
        keypoints.append(Keypoint(np.array([x, y], dtype=float), float(c)))
    return Body14Frame(timestamp=float(doc["t"]), keypoints=keypoints)


def read_recorded_sequence(path):
    """Frames of an NDJSON recording, in file order."""
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                frames.append(decode_frame_line(line))
            except (MalformedLine, WrongKeypointArity, NegativeTimestamp) as exc:
                raise type(exc)(f"{path}:{number}: {exc}") from None
    return frames


def write_recorded_sequence(path, frames):
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(encode_frame(frame))
            fh.write("\n")


class FrameBuffer:
    """Bounded frame queue; when full the oldest frame is dropped and counted.

    Live display must never stall scoring, so ingestion pushes frames here
    and slow consumers lose the oldest ones.
    """

    def __init__(self, capacity=256):
        self._frames = deque()
        self.capacity = capacity
        self.dropped = 0

    def push(self, frame):
        if len(self._frames) >= self.capacity:
            self._frames.popleft()
            self.dropped += 1
        self._frames.append(frame)

    def drain(self):
        items = list(self._frames)
        self._frames.clear()
        return items

    def __len__(self):
        return len(self._frames)
