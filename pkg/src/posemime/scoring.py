"""Sequence scoring against a gesture model, and threshold calibration.

A sequence's score is the sum over frames of the log mixture density of
(phase, pose); the normalized score divides by the frame count so attempts
of different durations stay comparable. A frame where every component
underflows contributes -inf and fails the attempt instead of aborting:
wild outlier frames (phantom detections) are an expected real-world event.

The pass threshold is calibrated from the demonstrations themselves:
mean(demo scores) - c * stddev - epsilon, one-sided, with c = 2 by default.
"""

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence, MalformedDocument, NonMonotoneTimestamps, TooFewDemos
from .gmm import dumps_17g, mixture_log_density_many

THRESHOLD_EPSILON = 1e-6


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass
class ScoreReport:
    total_log_likelihood: float
    per_frame: list
    normalized_score: float
    frame_count: int
    verdict: Verdict = None

    def to_json(self):
        return {
            "total_log_likelihood": self.total_log_likelihood,
            "per_frame": list(self.per_frame),
            "normalized_score": self.normalized_score,
            "frame_count": self.frame_count,
            "verdict": self.verdict.value if self.verdict is not None else None,
        }


@dataclass
class Calibration:
    threshold: float
    demo_scores: list
    margin_multiplier: float = 2.0

    def to_json(self):
        return {
            "format_version": 1,
            "threshold": self.threshold,
            "demo_scores": list(self.demo_scores),
            "margin_multiplier": self.margin_multiplier,
        }

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict) or doc.get("format_version") != 1:
            raise MalformedDocument("calibration file must declare format_version 1")
        try:
            return cls(
                threshold=float(doc["threshold"]),
                demo_scores=[float(s) for s in doc["demo_scores"]],
                margin_multiplier=float(doc["margin_multiplier"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedDocument(f"calibration file is malformed: {exc}") from None


def sequence_phases(times):
    """Normalize timestamps to [0,1]; a single frame sits at phase 0."""
    times = np.asarray(times, dtype=np.float64)
    if times.shape[0] == 0:
        raise EmptySequence("cannot score an empty sequence")
    if times.shape[0] == 1:
        return np.zeros(1)
    if np.any(np.diff(times) <= 0):
        raise NonMonotoneTimestamps("sequence timestamps must be strictly increasing")
    return (times - times[0]) / (times[-1] - times[0])


def score_sequence(sequence, model, calibration=None, *, normalize=True):
    """Log likelihood that the sequence came from the model.

    Timestamps are normalized to phases in [0,1] unless ``normalize=False``,
    in which case they are taken as phases verbatim (useful when a caller
    has already placed frames on a common phase axis, e.g. to score parts
    of a longer attempt consistently).
    """
    sequence = list(sequence)
    if normalize:
        phases = sequence_phases([t for t, _ in sequence])
    else:
        phases = np.asarray([t for t, _ in sequence], dtype=np.float64)
        if phases.shape[0] == 0:
            raise EmptySequence("cannot score an empty sequence")
        if phases.shape[0] > 1 and np.any(np.diff(phases) <= 0):
            raise NonMonotoneTimestamps("sequence timestamps must be strictly increasing")
    rows = np.ascontiguousarray(
        [np.concatenate([[ph], p.coords]) for ph, (_, p) in zip(phases, sequence)]
    )
    per_frame = mixture_log_density_many(model, rows)
    total = float(per_frame.sum())
    t = len(sequence)
    normalized = total / t if math.isfinite(total) else float("-inf")
    verdict = None
    if calibration is not None:
        passed = math.isfinite(normalized) and normalized >= calibration.threshold
        verdict = Verdict.PASS if passed else Verdict.FAIL
    return ScoreReport(
        total_log_likelihood=total,
        per_frame=[float(v) for v in per_frame],
        normalized_score=normalized,
        frame_count=t,
        verdict=verdict,
    )


def calibrate(model, demos, margin_multiplier=2.0):
    """Pass threshold from the demos' own normalized scores."""
    demos = list(demos)
    if len(demos) < 3:
        raise TooFewDemos(f"calibration needs at least 3 demos, got {len(demos)}")
    scores = [score_sequence(demo, model).normalized_score for demo in demos]
    mean = float(np.mean(scores))
    std = float(np.std(scores))
    threshold = mean - margin_multiplier * std - THRESHOLD_EPSILON
    return Calibration(
        threshold=threshold, demo_scores=scores, margin_multiplier=margin_multiplier
    )


def save_calibration(calibration, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_17g(calibration.to_json()))
        fh.write("\n")


def load_calibration(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"calibration file is not valid JSON: {exc}") from None
    return Calibration.from_json(doc)
