/** Pure view reducer over server events.
 *
 * The view never invents state: the stage shown is exactly the last
 * state_changed payload, coverage the last frame_coverage payload, and so
 * on. A sequence-number gap only flags `desync`; the caller is expected to
 * refetch the authoritative session state and clear the flag.
 */

import {
  AttemptResult,
  CoverageGauge,
  MAX_ATTEMPTS_SHOWN,
  ReferencePose,
  SessionEvent,
  SessionView,
  Stage,
} from "./types.js";

export function initialView(): SessionView {
  return {
    stage: null,
    selectedGesture: null,
    coverage: null,
    referencePose: null,
    attempts: [],
    lastError: null,
    lastSeq: null,
    desync: false,
    connection: "disconnected",
    droppedFrames: 0,
    badLines: 0,
  };
}

const STAGES: ReadonlySet<string> = new Set([
  "idle",
  "greeting",
  "pairing",
  "induced_imitation",
  "spontaneous_imitation",
  "closing",
]);

function isEvent(value: unknown): value is SessionEvent {
  if (typeof value !== "object" || value === null) return false;
  const ev = value as Record<string, unknown>;
  return (
    typeof ev.seq === "number" &&
    typeof ev.kind === "string" &&
    typeof ev.payload === "object" &&
    ev.payload !== null
  );
}

function coverageFrom(payload: Record<string, unknown>): CoverageGauge | null {
  const { detected, percent } = payload;
  if (typeof detected !== "number" || typeof percent !== "number") return null;
  const joints = Array.isArray(payload.joints)
    ? (payload.joints as CoverageGauge["joints"])
    : [];
  return { detected, percent, joints };
}

function referenceFrom(payload: Record<string, unknown>): ReferencePose | null {
  if (typeof payload.gesture_id !== "string" || !Array.isArray(payload.joints)) {
    return null;
  }
  return {
    gestureId: payload.gesture_id,
    phase: typeof payload.phase === "number" ? payload.phase : 0,
    joints: payload.joints as Array<[number, number]>,
  };
}

function attemptFrom(payload: Record<string, unknown>): AttemptResult | null {
  if (typeof payload.gesture_id !== "string" || typeof payload.normalized_score !== "number") {
    return null;
  }
  const verdict = payload.verdict;
  return {
    gestureId: payload.gesture_id,
    normalized: payload.normalized_score,
    verdict: verdict === "pass" || verdict === "fail" ? verdict : null,
    frameCount: typeof payload.frame_count === "number" ? payload.frame_count : 0,
    droppedFrames: typeof payload.dropped_frames === "number" ? payload.dropped_frames : 0,
    ranking:
      typeof payload.ranking === "object" && payload.ranking !== null
        ? (payload.ranking as Record<string, number>)
        : null,
  };
}

/** Apply one server event; malformed events are skipped untouched. */
export function sync(view: SessionView, event: unknown): SessionView {
  if (!isEvent(event)) return view;

  let next: SessionView = { ...view };
  if (view.lastSeq !== null && event.seq !== view.lastSeq + 1) {
    next.desync = true;
  }
  next.lastSeq = event.seq;

  switch (event.kind) {
    case "state_changed": {
      const stage = event.payload.stage;
      if (typeof stage === "string" && STAGES.has(stage)) {
        next.stage = stage as Stage;
      }
      break;
    }
    case "frame_coverage": {
      const gauge = coverageFrom(event.payload);
      if (gauge) next.coverage = gauge;
      break;
    }
    case "reference_pose": {
      const pose = referenceFrom(event.payload);
      if (pose) next.referencePose = pose;
      break;
    }
    case "attempt_scored": {
      const attempt = attemptFrom(event.payload);
      if (attempt) {
        next.attempts = [attempt, ...view.attempts].slice(0, MAX_ATTEMPTS_SHOWN);
      }
      break;
    }
    case "error": {
      const message = event.payload.message;
      if (typeof message === "string") next.lastError = message;
      break;
    }
    default:
      return view; // unknown kind: skip entirely
  }
  return next;
}

/** Reconcile with an authoritative state fetch after a desync or reconnect. */
export function applyServerState(
  view: SessionView,
  state: {
    stage: Stage;
    selected_gesture: string | null;
    dropped_frames: number;
    bad_lines: number;
  },
): SessionView {
  return {
    ...view,
    stage: state.stage,
    selectedGesture: state.selected_gesture,
    droppedFrames: state.dropped_frames,
    badLines: state.bad_lines,
    desync: false,
  };
}
