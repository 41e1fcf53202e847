/** Wire types for the session service, mirrored from the server. */

export type Stage =
  | "idle"
  | "greeting"
  | "pairing"
  | "induced_imitation"
  | "spontaneous_imitation"
  | "closing";

export type CommandKind =
  | "start"
  | "advance"
  | "select_gesture"
  | "prompt"
  | "stop_capture"
  | "end";

export interface SessionCommand {
  kind: CommandKind;
  gesture_id?: string;
}

export type EventKind =
  | "state_changed"
  | "frame_coverage"
  | "reference_pose"
  | "attempt_scored"
  | "error";

export interface SessionEvent {
  seq: number;
  kind: EventKind;
  t: number;
  payload: Record<string, unknown>;
}

export interface GestureInfo {
  id: string;
  display_name: string;
  uses_object: boolean;
  calibrated: boolean;
  threshold: number | null;
}

export interface ServerSessionState {
  id: string;
  stage: Stage;
  selected_gesture: string | null;
  capture_open: boolean;
  counters: Record<string, number>;
  dropped_frames: number;
  bad_lines: number;
}

/** A joint is [x, y]; null marks a missing keypoint in live coverage. */
export type Joints = Array<[number, number] | null>;

export interface CoverageGauge {
  detected: number;
  percent: number;
  joints: Joints;
}

export interface ReferencePose {
  gestureId: string;
  phase: number;
  joints: Array<[number, number]>;
}

export interface AttemptResult {
  gestureId: string;
  normalized: number;
  verdict: "pass" | "fail" | null;
  frameCount: number;
  droppedFrames: number;
  ranking: Record<string, number> | null;
}

export type ConnectionStatus = "disconnected" | "connecting" | "connected";

/** Everything the facilitator sees; derived from server events only. */
export interface SessionView {
  stage: Stage | null;
  selectedGesture: string | null;
  coverage: CoverageGauge | null;
  referencePose: ReferencePose | null;
  attempts: AttemptResult[]; // newest first
  lastError: string | null;
  lastSeq: number | null;
  desync: boolean;
  connection: ConnectionStatus;
  droppedFrames: number;
  badLines: number;
}

/** Bone tree of the 14-part body model, in the server's edge order. */
export const BONE_EDGES: Array<[number, number]> = [
  [1, 0], // SpineShoulder -> Head
  [1, 2], // SpineShoulder -> RShoulder
  [1, 5], // SpineShoulder -> LShoulder
  [1, 8], // SpineShoulder -> RHip
  [1, 11], // SpineShoulder -> LHip
  [2, 3], // RShoulder -> RElbow
  [3, 4], // RElbow -> RWrist
  [5, 6], // LShoulder -> LElbow
  [6, 7], // LElbow -> LWrist
  [8, 9], // RHip -> RKnee
  [9, 10], // RKnee -> RAnkle
  [11, 12], // LHip -> LKnee
  [12, 13], // LKnee -> LAnkle
];

export const MAX_ATTEMPTS_SHOWN = 20;
