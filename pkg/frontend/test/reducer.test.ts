import { describe, expect, it } from "vitest";

import { applyServerState, initialView, sync } from "../src/reducer.js";
import { SessionView } from "../src/types.js";
import stream from "./fixtures/event_stream.json";

function replay(events: unknown[]): SessionView {
  let view = initialView();
  for (const ev of events) view = sync(view, ev);
  return view;
}

describe("sync reducer", () => {
  it("replays the recorded event stream deterministically", () => {
    const a = replay(stream as unknown[]);
    const b = replay(stream as unknown[]);
    expect(a).toEqual(b);
    expect(a).toMatchSnapshot();
  });

  it("reaches the recorded session's final stage and attempt", () => {
    const view = replay(stream as unknown[]);
    expect(view.stage).toBe("closing");
    expect(view.attempts).toHaveLength(1);
    expect(view.attempts[0].gestureId).toBe("raise");
    expect(view.attempts[0].verdict).toBe("pass");
    expect(view.coverage?.detected).toBe(14);
    expect(view.desync).toBe(false);
    expect(view.lastSeq).toBe((stream as Array<{ seq: number }>).length - 1);
  });

  it("updates the stage on state_changed", () => {
    const view = sync(initialView(), {
      seq: 0,
      kind: "state_changed",
      t: 0,
      payload: { stage: "greeting" },
    });
    expect(view.stage).toBe("greeting");
  });

  it("prepends attempts newest first", () => {
    let view = initialView();
    for (const [seq, score] of [
      [0, -3.2],
      [1, -1.1],
    ] as const) {
      view = sync(view, {
        seq,
        kind: "attempt_scored",
        t: 0,
        payload: {
          gesture_id: "raise",
          normalized_score: score,
          verdict: "pass",
          frame_count: 30,
          dropped_frames: 0,
        },
      });
    }
    expect(view.attempts.map((a) => a.normalized)).toEqual([-1.1, -3.2]);
  });

  it("flags a desync on a sequence gap and reconciles on refetch", () => {
    let view = sync(initialView(), {
      seq: 5,
      kind: "state_changed",
      t: 0,
      payload: { stage: "greeting" },
    });
    expect(view.desync).toBe(false);
    view = sync(view, {
      seq: 7,
      kind: "frame_coverage",
      t: 0,
      payload: { detected: 14, percent: 100, joints: [] },
    });
    expect(view.desync).toBe(true);
    view = applyServerState(view, {
      stage: "pairing",
      selected_gesture: "raise",
      dropped_frames: 2,
      bad_lines: 1,
    });
    expect(view.desync).toBe(false);
    expect(view.stage).toBe("pairing");
    expect(view.selectedGesture).toBe("raise");
    expect(view.droppedFrames).toBe(2);
  });

  it("skips malformed events without changing the view", () => {
    const before = replay((stream as unknown[]).slice(0, 4));
    for (const junk of [
      null,
      42,
      "event",
      {},
      { seq: "x", kind: "state_changed", payload: {} },
      { seq: 99, kind: "state_changed" }, // no payload
    ]) {
      expect(sync(before, junk)).toEqual(before);
    }
  });

  it("ignores unknown event kinds", () => {
    const before = initialView();
    const after = sync(before, { seq: 0, kind: "mystery", t: 0, payload: {} });
    expect(after).toEqual(before);
  });

  it("never mutates its input view", () => {
    const view = initialView();
    const frozen = Object.freeze({ ...view, attempts: Object.freeze([]) });
    sync(frozen as unknown as SessionView, {
      seq: 0,
      kind: "state_changed",
      t: 0,
      payload: { stage: "greeting" },
    });
    expect(frozen.stage).toBeNull();
  });
});
