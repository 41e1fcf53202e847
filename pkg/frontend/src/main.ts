/** Browser entry point: wires the client, reducer, and canvases together. */

import { SessionClient } from "./client.js";
import { applyServerState, initialView, sync } from "./reducer.js";
import { drawSkeleton } from "./skeleton.js";
import { CommandKind, GestureInfo, SessionView } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let view: SessionView = initialView();
let client: SessionClient | null = null;
let sessionId: string | null = null;
let socket: WebSocket | null = null;
let gestures: GestureInfo[] = [];

function thresholdFor(gestureId: string | null): number | null {
  if (!gestureId) return null;
  return gestures.find((g) => g.id === gestureId)?.threshold ?? null;
}

function render(): void {
  el<HTMLSpanElement>("stage").textContent = view.stage ?? "–";
  el<HTMLSpanElement>("connection").textContent = view.connection;
  el<HTMLSpanElement>("connection").className = `status ${view.connection}`;
  el<HTMLSpanElement>("selected").textContent = view.selectedGesture ?? "none";
  el<HTMLSpanElement>("drops").textContent =
    `${view.droppedFrames} frames / ${view.badLines} bad lines`;
  el<HTMLDivElement>("desync").style.display = view.desync ? "block" : "none";
  el<HTMLDivElement>("toast").textContent = view.lastError ?? "";

  const gauge = el<HTMLDivElement>("coverage");
  if (view.coverage) {
    gauge.textContent = `${view.coverage.detected}/14 (${view.coverage.percent}%)`;
    gauge.className = view.coverage.percent >= 90 ? "gauge good" : "gauge poor";
  }

  const list = el<HTMLUListElement>("attempts");
  list.innerHTML = "";
  for (const attempt of view.attempts) {
    const li = document.createElement("li");
    const threshold = thresholdFor(attempt.gestureId);
    const verdict = attempt.verdict ?? "unscored";
    li.className = `attempt ${verdict}`;
    li.textContent =
      `${attempt.gestureId}: ${attempt.normalized.toFixed(2)} ` +
      (threshold !== null ? `(threshold ${threshold.toFixed(2)}) ` : "") +
      verdict;
    if (threshold !== null) {
      const bar = document.createElement("div");
      bar.className = "scorebar";
      const lo = Math.min(threshold, attempt.normalized) - 5;
      const hi = Math.max(threshold, attempt.normalized) + 5;
      const pct = (v: number) => ((v - lo) / (hi - lo)) * 100;
      bar.innerHTML =
        `<span class="mark score" style="left:${pct(attempt.normalized)}%"></span>` +
        `<span class="mark threshold" style="left:${pct(threshold)}%"></span>`;
      li.appendChild(bar);
    }
    list.appendChild(li);
  }

  const live = el<HTMLCanvasElement>("live");
  const liveCtx = live.getContext("2d");
  if (liveCtx) {
    liveCtx.clearRect(0, 0, live.width, live.height);
    if (view.coverage && view.coverage.joints.length) {
      drawSkeleton(liveCtx, view.coverage.joints, live.width, live.height, {
        color: "#4dd0e1",
      });
    }
  }
  const ref = el<HTMLCanvasElement>("reference");
  const refCtx = ref.getContext("2d");
  if (refCtx) {
    refCtx.clearRect(0, 0, ref.width, ref.height);
    if (view.referencePose) {
      drawSkeleton(refCtx, view.referencePose.joints, ref.width, ref.height, {
        color: "#ffb74d",
        flipY: true,
      });
    }
  }
}

function dispatch(event: unknown): void {
  view = sync(view, event);
  if (view.desync && client && sessionId) {
    void refetchState();
  }
  render();
}

async function refetchState(): Promise<void> {
  if (!client || !sessionId) return;
  try {
    const state = await client.fetchState(sessionId);
    view = applyServerState(view, state);
    render();
  } catch {
    // keep the desync banner; the next event will retry
  }
}

async function send(kind: CommandKind, gestureId?: string): Promise<void> {
  if (!client || !sessionId) return;
  const outcome = await client.sendCommand(
    sessionId,
    gestureId === undefined ? { kind } : { kind, gesture_id: gestureId },
  );
  const toast = el<HTMLDivElement>("toast");
  if (!outcome.ok) {
    toast.textContent = outcome.message ?? "command failed";
    return; // the view is intentionally untouched on 409/network failure
  }
  toast.textContent = "";
  view = { ...view, selectedGesture: outcome.selectedGesture ?? view.selectedGesture };
  render();
}

function connectSocket(): void {
  if (!client || !sessionId) return;
  socket?.close();
  view = { ...view, connection: "connecting" };
  render();
  socket = new WebSocket(client.eventStreamUrl(sessionId));
  socket.onopen = () => {
    view = { ...view, connection: "connected" };
    void refetchState();
  };
  socket.onmessage = (msg) => {
    try {
      dispatch(JSON.parse(msg.data as string));
    } catch {
      // malformed frame: skip
    }
  };
  socket.onclose = () => {
    view = { ...view, connection: "disconnected" };
    render();
  };
}

async function attach(): Promise<void> {
  const base = el<HTMLInputElement>("base-url").value;
  client = new SessionClient(base);
  gestures = await client.fetchGestures();
  const picker = el<HTMLSelectElement>("gesture");
  picker.innerHTML = "";
  for (const g of gestures) {
    const option = document.createElement("option");
    option.value = g.id;
    option.textContent = `${g.display_name}${g.uses_object ? " (object)" : ""}`;
    picker.appendChild(option);
  }
  const existing = el<HTMLInputElement>("session-id").value.trim();
  sessionId = existing || (await client.createSession());
  el<HTMLInputElement>("session-id").value = sessionId;
  view = initialView();
  connectSocket();
}

export function bootstrap(): void {
  el<HTMLButtonElement>("attach").onclick = () => void attach();
  el<HTMLButtonElement>("cmd-start").onclick = () => void send("start");
  el<HTMLButtonElement>("cmd-advance").onclick = () => void send("advance");
  el<HTMLButtonElement>("cmd-select").onclick = () =>
    void send("select_gesture", el<HTMLSelectElement>("gesture").value);
  el<HTMLButtonElement>("cmd-prompt").onclick = () => void send("prompt");
  el<HTMLButtonElement>("cmd-stop").onclick = () => void send("stop_capture");
  el<HTMLButtonElement>("cmd-end").onclick = () => void send("end");
  render();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", bootstrap);
}
