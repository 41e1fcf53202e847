/** Thin HTTP client for the session service.
 *
 * Only verbs from the command alphabet can be sent; a 409 reply (illegal
 * transition, unknown gesture, missing selection) is surfaced as a message
 * for the toast bar and must not touch the view. Network failures resolve
 * to `ok: false, status: 0` so the UI can offer a retry without crashing.
 */

import { GestureInfo, ServerSessionState, SessionCommand } from "./types.js";

export interface CommandOutcome {
  ok: boolean;
  status: number;
  stage?: string;
  selectedGesture?: string | null;
  message?: string;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const COMMAND_KINDS = new Set([
  "start",
  "advance",
  "select_gesture",
  "prompt",
  "stop_capture",
  "end",
]);

export class SessionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(): Promise<string> {
    const res = await this.fetchFn(this.url("/api/session"), { method: "POST" });
    if (res.status !== 201) throw new Error(`session creation failed: ${res.status}`);
    const body = (await res.json()) as { id: string };
    return body.id;
  }

  async fetchState(sessionId: string): Promise<ServerSessionState> {
    const res = await this.fetchFn(this.url(`/api/session/${sessionId}`));
    if (!res.ok) throw new Error(`state fetch failed: ${res.status}`);
    return (await res.json()) as ServerSessionState;
  }

  async fetchGestures(): Promise<GestureInfo[]> {
    const res = await this.fetchFn(this.url("/api/gestures"));
    if (!res.ok) throw new Error(`gesture listing failed: ${res.status}`);
    return (await res.json()) as GestureInfo[];
  }

  async sendCommand(sessionId: string, command: SessionCommand): Promise<CommandOutcome> {
    if (!COMMAND_KINDS.has(command.kind)) {
      return { ok: false, status: 0, message: `not a session command: ${command.kind}` };
    }
    let res: Response;
    try {
      res = await this.fetchFn(this.url(`/api/session/${sessionId}/command`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(command),
      });
    } catch (err) {
      return { ok: false, status: 0, message: `network failure: ${String(err)}` };
    }
    if (res.status === 200) {
      const body = (await res.json()) as { stage: string; selected_gesture: string | null };
      return {
        ok: true,
        status: 200,
        stage: body.stage,
        selectedGesture: body.selected_gesture,
      };
    }
    let message = `request failed with ${res.status}`;
    try {
      const body = (await res.json()) as { error?: string; message?: string };
      message = body.message ?? body.error ?? message;
    } catch {
      // non-JSON error body: keep the generic message
    }
    return { ok: false, status: res.status, message };
  }

  eventStreamUrl(sessionId: string): string {
    const http = this.url(`/api/session/${sessionId}/events`);
    return http.replace(/^http/, "ws");
  }
}
