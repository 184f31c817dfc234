// HTTP + SSE client for the session service.
//
// The event stream is consumed with fetch/ReadableStream (works in browsers
// and in Node test runs alike). A dropped connection reconnects with
// from_seq = last seen + 1, so subscribers never observe a gap or a
// duplicate.

import type {
  CreateSessionBody,
  InjectAck,
  RevisionDraft,
  SessionHandle,
  SpecView,
  StreamFrame,
} from "./types.js";

export class ServiceError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`service returned ${status}: ${detail}`);
  }
}

export interface StreamCallbacks {
  onFrame: (frame: Extract<StreamFrame, { seq: number }>) => void;
  onEnd?: (end: Extract<StreamFrame, { kind: "end" }>) => void;
  onStatus?: (status: "live" | "reconnecting") => void;
}

export interface StreamHandle {
  done: Promise<void>;
  stop: () => void;
}

const RETRY_MS = 150;

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    readonly fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ServiceError(response.status, String(body?.detail ?? response.statusText));
    }
    return body as T;
  }

  createSession(body: CreateSessionBody): Promise<SessionHandle> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sessionState(sessionId: string): Promise<SessionHandle> {
    return this.request(`/sessions/${sessionId}`);
  }

  spec(sessionId: string): Promise<SpecView> {
    return this.request(`/sessions/${sessionId}/spec`);
  }

  record(sessionId: string): Promise<{ trace: Array<Record<string, unknown>> }> {
    return this.request(`/sessions/${sessionId}/record`);
  }

  inject(sessionId: string, draft: RevisionDraft): Promise<InjectAck> {
    return this.request(`/sessions/${sessionId}/inject`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    });
  }

  /**
   * Subscribe to the session's event frames from `fromSeq` onward.
   * Reconnects after connection loss, resuming exactly after the last
   * delivered frame; ends when the server sends its end-of-stream marker.
   */
  streamEvents(sessionId: string, callbacks: StreamCallbacks, fromSeq = 1): StreamHandle {
    let next = fromSeq;
    let stopped = false;
    let controller = new AbortController();

    const done = (async () => {
      while (!stopped) {
        try {
          const response = await this.fetchImpl(
            `${this.baseUrl}/sessions/${sessionId}/events?from_seq=${next}`,
            { signal: controller.signal },
          );
          if (!response.ok || response.body === null) {
            throw new ServiceError(response.status, "stream unavailable");
          }
          callbacks.onStatus?.("live");
          for await (const frame of parseSse(response.body)) {
            if (frame.kind === "end") {
              callbacks.onEnd?.(frame);
              return;
            }
            if (frame.seq >= next) {
              next = frame.seq + 1;
              callbacks.onFrame(frame);
            }
          }
          // Stream closed without an end marker: treat as a drop.
          throw new Error("stream interrupted");
        } catch (error) {
          if (stopped) return;
          callbacks.onStatus?.("reconnecting");
          controller = new AbortController();
          await delay(RETRY_MS);
        }
      }
    })();

    return {
      done,
      stop: () => {
        stopped = true;
        controller.abort();
      },
    };
  }
}

async function* parseSse(body: ReadableStream<Uint8Array>): AsyncGenerator<StreamFrame> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    while (true) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let boundary;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        for (const line of block.split("\n")) {
          if (line.startsWith("data: ")) {
            yield JSON.parse(line.slice("data: ".length)) as StreamFrame;
          }
        }
      }
    }
  } finally {
    reader.releaseLock();
  }
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
