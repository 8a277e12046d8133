// HTTP + event-stream client for the engine's control service.

import type { Channel, ProfileDoc, StatusDoc } from "./types.js";

export type ApplyResult =
  | { ok: true; appliedFrameIndex: number; version: number; warnings: string[] }
  | { ok: false; conflict: true; serverVersion: number }
  | { ok: false; conflict?: false; errors: string[]; warnings: string[] };

export type ConnectionState = "connecting" | "open" | "closed";

export interface Subscription {
  close(): void;
}

export class FacekeyClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async getStatus(): Promise<StatusDoc> {
    const response = await fetch(this.url("/v1/status"));
    if (!response.ok) throw new Error(`status request failed: ${response.status}`);
    return (await response.json()) as StatusDoc;
  }

  async getProfile(): Promise<ProfileDoc> {
    const response = await fetch(this.url("/v1/profile"));
    if (!response.ok) throw new Error(`profile request failed: ${response.status}`);
    return (await response.json()) as ProfileDoc;
  }

  async putProfile(doc: ProfileDoc, version?: number): Promise<ApplyResult> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (version !== undefined) headers["If-Match"] = String(version);
    const response = await fetch(this.url("/v1/profile"), {
      method: "PUT",
      headers,
      body: JSON.stringify(doc),
    });
    const body = await response.json();
    if (response.status === 200) {
      return {
        ok: true,
        appliedFrameIndex: body.applied_frame_index,
        version: body.version,
        warnings: body.warnings ?? [],
      };
    }
    if (response.status === 409) {
      return { ok: false, conflict: true, serverVersion: body.version };
    }
    return { ok: false, errors: body.errors ?? [body.error ?? "request failed"], warnings: body.warnings ?? [] };
  }

  async injectTranscript(text: string): Promise<void> {
    const response = await fetch(this.url("/v1/transcript"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (response.status !== 202) throw new Error(`transcript inject failed: ${response.status}`);
  }

  async setRecording(path: string | null, on: boolean): Promise<void> {
    const response = await fetch(this.url("/v1/record"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(on ? { path, on } : { on }),
    });
    if (!response.ok) {
      const body = await response.json().catch(() => ({}));
      throw new Error(body.error ?? `record request failed: ${response.status}`);
    }
  }

  /**
   * Subscribe to a push channel. Payloads arrive as parsed JSON; the
   * connection reconnects with backoff until closed, reporting state
   * changes so the UI can show a banner.
   */
  subscribe<T>(
    channel: Channel,
    onPayload: (payload: T) => void,
    onState?: (state: ConnectionState) => void,
  ): Subscription {
    let closed = false;
    let controller: AbortController | null = null;
    let backoffMs = 500;

    const connect = async (): Promise<void> => {
      while (!closed) {
        onState?.("connecting");
        controller = new AbortController();
        try {
          const response = await fetch(this.url(`/v1/events?channel=${channel}`), {
            signal: controller.signal,
          });
          if (!response.ok || !response.body) throw new Error(`subscribe failed: ${response.status}`);
          onState?.("open");
          backoffMs = 500;
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          let buffer = "";
          for (;;) {
            const { done, value } = await reader.read();
            if (done) break;
            buffer += decoder.decode(value, { stream: true });
            let sep;
            while ((sep = buffer.indexOf("\n\n")) >= 0) {
              const block = buffer.slice(0, sep);
              buffer = buffer.slice(sep + 2);
              for (const line of block.split("\n")) {
                if (line.startsWith("data: ")) {
                  onPayload(JSON.parse(line.slice(6)) as T);
                }
              }
            }
          }
        } catch {
          // fall through to reconnect
        }
        if (closed) break;
        onState?.("connecting");
        await new Promise((resolve) => setTimeout(resolve, backoffMs));
        backoffMs = Math.min(backoffMs * 2, 5000);
      }
      onState?.("closed");
    };

    void connect();
    return {
      close() {
        closed = true;
        controller?.abort();
      },
    };
  }
}
