// Debounced preview requests with latest-wins delivery: every edit
// schedules a render; only the newest acknowledged response is shown,
// stale responses are discarded by sequence number.

import type { ApiClient } from "./api.js";
import type { Diagnostic, StyleDoc } from "./types.js";
import { debounce, type Debounced } from "./debounce.js";
import { ValidationFailure } from "./api.js";

export interface PreviewSink {
  onImage(blob: Blob): void;
  onDiagnostics(diags: Diagnostic[]): void;
  onError(err: Error): void;
}

export const DEBOUNCE_MS = 150;

export class PreviewLoop {
  private issued = 0;
  private delivered = 0;
  requestCount = 0;
  private readonly schedule: Debounced<[StyleDoc]>;

  constructor(
    private readonly api: ApiClient,
    private readonly sink: PreviewSink,
    public imageId: string,
    public maxEdge = 720,
    waitMs: number = DEBOUNCE_MS,
  ) {
    this.schedule = debounce((style: StyleDoc) => void this.fire(style), waitMs);
  }

  /** Call on every edit; collapses bursts within the debounce window. */
  request(style: StyleDoc): void {
    this.schedule(style);
  }

  /** Bypass the debounce (initial load). */
  requestNow(style: StyleDoc): void {
    this.schedule.cancel();
    void this.fire(style);
  }

  private async fire(style: StyleDoc): Promise<void> {
    if (!this.imageId) return;
    const seq = ++this.issued;
    this.requestCount += 1;
    try {
      const blob = await this.api.preview(style, this.imageId, this.maxEdge);
      if (seq <= this.delivered) return; // a newer response already landed
      this.delivered = seq;
      this.sink.onImage(blob);
    } catch (err) {
      if (seq <= this.delivered) return;
      this.delivered = seq;
      if (err instanceof ValidationFailure) {
        this.sink.onDiagnostics(err.diagnostics);
      } else {
        this.sink.onError(err as Error);
      }
    }
  }
}
