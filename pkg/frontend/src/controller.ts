// Session controller: wires the stream client, the tile store, and the view.

import { ServiceClient, ServiceError } from "./client.js";
import { ConsoleView } from "./render.js";
import { TimelineStore } from "./timeline.js";
import type { RevisionDraft } from "./types.js";

export class SessionConsole {
  readonly store = new TimelineStore();
  readonly view: ConsoleView;
  readonly done: Promise<void>;
  private markerSerial = 0;
  private pendingMarkers: string[] = [];
  private specVersionShown = -1;
  private stopStream: () => void;

  constructor(
    readonly client: ServiceClient,
    readonly sessionId: string,
    root: HTMLElement,
    fromSeq = 1,
  ) {
    this.view = new ConsoleView(root);
    const handle = client.streamEvents(
      sessionId,
      {
        onFrame: (frame) => {
          const tile = this.store.add(frame);
          if (tile === null) return;
          this.view.addTile(tile);
          if (tile.kind === "inj") {
            const marker = this.pendingMarkers.shift();
            if (marker) this.view.resolvePendingMarker(marker);
          }
          if (frame.spec_version !== this.specVersionShown) {
            this.specVersionShown = frame.spec_version;
            void this.refreshSpec();
          }
        },
        onEnd: (end) => {
          this.view.setStatus(
            `${end.termination}${end.quality !== null ? ` (quality ${end.quality})` : ""}`,
          );
        },
        onStatus: (status) => this.view.setStatus(status),
      },
      fromSeq,
    );
    this.done = handle.done;
    this.stopStream = handle.stop;
    void this.refreshSpec();
  }

  async refreshSpec(): Promise<void> {
    try {
      this.view.renderSpec(await this.client.spec(this.sessionId));
    } catch {
      // spec panel is advisory; the timeline remains authoritative
    }
  }

  /** Send a revision; an optimistic marker sits in the timeline until the
   * matching injection frame arrives. Rejections render inline. */
  async compose(draft: RevisionDraft): Promise<boolean> {
    this.view.clearError();
    const markerId = `m${++this.markerSerial}`;
    const label = draft.preset ?? draft.rtype ?? "revision";
    this.view.addPendingMarker(markerId, label);
    this.pendingMarkers.push(markerId);
    try {
      await this.client.inject(this.sessionId, draft);
      return true;
    } catch (error) {
      this.pendingMarkers = this.pendingMarkers.filter((m) => m !== markerId);
      this.view.resolvePendingMarker(markerId);
      const detail = error instanceof ServiceError ? error.detail : String(error);
      this.view.showError(detail);
      return false;
    }
  }

  stop(): void {
    this.stopStream();
  }
}

export function connectAndRender(
  client: ServiceClient,
  sessionId: string,
  root: HTMLElement,
  fromSeq = 1,
): SessionConsole {
  return new SessionConsole(client, sessionId, root, fromSeq);
}
