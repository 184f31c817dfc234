// Timeline state: the ordered, deduplicated tile list behind the view.

import type { Frame } from "./types.js";

export interface Tile {
  seq: number;
  kind: Frame["kind"];
  klass: string | null;
  phase: string | null;
  summary: string;
  action: string | null;
  specVersion: number;
}

export class TimelineStore {
  private bySeq = new Map<number, Tile>();

  /** Returns the new tile, or null if the seq was already present. */
  add(frame: Frame): Tile | null {
    if (this.bySeq.has(frame.seq)) return null;
    const tile: Tile = {
      seq: frame.seq,
      kind: frame.kind,
      klass: frame.class,
      phase: frame.phase,
      summary: frame.summary,
      action: frame.action,
      specVersion: frame.spec_version,
    };
    this.bySeq.set(frame.seq, tile);
    return tile;
  }

  get tiles(): Tile[] {
    return [...this.bySeq.values()].sort((a, b) => a.seq - b.seq);
  }

  get injectionCount(): number {
    return this.tiles.filter((t) => t.kind === "inj").length;
  }

  get fallbackCount(): number {
    return this.tiles.filter((t) => t.action === "fallback").length;
  }

  /** Stable identity of what was rendered, for fidelity checks. */
  identity(): string[] {
    return this.tiles.map((t) => `${t.seq}:${t.kind}:${t.klass ?? "-"}:${t.phase ?? "-"}`);
  }
}
