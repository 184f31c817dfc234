// DOM rendering: class-colored timeline tiles, spec panel, and banners.
//
// Tile color encodes the reversibility class for plan acts and the phase
// for compensation / replanned work, mirroring the stream's structure:
// keep the I/R prefix, compensate the conflict, re-plan the tail.

import type { Tile } from "./timeline.js";
import type { SpecView } from "./types.js";

export class ConsoleView {
  readonly timelineEl: HTMLElement;
  readonly statusEl: HTMLElement;
  readonly bannerEl: HTMLElement;
  readonly specEl: HTMLElement;
  readonly errorEl: HTMLElement;

  constructor(readonly root: HTMLElement) {
    root.innerHTML = `
      <div class="status" data-role="status">connecting</div>
      <div class="banner hidden" data-role="banner"></div>
      <div class="timeline" data-role="timeline"></div>
      <div class="spec-panel" data-role="spec"></div>
      <div class="inline-error hidden" data-role="error"></div>
    `;
    this.statusEl = must(root, "status");
    this.bannerEl = must(root, "banner");
    this.timelineEl = must(root, "timeline");
    this.specEl = must(root, "spec");
    this.errorEl = must(root, "error");
  }

  setStatus(text: string): void {
    this.statusEl.textContent = text;
  }

  addTile(tile: Tile): void {
    const el = this.root.ownerDocument.createElement("div");
    el.className = `tile ${tileColor(tile)}`;
    el.dataset.seq = String(tile.seq);
    el.dataset.kind = tile.kind;
    if (tile.klass) el.dataset.class = tile.klass;
    if (tile.phase) el.dataset.phase = tile.phase;
    el.title = tile.summary;
    el.textContent = tileLabel(tile);
    this.timelineEl.appendChild(el);
    if (tile.action === "fallback") {
      this.showBanner(`irreversible conflict recorded: ${tile.summary}`);
    }
  }

  showBanner(text: string): void {
    this.bannerEl.textContent = text;
    this.bannerEl.classList.remove("hidden");
  }

  renderSpec(spec: SpecView): void {
    const items = spec.clauses
      .map(
        (c) =>
          `<li class="clause clause-${c.status}" data-clause="${escapeHtml(c.id)}" ` +
          `data-status="${c.status}">` +
          `<span class="clause-id">${escapeHtml(c.id)}</span> ${escapeHtml(c.text)}` +
          (c.status === "active" ? "" : ` <em>[${c.status}]</em>`) +
          `</li>`,
      )
      .join("");
    this.specEl.innerHTML =
      `<h3>${escapeHtml(spec.initial_query)}</h3>` +
      `<div class="spec-meta">spec v${spec.version}, ${spec.absorbed} revision(s) absorbed</div>` +
      `<ul>${items}</ul>`;
  }

  addPendingMarker(markerId: string, label: string): void {
    const el = this.root.ownerDocument.createElement("div");
    el.className = "tile pending";
    el.dataset.marker = markerId;
    el.textContent = `queued: ${label}`;
    this.timelineEl.appendChild(el);
  }

  resolvePendingMarker(markerId: string): void {
    const el = this.timelineEl.querySelector(`[data-marker="${markerId}"]`);
    el?.remove();
  }

  showError(text: string): void {
    this.errorEl.textContent = text;
    this.errorEl.classList.remove("hidden");
  }

  clearError(): void {
    this.errorEl.textContent = "";
    this.errorEl.classList.add("hidden");
  }

  renderedIdentity(): string[] {
    return [...this.timelineEl.querySelectorAll<HTMLElement>(".tile:not(.pending)")].map(
      (el) =>
        `${el.dataset.seq}:${el.dataset.kind}:${el.dataset.class ?? "-"}:${el.dataset.phase ?? "-"}`,
    );
  }
}

function tileColor(tile: Tile): string {
  if (tile.kind === "inj") return "c-inj";
  if (tile.phase === "compensation") return "c-comp";
  if (tile.phase === "replanned") return "c-replan";
  if (tile.kind === "act" && tile.klass) return `c-${tile.klass}`;
  return "c-ambient";
}

function tileLabel(tile: Tile): string {
  if (tile.kind === "inj") return "φ";
  if (tile.kind === "act") return tile.klass ?? "a";
  return tile.kind === "thought" ? "·" : "○";
}

function must(root: HTMLElement, role: string): HTMLElement {
  const el = root.querySelector<HTMLElement>(`[data-role="${role}"]`);
  if (!el) throw new Error(`missing console element ${role}`);
  return el;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
