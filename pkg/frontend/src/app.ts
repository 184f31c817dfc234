// Browser entry point: create or attach to a session and steer it live.

import { ServiceClient } from "./client.js";
import { connectAndRender, SessionConsole } from "./controller.js";
import type { RevisionDraft } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

let active: SessionConsole | null = null;

function currentClient(): ServiceClient {
  return new ServiceClient(el<HTMLInputElement>("base-url").value.replace(/\/$/, ""));
}

async function startSession(): Promise<void> {
  const client = currentClient();
  const handle = await client.createSession({
    scenario: el<HTMLSelectElement>("scenario").value,
    policy: el<HTMLSelectElement>("policy").value,
    rho: Number(el<HTMLInputElement>("rho").value),
    step_delay: Number(el<HTMLInputElement>("step-delay").value),
  });
  el<HTMLInputElement>("session-id").value = handle.session_id;
  attach(client, handle.session_id);
}

function attach(client: ServiceClient, sessionId: string): void {
  active?.stop();
  active = connectAndRender(client, sessionId, el("console-root"));
}

function composerDraft(): RevisionDraft {
  const preset = el<HTMLSelectElement>("rev-preset").value;
  if (preset !== "custom") return { preset };
  return {
    rtype: el<HTMLSelectElement>("rev-type").value,
    text: el<HTMLInputElement>("rev-text").value,
    target_clause: el<HTMLInputElement>("rev-target").value || null,
    conflict_tags: el<HTMLInputElement>("rev-tags").value
      .split(",")
      .map((t) => t.trim())
      .filter(Boolean),
  };
}

export function wireUp(): void {
  el("start").addEventListener("click", () => void startSession());
  el("attach").addEventListener("click", () => {
    attach(currentClient(), el<HTMLInputElement>("session-id").value.trim());
  });
  el("inject-form").addEventListener("submit", (event) => {
    event.preventDefault();
    if (active) void active.compose(composerDraft());
  });
  el<HTMLSelectElement>("rev-preset").addEventListener("change", () => {
    el("custom-fields").classList.toggle(
      "hidden",
      el<HTMLSelectElement>("rev-preset").value !== "custom",
    );
  });
}

if (typeof document !== "undefined" && document.getElementById("console-root")) {
  wireUp();
}
