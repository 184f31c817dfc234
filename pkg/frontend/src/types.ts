// Wire types for the session service.

export interface Frame {
  seq: number;
  kind: "thought" | "act" | "obs" | "inj";
  class: string | null; // I | R | K | X for acts
  phase: string | null; // plan | compensation | replanned for acts
  summary: string;
  spec_version: number;
  action: string | null; // invert | compensate | fallback on compensation acts
}

export interface EndFrame {
  kind: "end";
  termination: string;
  quality: number | null;
  last_seq: number;
}

export type StreamFrame = Frame | EndFrame;

export interface SessionHandle {
  session_id: string;
  status: "running" | "completed" | "failed";
  config: {
    scenario: string;
    rho: number;
    rho_realized: number;
    policy: string;
    backend: string;
    plan_length: number;
  };
}

export interface SpecClause {
  id: string;
  text: string;
  status: "active" | "revoked" | "replaced";
}

export interface SpecView {
  version: number;
  initial_query: string;
  absorbed: number;
  clauses: SpecClause[];
}

export interface RevisionDraft {
  preset?: string;
  rtype?: string;
  text?: string;
  target_clause?: string | null;
  conflict_tags?: string[];
}

export interface InjectAck {
  accepted: boolean;
  queue_position: number;
}

export interface CreateSessionBody {
  scenario: string;
  rho?: number;
  policy?: string;
  backend?: string;
  length_mult?: number;
  seed?: number;
  step_delay?: number;
}
