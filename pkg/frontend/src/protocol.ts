// Wire schema shared with the steering service. The console speaks this
// schema verbatim and renders nothing that did not arrive in a message.

export interface PlanInfo {
  text: string | null;
  source: string | null;
  steps_executed: number;
  lock_remaining: number;
}

export interface Metrics {
  t: number;
  score: number;
  return_task: number;
  f_p: number;
  plan_tokens: number;
  backtracks: number;
}

export interface PogsPayload {
  kind: "pogs";
  nodes: { id: number; state: "current" | "visible" | "fringe" | "unknown" }[];
  edges: [number, number][];
  current: number;
  target: number;
  visited: number[];
}

export interface CraftPayload {
  kind: "craftlite";
  width: number;
  height: number;
  known_tiles: [number, number, string][];
  agent: [number, number];
  facing: string;
  zombie: [number, number] | null;
  inventory: Record<string, number>;
  health: number;
  hunger: number;
  unlocked: string[];
}

export interface StateUpdate {
  type: "state_update";
  version: number;
  session_id: string;
  seq: number;
  t: number;
  mode: string;
  rate: number;
  done: boolean;
  observation: string;
  payload: PogsPayload | CraftPayload;
  plan: PlanInfo;
  metrics: Metrics;
}

export interface EpisodeEnd {
  type: "episode_end";
  session_id: string;
  status: string;
  summary: Record<string, unknown>;
  trajectory_path: string | null;
}

export interface Ack {
  type: "ack" | "plan_ack";
  ok: boolean;
  command?: string;
  detail?: string;
  rate?: number;
}

export type WireMessage = StateUpdate | EpisodeEnd | Ack |
  { type: "error"; detail: string };

export type WireCommand =
  | { type: "inject_plan"; plan_text: string; lock_steps: number }
  | { type: "pause" }
  | { type: "resume"; rate: number }
  | { type: "step" }
  | { type: "select_policy"; spec: Record<string, unknown> };

export function parseMessage(raw: string): WireMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as { type?: unknown };
  if (msg.type === "state_update" || msg.type === "episode_end" ||
      msg.type === "ack" || msg.type === "plan_ack" || msg.type === "error") {
    return data as WireMessage;
  }
  return null;
}

// Plan templates mirroring the harness command grammar.
export const PLAN_TEMPLATES = [
  "explore",
  "goto tree",
  "goto water",
  "goto table",
  "goto furnace",
  "collect wood",
  "collect stone",
  "collect iron",
  "collect diamond",
  "craft wood_pickaxe",
  "craft stone_pickaxe",
  "craft iron_pickaxe",
  "goto node 0",
  "goto target",
];
