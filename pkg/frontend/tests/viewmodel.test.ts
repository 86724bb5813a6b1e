import { describe, expect, it } from "vitest";

import { parseMessage, StateUpdate } from "../src/protocol.js";
import { ConsoleViewModel } from "../src/viewmodel.js";

function update(seq: number, overrides: Partial<StateUpdate> = {}): StateUpdate {
  return {
    type: "state_update",
    version: 1,
    session_id: "s1",
    seq,
    t: seq,
    mode: "paused",
    rate: 2,
    done: false,
    observation: `obs ${seq}`,
    payload: {
      kind: "craftlite",
      width: 4,
      height: 4,
      known_tiles: [[0, 0, "grass"]],
      agent: [1, 1],
      facing: "south",
      zombie: null,
      inventory: {},
      health: 9,
      hunger: 9,
      unlocked: [],
    },
    plan: { text: null, source: null, steps_executed: 0, lock_remaining: 0 },
    metrics: { t: seq, score: 0, return_task: 0, f_p: 0, plan_tokens: 0, backtracks: 0 },
    ...overrides,
  };
}

describe("ConsoleViewModel", () => {
  it("keeps only the highest sequence number", () => {
    const vm = new ConsoleViewModel();
    vm.handleMessage(update(3));
    vm.handleMessage(update(2));
    expect(vm.latest?.seq).toBe(3);
    expect(vm.staleDropped).toBe(1);
    vm.handleMessage(update(4));
    expect(vm.latest?.seq).toBe(4);
  });

  it("pairs every command with its ack", () => {
    const vm = new ConsoleViewModel();
    vm.commandSent({ type: "pause" });
    expect(vm.pending.length).toBe(1);
    vm.handleMessage({ type: "ack", ok: true, command: "pause" });
    expect(vm.pending.length).toBe(0);
    expect(vm.log.at(-1)?.kind).toBe("ack");
  });

  it("surfaces rejected commands as errors", () => {
    const vm = new ConsoleViewModel();
    vm.commandSent({ type: "inject_plan", plan_text: "explore", lock_steps: 5 });
    vm.handleMessage({ type: "plan_ack", ok: false, detail: "episode_end" });
    expect(vm.pending.length).toBe(0);
    expect(vm.log.at(-1)?.kind).toBe("error");
    expect(vm.log.at(-1)?.text).toContain("episode_end");
  });

  it("exposes the lock countdown from the plan panel", () => {
    const vm = new ConsoleViewModel();
    vm.handleMessage(update(1, {
      plan: { text: "explore 3,4 via: move north", source: "human",
              steps_executed: 1, lock_remaining: 7 },
    }));
    expect(vm.lockCountdown).toBe(7);
    expect(vm.latest?.plan.source).toBe("human");
  });

  it("marks the episode ended and flags controls", () => {
    const vm = new ConsoleViewModel();
    expect(vm.ended).toBe(false);
    vm.handleMessage({ type: "episode_end", session_id: "s1", status: "success",
                       summary: {}, trajectory_path: null });
    expect(vm.ended).toBe(true);
  });

  it("rejects empty plan text client-side", () => {
    const vm = new ConsoleViewModel();
    expect(vm.validatePlanText("   ")).toBeTruthy();
    expect(vm.validatePlanText("goto tree")).toBeNull();
  });

  it("resets stream state on reconnect so the snapshot re-renders", () => {
    const vm = new ConsoleViewModel();
    vm.handleMessage(update(9));
    vm.setConnection("reconnecting");
    expect(vm.latest).toBeNull();
    vm.setConnection("connected");
    vm.handleMessage(update(1)); // fresh snapshot seq restarts
    expect(vm.latest?.seq).toBe(1);
  });
});

describe("parseMessage", () => {
  it("accepts known types and rejects junk", () => {
    expect(parseMessage(JSON.stringify({ type: "ack", ok: true }))?.type).toBe("ack");
    expect(parseMessage("not json")).toBeNull();
    expect(parseMessage(JSON.stringify({ type: "mystery" }))).toBeNull();
    expect(parseMessage(JSON.stringify(42))).toBeNull();
  });
});
