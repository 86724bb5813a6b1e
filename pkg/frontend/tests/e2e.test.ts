// End-to-end: spawn the live steering service, drive a real session over
// the wire, and check the saved trajectory records the injected plan.

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { StateUpdate, WireMessage, parseMessage } from "../src/protocol.js";
import { ConsoleViewModel } from "../src/viewmodel.js";

const PORT = 8741;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess;
let workdir: string;

async function waitForServer(timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/sessions`);
      if (resp.ok) return;
    } catch { /* not up yet */ }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("server did not come up");
}

class WsHarness {
  vm = new ConsoleViewModel();
  private ws: WebSocket;
  private queue: WireMessage[] = [];
  private waiters: ((msg: WireMessage) => void)[] = [];

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.on("message", (data) => {
      const msg = parseMessage(String(data));
      if (!msg) return;
      this.vm.handleMessage(msg);
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.queue.push(msg);
    });
  }

  open(): Promise<void> {
    return new Promise((resolve) => this.ws.on("open", () => resolve()));
  }

  next(timeoutMs = 5000): Promise<WireMessage> {
    const queued = this.queue.shift();
    if (queued) return Promise.resolve(queued);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("timed out")), timeoutMs);
      this.waiters.push((msg) => { clearTimeout(timer); resolve(msg); });
    });
  }

  send(command: object): void {
    this.vm.commandSent(command as never);
    this.ws.send(JSON.stringify(command));
  }

  close(): void {
    this.ws.close();
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "dynaplan-e2e-"));
  server = spawn("python3", ["-c", `
from dynaplan.server import serve
serve(host="127.0.0.1", port=${PORT})
`], { cwd: join(__dirname, "..", ".."), stdio: "ignore" });
  await waitForServer();
}, 30000);

afterAll(() => {
  server?.kill();
});

describe("console against a live session", () => {
  it("connects, receives a snapshot within 1s, steps exactly once per step "
     + "command, and records an injected plan with source=human", async () => {
    const record = join(workdir, "steered.jsonl");
    const create = await fetch(`${BASE}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        env: { kind: "craftlite", width: 12, height: 12, max_steps: 60,
               zombie_enabled: false },
        policy: { family: "dynamic" },
        seed: 5,
        record: { path: record },
      }),
    });
    expect(create.ok).toBe(true);
    const { session_id } = await create.json();

    const harness = new WsHarness(`ws://127.0.0.1:${PORT}/ws/${session_id}`);
    await harness.open();
    const t0 = Date.now();
    const snapshot = await harness.next(1000);
    expect(Date.now() - t0).toBeLessThan(1000);
    expect(snapshot.type).toBe("state_update");
    expect(harness.vm.latest?.t).toBe(0);

    // pause, then exactly one state_update per step command
    harness.send({ type: "pause" });
    const pauseAck = await harness.next();
    expect(pauseAck.type).toBe("ack");
    for (let i = 1; i <= 3; i++) {
      harness.send({ type: "step" });
      const ack = await harness.next();
      expect((ack as { ok: boolean }).ok).toBe(true);
      const update = await harness.next() as StateUpdate;
      expect(update.type).toBe("state_update");
      expect(update.t).toBe(i);
      harness.send({ type: "pause" });
      await harness.next(); // ack
    }
    expect(harness.vm.latest?.t).toBe(3);
    expect(harness.vm.pending.length).toBe(0);

    // inject a plan through the UI path, then let the episode run out
    harness.send({ type: "inject_plan", plan_text: "explore", lock_steps: 4 });
    const planAck = await harness.next();
    expect(planAck.type).toBe("plan_ack");
    expect((planAck as { ok: boolean }).ok).toBe(true);

    harness.send({ type: "resume", rate: 400 });
    await harness.next(); // ack
    let sawHumanPlan = false;
    for (let i = 0; i < 300; i++) {
      const msg = await harness.next(10000);
      if (msg.type === "state_update" && msg.plan.source === "human") {
        sawHumanPlan = true;
      }
      if (msg.type === "episode_end") break;
    }
    expect(sawHumanPlan).toBe(true);
    expect(harness.vm.ended).toBe(true);
    harness.close();

    const lines = readFileSync(record, "utf-8").trim().split("\n");
    const steps = lines.slice(1, -1).map((l) => JSON.parse(l));
    expect(steps.some((s) => s.plan_source === "human")).toBe(true);
    const footer = JSON.parse(lines.at(-1)!);
    expect(footer.type).toBe("footer");
  }, 60000);

  it("reports unknown sessions with an error message", async () => {
    const harness = new WsHarness(`ws://127.0.0.1:${PORT}/ws/ghost`);
    await harness.open();
    const msg = await harness.next();
    expect(msg.type).toBe("error");
    harness.close();
  });
});
