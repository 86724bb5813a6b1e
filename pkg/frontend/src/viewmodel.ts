// Pure console state: everything rendered traces back to a received
// message, stale sequence numbers are dropped, and every command stays
// "pending" until its ack or error arrives (no optimistic UI).

import { Ack, EpisodeEnd, StateUpdate, WireCommand, WireMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "reconnecting" | "closed";

export interface LogEntry {
  kind: "command" | "ack" | "error" | "info";
  text: string;
}

export class ConsoleViewModel {
  connection: ConnectionStatus = "connecting";
  latest: StateUpdate | null = null;
  episodeEnd: EpisodeEnd | null = null;
  pending: WireCommand[] = [];
  log: LogEntry[] = [];
  staleDropped = 0;

  get connected(): boolean {
    return this.connection === "connected";
  }

  get ended(): boolean {
    return this.episodeEnd !== null || (this.latest?.done ?? false);
  }

  get lockCountdown(): number {
    return this.latest?.plan.lock_remaining ?? 0;
  }

  setConnection(status: ConnectionStatus): void {
    this.connection = status;
    if (status === "reconnecting") {
      // A reconnect resubscribes; the server replies with a full snapshot,
      // so any seq counter from the old session stream is void.
      this.latest = null;
      this.pending = [];
      this.addLog("info", "connection lost, reconnecting");
    }
  }

  commandSent(command: WireCommand): void {
    this.pending.push(command);
    this.addLog("command", describeCommand(command));
  }

  handleMessage(msg: WireMessage): void {
    if (msg.type === "state_update") {
      if (this.latest !== null && msg.seq <= this.latest.seq) {
        this.staleDropped += 1;
        return;
      }
      this.latest = msg;
      return;
    }
    if (msg.type === "episode_end") {
      this.episodeEnd = msg;
      this.addLog("info", `episode ended: ${msg.status}`);
      return;
    }
    if (msg.type === "ack" || msg.type === "plan_ack") {
      this.resolvePending(msg);
      return;
    }
    this.addLog("error", msg.detail ?? "unknown error");
  }

  private resolvePending(ack: Ack): void {
    this.pending.shift();
    const label = ack.type === "plan_ack" ? "inject_plan" : ack.command ?? "command";
    if (ack.ok) {
      this.addLog("ack", `${label} ok${ack.detail ? ` (${ack.detail})` : ""}`);
    } else {
      this.addLog("error", `${label} rejected: ${ack.detail ?? "unknown"}`);
    }
  }

  validatePlanText(text: string): string | null {
    if (!text.trim()) return "plan text must not be empty";
    return null;
  }

  private addLog(kind: LogEntry["kind"], text: string): void {
    this.log.push({ kind, text });
    if (this.log.length > 200) this.log.shift();
  }
}

export function describeCommand(command: WireCommand): string {
  switch (command.type) {
    case "inject_plan":
      return `inject "${command.plan_text}" (lock ${command.lock_steps})`;
    case "resume":
      return `resume at ${command.rate}/s`;
    case "select_policy":
      return `select policy ${JSON.stringify(command.spec)}`;
    default:
      return command.type;
  }
}
