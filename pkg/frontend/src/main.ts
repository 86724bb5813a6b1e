// Console entry point: session picker, state stream, plan injection, and
// run controls wired to the DOM.

import { GraphView } from "./graph.js";
import { renderGrid } from "./grid.js";
import { PLAN_TEMPLATES, StateUpdate, WireCommand, parseMessage } from "./protocol.js";
import { LiveSocket } from "./socket.js";
import { ConsoleViewModel } from "./viewmodel.js";

const $ = (id: string) => document.getElementById(id)!;

const vm = new ConsoleViewModel();
const graphView = new GraphView();
let socket: LiveSocket | null = null;

function wsUrl(sessionId: string): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws/${sessionId}`;
}

function sendCommand(command: WireCommand): void {
  if (!socket || !vm.connected) return;
  vm.commandSent(command);
  socket.send(JSON.stringify(command));
  render();
}

function connect(sessionId: string): void {
  socket?.close();
  vm.setConnection("connecting");
  socket = new LiveSocket(wsUrl(sessionId), {
    onOpen: () => { vm.setConnection("connected"); render(); },
    onRaw: (data) => {
      const msg = parseMessage(data);
      if (msg) vm.handleMessage(msg);
      render();
    },
    onReconnecting: () => { vm.setConnection("reconnecting"); render(); },
    onClosed: () => { vm.setConnection("closed"); render(); },
  }, (url) => new WebSocket(url) as never);
  socket.connect();
}

async function refreshSessions(): Promise<void> {
  const resp = await fetch("/sessions");
  const sessions: { session_id: string }[] = await resp.json();
  const select = $("session-select") as HTMLSelectElement;
  select.innerHTML = "";
  for (const s of sessions) {
    const opt = document.createElement("option");
    opt.value = s.session_id;
    opt.textContent = s.session_id;
    select.appendChild(opt);
  }
}

function render(): void {
  $("connection").textContent = vm.connection;
  $("connection").className = `badge ${vm.connection}`;
  const update = vm.latest;
  const banner = $("banner");
  banner.style.display = vm.connection === "reconnecting" ? "block" : "none";

  const controlsDisabled = !vm.connected || vm.ended;
  for (const id of ["btn-pause", "btn-resume", "btn-step", "btn-inject"]) {
    ($(id) as HTMLButtonElement).disabled = controlsDisabled;
  }

  if (!update) return;
  $("mode").textContent = update.done ? "ended" : `${update.mode} (t=${update.t})`;
  $("observation").textContent = update.observation;

  const m = update.metrics;
  $("metrics").textContent =
    `score ${m.score.toFixed(2)} | f_p ${m.f_p.toFixed(2)} | ` +
    `plan tokens ${m.plan_tokens} | backtracks ${m.backtracks}`;

  const plan = update.plan;
  $("plan-text").textContent = plan.text ?? "(no plan)";
  const badge = $("plan-source");
  badge.textContent = plan.source ?? "none";
  badge.className = `badge source-${plan.source ?? "none"}`;
  $("lock").textContent = plan.lock_remaining > 0
    ? `lock ${plan.lock_remaining}` : "";

  const canvas = $("view") as HTMLCanvasElement;
  if (update.payload.kind === "craftlite") {
    renderGrid(canvas, update.payload);
  } else {
    graphView.render(canvas, update.payload);
  }

  const logEl = $("log");
  logEl.innerHTML = "";
  for (const entry of vm.log.slice(-12)) {
    const li = document.createElement("li");
    li.className = entry.kind;
    li.textContent = entry.text;
    logEl.appendChild(li);
  }
  if (vm.episodeEnd) {
    $("mode").textContent = `ended: ${vm.episodeEnd.status}`;
  }
}

function init(): void {
  const templates = $("plan-template") as HTMLSelectElement;
  for (const t of PLAN_TEMPLATES) {
    const opt = document.createElement("option");
    opt.value = t;
    opt.textContent = t;
    templates.appendChild(opt);
  }
  templates.onchange = () => {
    ($("plan-input") as HTMLInputElement).value = templates.value;
  };

  $("btn-connect").onclick = () => {
    const select = $("session-select") as HTMLSelectElement;
    if (select.value) connect(select.value);
  };
  $("btn-refresh").onclick = () => void refreshSessions();
  $("btn-pause").onclick = () => sendCommand({ type: "pause" });
  $("btn-step").onclick = () => sendCommand({ type: "step" });
  $("btn-resume").onclick = () => {
    const rate = parseFloat(($("rate") as HTMLInputElement).value) || 2;
    sendCommand({ type: "resume", rate });
  };
  $("btn-inject").onclick = () => {
    const text = ($("plan-input") as HTMLInputElement).value;
    const error = vm.validatePlanText(text);
    if (error) {
      $("plan-error").textContent = error;
      return;
    }
    $("plan-error").textContent = "";
    const lock = parseInt(($("lock-steps") as HTMLInputElement).value) || 25;
    sendCommand({ type: "inject_plan", plan_text: text, lock_steps: lock });
  };

  void refreshSessions();
}

init();
