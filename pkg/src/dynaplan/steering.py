"""Live-session state for human steering: one episode per session, commands
applied at step boundaries, plan injection with a replanning lock."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .episode import EpisodeDriver
from .errors import UsageError
from .planners import PogsMemory

RUN_MODES = ("paused", "stepping", "running")

WIRE_VERSION = 1

COMMAND_TYPES = ("inject_plan", "pause", "resume", "step", "select_policy")

_session_ids = itertools.count(1)


@dataclass
class Session:
    driver: EpisodeDriver
    record_path: Optional[str] = None
    session_id: str = field(default_factory=lambda: f"s{next(_session_ids)}")
    mode: str = "paused"
    rate: float = 2.0
    seq: int = 0
    ended: bool = False
    saved_path: Optional[str] = None

    def snapshot_message(self) -> dict:
        self.seq += 1
        return build_state_update(self, self.seq)

    def step_message(self) -> dict:
        """Advance one environment step and build the resulting update."""
        if self.driver.env.done:
            raise UsageError("episode already finished")
        self.driver.step_once()
        self.seq += 1
        return build_state_update(self, self.seq)

    def end_message(self) -> dict:
        traj = self.driver.result()
        if self.record_path and self.saved_path is None:
            from .recording import write_trajectory
            self.saved_path = write_trajectory(traj, self.record_path,
                                               force=True)
        self.ended = True
        return {
            "type": "episode_end",
            "version": WIRE_VERSION,
            "session_id": self.session_id,
            "status": traj.status,
            "summary": traj.summary,
            "trajectory_path": self.saved_path,
        }


def inject_plan(session: Session, plan_text: str, lock_steps: int = 25) -> dict:
    """Queue a human plan for the next step boundary; replaces any pending
    injection (single-slot). Returns the acknowledgment message."""
    if session.driver.env.done or session.ended:
        return {"type": "plan_ack", "ok": False, "detail": "episode_end"}
    if not plan_text or not plan_text.strip():
        return {"type": "plan_ack", "ok": False, "detail": "empty plan"}
    if lock_steps < 1:
        return {"type": "plan_ack", "ok": False,
                "detail": "lock_steps must be >= 1"}
    session.driver.inject_plan(plan_text.strip(), lock_steps)
    return {"type": "plan_ack", "ok": True,
            "detail": f"pending, lock_steps={lock_steps}"}


def handle_command(session: Session, command: dict) -> dict:
    """Apply one wire command; every command yields exactly one reply."""
    ctype = command.get("type")
    if ctype == "inject_plan":
        return inject_plan(session, command.get("plan_text", ""),
                           int(command.get("lock_steps", 25)))
    if ctype == "pause":
        session.mode = "paused"
        return {"type": "ack", "command": "pause", "ok": True}
    if ctype == "resume":
        rate = float(command.get("rate", session.rate))
        if rate <= 0:
            return {"type": "ack", "command": "resume", "ok": False,
                    "detail": "rate must be positive"}
        session.rate = rate
        session.mode = "running"
        return {"type": "ack", "command": "resume", "ok": True, "rate": rate}
    if ctype == "step":
        if session.driver.env.done:
            return {"type": "ack", "command": "step", "ok": False,
                    "detail": "episode_end"}
        session.mode = "stepping"
        return {"type": "ack", "command": "step", "ok": True}
    if ctype == "select_policy":
        try:
            from .configs import build_policy
            session.driver.policy = build_policy(command.get("spec", {}),
                                                 session.driver.env)
        except Exception as exc:
            return {"type": "ack", "command": "select_policy", "ok": False,
                    "detail": str(exc)}
        return {"type": "ack", "command": "select_policy", "ok": True}
    return {"type": "ack", "command": str(ctype), "ok": False,
            "detail": "unknown command"}


def _pogs_payload(driver: EpisodeDriver, obs) -> dict:
    # Merge the pending observation into a display copy; the agent's own
    # memory is only mutated by the step loop.
    memory: PogsMemory = driver.memory
    adjacency = {k: set(v) for k, v in memory.adjacency.items()}
    for node, nbrs in obs.visible_adjacency.items():
        adjacency[node] = set(nbrs)
    fringe = {n for nbrs in adjacency.values() for n in nbrs} - set(adjacency)
    instance = driver.env.instance
    known_edges = sorted({(min(a, b), max(a, b))
                          for a, nbrs in adjacency.items() for b in nbrs})
    nodes = []
    for n in range(instance.config.num_nodes):
        if n == instance.current_node:
            state = "current"
        elif n in adjacency:
            state = "visible"
        elif n in fringe:
            state = "fringe"
        else:
            state = "unknown"
        nodes.append({"id": n, "state": state})
    return {
        "kind": "pogs",
        "nodes": nodes,
        "edges": [list(e) for e in known_edges],
        "current": instance.current_node,
        "target": instance.target_node,
        "visited": sorted(memory.visited | {instance.current_node}),
    }


def _craft_payload(driver: EpisodeDriver, obs) -> dict:
    world = driver.env.world
    tiles = dict(driver.memory.tiles)
    tiles.update(obs.view)
    known = [[x, y, t] for (x, y), t in sorted(tiles.items())]
    return {
        "kind": "craftlite",
        "width": world.config.width,
        "height": world.config.height,
        "known_tiles": known,
        "agent": list(world.agent_pos),
        "facing": world.facing,
        "zombie": list(obs.zombie) if obs.zombie else None,
        "inventory": {k: v for k, v in sorted(world.inventory.items()) if v},
        "health": world.health,
        "hunger": world.hunger,
        "unlocked": sorted(world.unlocked),
    }


def build_state_update(session: Session, seq: int) -> dict:
    driver = session.driver
    obs = driver.env.observe()
    payload = _pogs_payload(driver, obs) if driver.env.kind == "pogs" \
        else _craft_payload(driver, obs)
    plan = driver.plan_state
    lock = driver.lock.remaining if driver.lock_active() else 0
    records = driver.records
    metrics = {
        "t": driver.t,
        "score": driver.env.score(),
        "return_task": sum(r.reward for r in records),
        "f_p": (sum(1 for r in records if r.d) / len(records)) if records else 0.0,
        "plan_tokens": sum(r.env_info.get("plan_tokens", 0) for r in records),
        "backtracks": _backtracks(driver),
    }
    return {
        "type": "state_update",
        "version": WIRE_VERSION,
        "session_id": session.session_id,
        "seq": seq,
        "t": driver.t,
        "mode": session.mode,
        "rate": session.rate,
        "done": driver.env.done,
        "observation": obs.text_render,
        "payload": payload,
        "plan": {
            "text": plan.plan_text,
            "source": plan.source if not plan.is_empty else None,
            "steps_executed": plan.steps_executed,
            "lock_remaining": lock,
        },
        "metrics": metrics,
    }


def _backtracks(driver: EpisodeDriver) -> int:
    if driver.env.kind != "pogs":
        return 0
    from .pogs import backtrack_count
    return backtrack_count(driver.env.instance.visit_sequence)


def chain_director(driver: EpisodeDriver):
    """Scripted stand-in for a human operator guiding the achievement chain.

    Issues one steering command per free boundary, pre-compiled against the
    agent's current memory; yields to the agent's own policy under survival
    pressure so it can eat. Deterministic given the episode.
    """
    from . import craftlite as cl
    from .planners import compile_human_plan

    world = driver.env.world
    if world.hunger <= 3 or world.health <= 4:
        return None  # let the agent's own survival rule fire
    next_ach = next((a for a in cl.ACHIEVEMENT_CHAIN
                     if a not in world.unlocked), None)
    if next_ach is None:
        return None
    command = {
        "collect_wood": "collect wood",
        "place_table": "craft wood_pickaxe",
        "craft_wood_pickaxe": "craft wood_pickaxe",
        "collect_stone": "craft stone_pickaxe",
        "craft_stone_pickaxe": "craft stone_pickaxe",
        "collect_iron": "collect iron",
        "place_furnace": "craft iron_pickaxe",
        "craft_iron_pickaxe": "craft iron_pickaxe",
        "collect_diamond": "collect diamond",
    }[next_ach]
    obs = driver.env.observe()
    memory_view = driver.memory
    for candidate in (command, "explore"):
        try:
            compile_human_plan(candidate, memory_view, obs, driver.env.kind)
        except ValueError:
            continue
        return candidate, 40
    return None


def run_steered_episode(driver: EpisodeDriver,
                        director: Callable[[EpisodeDriver], Optional[tuple]],
                        ) -> "object":
    """Run an episode with a scripted steering director.

    Before each step (when no lock is active and no injection pending) the
    director may return (command_text, lock_steps) to inject. Used by
    fixtures and best-of-N steering runs; the live service goes through
    Session instead.
    """
    while not driver.env.done:
        if not driver.lock_active() and driver.pending_human is None:
            request = director(driver)
            if request is not None:
                text, lock = request
                driver.inject_plan(text, lock)
        driver.step_once()
    return driver.result()
