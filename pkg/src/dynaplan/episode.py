"""The episode loop shared by every policy and both environments.

Each step: observe, update memory, (maybe) apply a pending human plan, let
the policy emit raw text in the plan/action grammar, parse it, run the plan
selection rule, execute the action, and record everything. Human-injected
plans open a lock window that suppresses the agent's own replanning until
the window expires or the plan stops being applicable.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass
from typing import Optional

from .decision import compute_features
from .errors import UsageError
from .planners import compile_human_plan, follow_plan, plan_validity
from .policies import Policy, StepView
from .protocol import (PlanState, SOURCE_HUMAN, StepRecord, Trajectory,
                       consume_plan_step, count_plan_tokens,
                       parse_agent_output, update_plan_state)


@dataclass
class _Lock:
    injected_at: int
    lock_steps: int
    remaining: int
    matched: int = 0
    total: int = 0


@dataclass
class InjectionLog:
    t: int
    plan_text: str
    lock_steps: int
    executed_steps: int = 0
    adherence: float = 1.0


class EpisodeDriver:
    """Single-owner, incremental runner for one episode."""

    def __init__(self, env, policy: Policy, seed: int, k_tokens: float = 0.0,
                 gamma: float = 1.0, plan_source: str = "agent",
                 config_extra: Optional[dict] = None):
        self.env = env
        self.policy = policy
        self.seed = seed
        self.k_tokens = k_tokens
        self.gamma = gamma
        self.plan_source = plan_source
        self.rng = random.Random(f"episode:{seed}")
        self.memory = env.fresh_memory()
        self.plan_state: PlanState = PlanState.empty(0)
        self.t = 0
        self.records: list[StepRecord] = []
        self.known_at_plan = 0
        self.last_reward_t = 0
        self.lock: Optional[_Lock] = None
        self.injections: list[InjectionLog] = []
        self.pending_human: Optional[tuple[str, int]] = None
        self.config_extra = config_extra or {}

    # -- steering interface -------------------------------------------------

    def inject_plan(self, plan_text: str, lock_steps: int) -> None:
        """Queue a human plan; it replaces the current plan (and any earlier
        pending injection) at the next step boundary."""
        if self.env.done:
            raise UsageError("episode already finished")
        self.pending_human = (plan_text, lock_steps)

    def lock_active(self) -> bool:
        return self.lock is not None and self.lock.remaining > 0

    def _finish_lock(self) -> None:
        if self.lock is None:
            return
        log = self.injections[-1]
        log.executed_steps = self.lock.total
        log.adherence = (self.lock.matched / self.lock.total) \
            if self.lock.total else 1.0
        self.lock = None

    # -- stepping -----------------------------------------------------------

    def step_once(self) -> StepRecord:
        if self.env.done:
            raise UsageError("episode already finished")
        t = self.t
        obs = self.env.observe()
        self.memory.update(obs)

        injected = False
        injection_error: Optional[str] = None
        if self.pending_human is not None:
            text, lock_steps = self.pending_human
            self.pending_human = None
            try:
                plan = compile_human_plan(text, self.memory, obs,
                                          self.env.kind,
                                          target=getattr(self.env, "target", None))
            except ValueError as exc:
                injection_error = str(exc)
            else:
                self._finish_lock()
                self.plan_state = PlanState(
                    plan_text=plan.text,
                    plan_steps=list(plan.steps),
                    source=SOURCE_HUMAN,
                    created_at=t,
                    steps_executed=0,
                    token_length=count_plan_tokens(plan.text),
                )
                self.known_at_plan = self.memory.known_count()
                self.lock = _Lock(t, lock_steps, remaining=lock_steps)
                self.injections.append(InjectionLog(t, plan.text, lock_steps))
                injected = True

        # A lock holds only while the human plan stays applicable.
        if self.lock is not None and self.lock.remaining > 0:
            if not (self.plan_state.source == SOURCE_HUMAN
                    and plan_validity(self.plan_state, obs)):
                self._finish_lock()
        elif self.lock is not None:
            self._finish_lock()
        locked = self.lock is not None and self.lock.remaining > 0

        valid = plan_validity(self.plan_state, obs)
        features = compute_features(
            t, self.plan_state, valid,
            novelty=self.memory.known_count() > self.known_at_plan,
            steps_since_reward=t - self.last_reward_t,
            survival_pressure=self.env.survival_pressure(obs),
        )
        view = StepView(t=t, obs=obs, plan_state=self.plan_state,
                        memory=self.memory, features=features,
                        env_kind=self.env.kind,
                        target=getattr(self.env, "target", None),
                        forced_never=locked)

        policy_info: dict = {}
        if locked:
            raw = follow_plan(self.plan_state, obs)
            assert raw is not None
        else:
            raw, policy_info = self.policy.output(view, self.rng)

        parsed = parse_agent_output(raw)
        fallback = False
        if parsed.failed:
            fallback = True
            action_text = self.env.default_action(self.rng)
            d = False
        else:
            action_text = parsed.action_text
            d = parsed.has_plan
            self.plan_state = update_plan_state(self.plan_state, parsed, t,
                                                source=self.plan_source)
            if parsed.has_plan:
                self.known_at_plan = self.memory.known_count()
                self.plan_state = consume_plan_step(self.plan_state, action_text)

        obs_after, reward, done, info = self.env.step(action_text)

        plan_set = d or injected
        plan_tokens = self.plan_state.token_length if plan_set else 0
        if plan_set and "plan_tokens" in policy_info:
            plan_tokens = policy_info["plan_tokens"]  # backend-reported count
        env_info = dict(info)
        if self.env.kind == "pogs":
            env_info["node_before"] = obs.current_node
        env_info.update(
            features=[float(x) for x in features],
            plan_tokens=plan_tokens,
            output_tokens=plan_tokens + count_plan_tokens(action_text),
            locked=locked,
        )
        if injection_error:
            env_info["injection_error"] = injection_error
        env_info.update(policy_info)

        record = StepRecord(
            t=t,
            observation_text=obs.text_render,
            d=d,
            plan_text=self.plan_state.plan_text if plan_set else None,
            plan_source=self.plan_state.source if plan_set else None,
            action_text=action_text,
            reward=reward,
            plan_token_cost=self.k_tokens * plan_tokens,
            env_info=env_info,
            fallback_used=fallback,
        )
        self.records.append(record)

        if locked and self.lock is not None:
            self.lock.total += 1
            expected = self.plan_state.plan_steps[self.plan_state.steps_executed - 1] \
                if self.plan_state.steps_executed > 0 else None
            if expected == action_text:
                self.lock.matched += 1
            self.lock.remaining -= 1
            if self.lock.remaining <= 0:
                self._finish_lock()

        if reward > 0:
            self.last_reward_t = t
        self.t += 1
        return record

    def run(self) -> Trajectory:
        while not self.env.done:
            self.step_once()
        return self.result()

    def result(self) -> Trajectory:
        summary = summarize_records(self.records, self.env.kind,
                                    self.env.status, self.k_tokens, self.gamma)
        summary["injections"] = [vars(i) for i in self.injections]
        config = {
            "env_kind": self.env.kind,
            "env": self.env.config_dict(),
            "policy": self.policy.name,
            "k_tokens": self.k_tokens,
            "gamma": self.gamma,
            "plan_source": self.plan_source,
            **self.config_extra,
        }
        return Trajectory(config=config, seed=self.seed, steps=self.records,
                          status=self.env.status, summary=summary)

    def snapshot(self) -> "EpisodeDriver":
        """Deep copy for what-if rollouts; the original keeps ownership."""
        return copy.deepcopy(self)


def visit_sequence_from_records(records: list[StepRecord]) -> list[int]:
    seq: list[int] = []
    for rec in records:
        if not seq:
            seq.append(rec.env_info["node_before"])
        node = rec.env_info.get("node")
        if node is not None and node != seq[-1]:
            seq.append(node)
    return seq


def summarize_records(records: list[StepRecord], env_kind: str, status: str,
                      k_tokens: float, gamma: float) -> dict:
    """Pure function of the step records; the stored summary must equal a
    recomputation from disk exactly."""
    n = len(records)
    return_task = sum(r.reward for r in records)
    return_pen = sum((gamma ** r.t) * (r.reward - (r.plan_token_cost if r.d else 0.0))
                     for r in records)
    plan_events = sum(1 for r in records if r.d)
    summary = {
        "steps": n,
        "status": status,
        "return_task": return_task,
        "return_penalized": return_pen,
        "plan_events": plan_events,
        "f_p": (plan_events / n) if n else 0.0,
        "total_plan_tokens": sum(r.env_info.get("plan_tokens", 0) for r in records),
        "total_output_tokens": sum(r.env_info.get("output_tokens", 0) for r in records),
        "fallbacks": sum(1 for r in records if r.fallback_used),
    }
    if env_kind == "pogs":
        from .pogs import backtrack_count
        summary["backtracks"] = backtrack_count(visit_sequence_from_records(records))
        summary["score"] = 1.0 if status == "success" else 0.0
    else:
        summary["score"] = records[-1].env_info.get("score", 0.0) if records else 0.0
        summary["achievements"] = records[-1].env_info.get("achievements", 0) \
            if records else 0
    return summary
