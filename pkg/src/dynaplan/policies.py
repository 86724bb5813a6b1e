"""Policy objects: they turn a per-step view of the episode into raw output
text in the shared plan/action grammar."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import planners
from .decision import DecisionParams, decide
from .planners import (NoiseParams, Plan, PogsMemory,
                       craft_plan_options, craft_reactive, follow_plan,
                       pogs_plan_options, pogs_reactive)
from .protocol import PlanState, render_output


@dataclass
class StepView:
    """Everything a policy may condition on at one step."""

    t: int
    obs: object
    plan_state: Optional[PlanState]
    memory: object
    features: Optional[np.ndarray]
    env_kind: str
    target: Optional[int] = None
    forced_never: bool = False  # human steering lock suppresses planning


class ScriptedPlanner:
    """Env-dispatching wrapper around the scripted planning functions.

    `options` exposes the full plan distribution of one planning event so
    that exhaustive estimators can enumerate it; `plan` samples from it. The
    previous plan's goal (parsed from its serialized text) is the incumbent
    the planner conditions on.
    """

    def __init__(self, noise: Optional[NoiseParams] = None):
        self.noise = noise or NoiseParams()

    def options(self, view: StepView) -> list[tuple[float, Plan]]:
        prev = None
        if view.plan_state is not None:
            prev = planners.incumbent_goal(view.plan_state.plan_text)
        if view.env_kind == "pogs":
            assert view.target is not None
            return pogs_plan_options(view.memory, view.target, self.noise,
                                     prev_goal=prev if isinstance(prev, int) else None)
        return craft_plan_options(view.memory, view.obs, self.noise,
                                  prev_goal=prev if isinstance(prev, tuple) else None)

    def plan(self, view: StepView, rng: random.Random) -> Plan:
        return planners._sample_options(self.options(view), rng)


def reactive_action(view: StepView, rng: random.Random) -> str:
    if view.env_kind == "pogs":
        visited = view.memory.visited if isinstance(view.memory, PogsMemory) else set()
        return pogs_reactive(view.obs, visited, rng)
    return craft_reactive(view.obs, rng)


class Policy:
    name = "policy"

    def output(self, view: StepView, rng: random.Random) -> tuple[str, dict]:
        raise NotImplementedError


class FixedFrequencyPolicy(Policy):
    """Plan exactly when t is a multiple of k; never plan when k is None."""

    def __init__(self, k: Optional[int], planner: Optional[ScriptedPlanner] = None):
        if k is not None and k < 1:
            raise ValueError("k must be >= 1 (or None for never-plan)")
        self.k = k
        self.planner = planner or ScriptedPlanner()
        self.name = "never" if k is None else f"every_{k}"

    def output(self, view: StepView, rng: random.Random) -> tuple[str, dict]:
        plan_now = self.k is not None and view.t % self.k == 0 \
            and not view.forced_never
        if plan_now:
            plan = self.planner.plan(view, rng)
            action = plan.steps[0] if planners.step_applicable(
                plan.steps[0], view.obs) else reactive_action(view, rng)
            return render_output(plan.text, action), {}
        action = follow_plan(view.plan_state, view.obs)
        if action is None:
            action = reactive_action(view, rng)
        return action, {}


class DynamicPolicy(Policy):
    """Learned decision policy over scripted planning and acting."""

    def __init__(self, params: DecisionParams,
                 planner: Optional[ScriptedPlanner] = None,
                 greedy: bool = False):
        self.params = params
        self.planner = planner or ScriptedPlanner()
        self.greedy = greedy
        self.name = "dynamic"

    def output(self, view: StepView, rng: random.Random) -> tuple[str, dict]:
        assert view.features is not None
        d, prob = decide(self.params, view.features, rng, greedy=self.greedy)
        if view.forced_never:
            d = False
        if d:
            plan = self.planner.plan(view, rng)
            action = plan.steps[0] if planners.step_applicable(
                plan.steps[0], view.obs) else reactive_action(view, rng)
            return render_output(plan.text, action), {"prob": prob}
        action = follow_plan(view.plan_state, view.obs)
        if action is None:
            action = reactive_action(view, rng)
        return action, {"prob": prob}


class NeverPlanPolicy(FixedFrequencyPolicy):
    def __init__(self):
        super().__init__(None)


class PlanWhenInvalidPolicy(Policy):
    """Deterministic continuation policy: replan exactly when the current
    plan is absent, exhausted, or inapplicable. Used by rollout estimators."""

    def __init__(self, planner: Optional[ScriptedPlanner] = None):
        self.planner = planner or ScriptedPlanner()
        self.name = "plan_when_invalid"

    def output(self, view: StepView, rng: random.Random) -> tuple[str, dict]:
        action = follow_plan(view.plan_state, view.obs)
        if action is not None or view.forced_never:
            if action is None:
                action = reactive_action(view, rng)
            return action, {}
        plan = self.planner.plan(view, rng)
        first = plan.steps[0] if planners.step_applicable(
            plan.steps[0], view.obs) else reactive_action(view, rng)
        return render_output(plan.text, first), {}


def fixed_frequency_policy(k: Optional[int],
                           noise: Optional[NoiseParams] = None) -> Policy:
    """k >= 1 plans every k steps; None yields the never-plan policy."""
    return FixedFrequencyPolicy(k, ScriptedPlanner(noise))
