"""Unified agent output grammar and plan-selection state machine.

Every policy in this package, scripted or model-backed, communicates through
the same text protocol: an optional ``<plan> ... </plan>`` block followed by a
single action command. This module owns parsing that grammar, the per-step
plan bookkeeping, and chat-context assembly with history truncation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

PLAN_OPEN = "<plan>"
PLAN_CLOSE = "</plan>"

_PLAN_BLOCK_RE = re.compile(r"<plan>(.*?)</plan>", re.DOTALL)

PARSE_CLEAN = "clean"
PARSE_RECOVERED = "recovered"
PARSE_FAILED = "failed"

SOURCE_AGENT = "agent"
SOURCE_HUMAN = "human"
SOURCE_TEACHER = "teacher"

DEFAULT_MAX_HISTORY = 16

# Separator between a plan's goal tag and its comma-joined step list.
PLAN_STEPS_SEP = " via: "


@dataclass
class ParsedOutput:
    """Result of parsing one raw agent output."""

    has_plan: bool
    plan_text: Optional[str]
    action_text: Optional[str]
    parse_status: str

    @property
    def failed(self) -> bool:
        return self.parse_status == PARSE_FAILED


@dataclass
class PlanState:
    """The currently-selected plan and its provenance/age bookkeeping."""

    plan_text: Optional[str] = None
    plan_steps: list[str] = field(default_factory=list)
    source: str = SOURCE_AGENT
    created_at: int = 0
    steps_executed: int = 0
    token_length: int = 0

    @classmethod
    def empty(cls, t: int = 0) -> "PlanState":
        return cls(plan_text=None, plan_steps=[], source=SOURCE_AGENT,
                   created_at=t, steps_executed=0, token_length=0)

    @property
    def is_empty(self) -> bool:
        return self.plan_text is None

    @property
    def exhausted(self) -> bool:
        """True when a structured plan has no unexecuted steps left."""
        return bool(self.plan_steps) and self.steps_executed >= len(self.plan_steps)

    def next_step(self) -> Optional[str]:
        if self.plan_steps and self.steps_executed < len(self.plan_steps):
            return self.plan_steps[self.steps_executed]
        return None

    def remaining_fraction(self) -> float:
        if not self.plan_steps:
            return 0.0
        rem = len(self.plan_steps) - self.steps_executed
        return max(0.0, min(1.0, rem / len(self.plan_steps)))


@dataclass
class StepRecord:
    """One environment step of a trajectory, as persisted to disk."""

    t: int
    observation_text: str
    d: bool
    plan_text: Optional[str]
    plan_source: Optional[str]
    action_text: str
    reward: float
    plan_token_cost: float
    env_info: dict
    fallback_used: bool = False


@dataclass
class Trajectory:
    """A full episode: config snapshot, seed, step records, and summary."""

    config: dict
    seed: int
    steps: list[StepRecord] = field(default_factory=list)
    status: str = "timeout"  # success | timeout | death
    summary: dict = field(default_factory=dict)


@dataclass
class AgentContext:
    """Chat-shaped context: system prompt, (obs, action) history, current plan."""

    system_prompt: str
    history: list[tuple[str, str]]
    current_plan: Optional[PlanState]
    current_observation: str
    max_history: int = DEFAULT_MAX_HISTORY
    # Index into `history` of the assistant turn that owns the current plan,
    # or None when the plan (if any) predates the retained window.
    plan_turn: Optional[int] = None


def parse_agent_output(raw: str) -> ParsedOutput:
    """Parse raw agent text into an optional plan block plus an action.

    Recovery rules, applied in order:
      1. multiple well-formed plan blocks: keep the last one, mark recovered;
      2. multi-line text after the block: action = first non-empty line,
         mark recovered;
      3. a block with no trailing action at all is a failure.
    An empty plan block is treated as "no plan" and marked recovered. Any
    stray/unclosed tag, or text before the first block, is a failure; the
    returned action never contains the literal tag substrings.
    """
    text = raw.strip()
    if PLAN_OPEN not in text and PLAN_CLOSE not in text:
        if not text:
            return ParsedOutput(False, None, None, PARSE_FAILED)
        return ParsedOutput(False, None, text, PARSE_CLEAN)

    blocks = list(_PLAN_BLOCK_RE.finditer(text))
    if not blocks:
        return ParsedOutput(False, None, None, PARSE_FAILED)
    if text[: blocks[0].start()].strip():
        return ParsedOutput(False, None, None, PARSE_FAILED)

    tail = text[blocks[-1].end():]
    if PLAN_OPEN in tail or PLAN_CLOSE in tail:
        return ParsedOutput(False, None, None, PARSE_FAILED)
    lines = [ln.strip() for ln in tail.splitlines() if ln.strip()]
    if not lines:
        return ParsedOutput(False, None, None, PARSE_FAILED)

    stripped_tail = tail.strip()
    single_line = "\n" not in stripped_tail
    action = stripped_tail if single_line else lines[0]

    plan = blocks[-1].group(1).strip()
    recovered = len(blocks) > 1 or not single_line or not plan
    status = PARSE_RECOVERED if recovered else PARSE_CLEAN
    if not plan:
        return ParsedOutput(False, None, action, status)
    return ParsedOutput(True, plan, action, status)


def render_output(plan_text: Optional[str], action_text: str) -> str:
    """Inverse of parse_agent_output for well-formed (plan, action) pairs."""
    if plan_text:
        return f"{PLAN_OPEN}{plan_text}{PLAN_CLOSE} {action_text}"
    return action_text


def count_plan_tokens(plan_text: Optional[str]) -> int:
    """Whitespace-delimited token count; 0 for an absent or empty plan."""
    if not plan_text:
        return 0
    return len(plan_text.split())


def parse_plan_steps(plan_text: str) -> list[str]:
    """Extract the symbolic step list from serialized plan text.

    Scripted plans read ``"<goal tag> via: step, step, step"``. Free-text
    plans (no separator) yield an empty list.
    """
    if PLAN_STEPS_SEP not in plan_text:
        return []
    _, _, steps_part = plan_text.partition(PLAN_STEPS_SEP)
    steps = [s.strip() for s in steps_part.split(",")]
    return [s for s in steps if s]


def render_plan_text(goal_tag: str, steps: list[str]) -> str:
    return goal_tag + PLAN_STEPS_SEP + ", ".join(steps)


def update_plan_state(prev: Optional[PlanState], parsed: ParsedOutput, t: int,
                      source: str = SOURCE_AGENT) -> PlanState:
    """Apply the per-step plan selection rule.

    A new plan in `parsed` replaces the previous one (fresh state, zero steps
    executed). Otherwise the previous plan is carried over, with its progress
    counter advanced when the emitted action consumes the next plan step.
    """
    if parsed.failed:
        raise ValueError("update_plan_state requires a successfully parsed output")
    if parsed.has_plan:
        assert parsed.plan_text is not None
        return PlanState(
            plan_text=parsed.plan_text,
            plan_steps=parse_plan_steps(parsed.plan_text),
            source=source,
            created_at=t,
            steps_executed=0,
            token_length=count_plan_tokens(parsed.plan_text),
        )
    if prev is None:
        return PlanState.empty(t)
    nxt = prev.next_step()
    if nxt is not None and parsed.action_text == nxt:
        return replace(prev, steps_executed=prev.steps_executed + 1)
    return prev


def consume_plan_step(plan: PlanState, action_text: str) -> PlanState:
    """Advance a plan's progress when `action_text` is its next step.

    Used by episode runners for the step that accompanies a freshly created
    plan, whose state is defined to start at zero steps executed.
    """
    nxt = plan.next_step()
    if nxt is not None and action_text == nxt:
        return replace(plan, steps_executed=plan.steps_executed + 1)
    return plan


def build_context(history: list[tuple[str, str]], current_obs: str,
                  plan_state: Optional[PlanState], system_prompt: str = "",
                  max_history: int = DEFAULT_MAX_HISTORY,
                  history_start_t: int = 0) -> AgentContext:
    """Assemble the rendered context, dropping oldest history entries first.

    `history` holds one (observation, action) pair per past step, with the
    first retained entry corresponding to step `history_start_t`. The latest
    plan appears exactly once, attached to the assistant turn of the step it
    was created at; when that turn has been truncated away, it is attached to
    the oldest retained turn so the plan is never silently dropped.
    """
    if max_history < 1:
        raise ValueError("max_history must be >= 1")
    kept = history[-max_history:]
    dropped = len(history) - len(kept)
    start_t = history_start_t + dropped

    plan_turn: Optional[int] = None
    if plan_state is not None and not plan_state.is_empty and kept:
        idx = plan_state.created_at - start_t
        plan_turn = min(max(idx, 0), len(kept) - 1)

    return AgentContext(
        system_prompt=system_prompt,
        history=list(kept),
        current_plan=plan_state,
        current_observation=current_obs,
        max_history=max_history,
        plan_turn=plan_turn,
    )


def render_context_text(ctx: AgentContext) -> str:
    """Deterministic flat-text rendering of a context (for logs and tests)."""
    parts = []
    if ctx.system_prompt:
        parts.append(f"[system] {ctx.system_prompt}")
    for i, (obs, action) in enumerate(ctx.history):
        parts.append(f"[user] {obs}")
        if ctx.plan_turn == i and ctx.current_plan is not None \
                and ctx.current_plan.plan_text:
            parts.append(f"[assistant] {render_output(ctx.current_plan.plan_text, action)}")
        else:
            parts.append(f"[assistant] {action}")
    parts.append(f"[user] {ctx.current_observation}")
    return "\n".join(parts)
