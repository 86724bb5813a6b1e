"""Optional chat-completion backend: lets a real model drive the same
plan/act protocol. Used for qualitative parity runs, never by the
acceptance suite."""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Optional

import httpx

from .errors import BackendError, UsageError
from .policies import Policy, StepView
from .protocol import (AgentContext, ParsedOutput, build_context,
                       count_plan_tokens, parse_agent_output, render_output)

PLANNER_IDS = tuple(f"planner_{i}" for i in range(1, 17))
PROMPT_IDS = PLANNER_IDS + ("act_instruction", "never_plan", "plan_every_k",
                            "dynamic")


@lru_cache(maxsize=None)
def load_prompt_body(prompt_id: str) -> str:
    path = resources.files("dynaplan.prompts").joinpath(f"{prompt_id}.txt")
    try:
        return path.read_text().rstrip("\n")
    except FileNotFoundError:
        raise UsageError(f"unknown prompt id {prompt_id!r}")


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    max_output_tokens: int = 200
    temperature: float = 1.0
    timeout: float = 30.0
    retries: int = 2
    api_key: Optional[str] = None
    chat_path: str = "/v1/chat/completions"

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


def render_prompt(template_id: str, context: AgentContext) -> list[dict]:
    """System + alternating user/assistant turns, the latest plan rendered
    once at its original turn, instruction appended to the final user turn."""
    instruction = load_prompt_body(template_id)
    messages = [{"role": "system", "content": context.system_prompt}]
    for i, (obs, action) in enumerate(context.history):
        messages.append({"role": "user", "content": obs})
        if context.plan_turn == i and context.current_plan is not None \
                and context.current_plan.plan_text:
            content = render_output(context.current_plan.plan_text, action)
        else:
            content = action
        messages.append({"role": "assistant", "content": content})
    messages.append({"role": "user",
                     "content": f"{context.current_observation}\n\n{instruction}"})
    return messages


def complete(endpoint: EndpointConfig, messages: list[dict],
             client: Optional[httpx.Client] = None) -> tuple[str, Optional[int]]:
    """POST a chat completion; returns (text, backend-reported output tokens).

    Retries transient failures up to the configured count, then raises
    BackendError for the caller's fallback path.
    """
    own_client = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    headers = {}
    if endpoint.api_key:
        headers["Authorization"] = f"Bearer {endpoint.api_key}"
    payload = {
        "model": endpoint.model,
        "messages": messages,
        "max_tokens": endpoint.max_output_tokens,
        "temperature": endpoint.temperature,
    }
    url = endpoint.base_url.rstrip("/") + endpoint.chat_path
    last_error: Optional[Exception] = None
    try:
        for _ in range(endpoint.retries + 1):
            try:
                resp = client.post(url, json=payload, headers=headers)
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage", {}).get("completion_tokens")
                words = text.split()
                if len(words) > endpoint.max_output_tokens:
                    text = " ".join(words[:endpoint.max_output_tokens])
                return text, usage
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
        raise BackendError(f"backend failed after {endpoint.retries + 1} "
                           f"attempts: {last_error}")
    finally:
        if own_client:
            client.close()


def llm_policy_step(mode, context: AgentContext, endpoint: EndpointConfig,
                    validator: Optional[Callable[[str], bool]] = None,
                    client: Optional[httpx.Client] = None,
                    default_action: str = "noop",
                    max_attempts: int = 3):
    """Render, complete, and parse one step under the given planning mode.

    mode: "never", ("every_k", k, t), or "dynamic". Malformed output or a
    rejected action re-prompts up to max_attempts total, then falls back to
    the default action. Returns (ParsedOutput, fallback_used, info).
    """
    if mode == "never":
        template = "never_plan"
    elif mode == "dynamic":
        template = "dynamic"
    elif isinstance(mode, tuple) and mode[0] == "every_k":
        _, k, t = mode
        template = "plan_every_k" if t % k == 0 else "act_instruction"
    else:
        raise UsageError(f"unknown mode {mode!r}")

    messages = render_prompt(template, context)
    info: dict = {"attempts": 0, "protocol_violations": 0}
    for _ in range(max_attempts):
        info["attempts"] += 1
        try:
            text, usage = complete(endpoint, messages, client=client)
        except BackendError as exc:
            info["backend_error"] = str(exc)
            break
        parsed = parse_agent_output(text)
        if parsed.failed:
            continue
        if mode == "never" and parsed.has_plan:
            # Plan blocks are stripped and logged as protocol violations.
            info["protocol_violations"] += 1
            parsed = ParsedOutput(False, None, parsed.action_text,
                                  parsed.parse_status)
        if validator is not None and not validator(parsed.action_text):
            continue
        if usage is not None:
            info["backend_tokens"] = usage
        return parsed, False, info
    fallback = ParsedOutput(False, None, default_action, "recovered")
    return fallback, True, info


class LLMPolicy(Policy):
    """Drives the episode loop through a chat endpoint.

    Keeps its own (observation, action) history; plan bookkeeping stays with
    the episode driver like every other policy.
    """

    def __init__(self, mode, endpoint: EndpointConfig, system_prompt: str,
                 max_history: int = 16,
                 client: Optional[httpx.Client] = None,
                 validator: Optional[Callable[[str], bool]] = None):
        self.mode = mode
        self.endpoint = endpoint
        self.system_prompt = system_prompt
        self.max_history = max_history
        self.client = client
        self.validator = validator
        self.history: list[tuple[str, str]] = []
        self.history_start_t = 0
        self.name = f"llm_{mode if isinstance(mode, str) else 'every_k'}"

    def output(self, view: StepView, rng: random.Random) -> tuple[str, dict]:
        mode = self.mode
        if isinstance(mode, tuple) and mode[0] == "every_k":
            mode = ("every_k", mode[1], view.t)
        if view.forced_never:
            mode = "never"
        context = build_context(self.history, view.obs.text_render,
                                view.plan_state,
                                system_prompt=self.system_prompt,
                                max_history=self.max_history,
                                history_start_t=self.history_start_t)
        default = "noop" if view.env_kind == "craftlite" else "0"
        parsed, fallback, info = llm_policy_step(
            mode, context, self.endpoint, validator=self.validator,
            client=self.client, default_action=default)
        raw = render_output(parsed.plan_text if parsed.has_plan else None,
                            parsed.action_text)
        self.history.append((view.obs.text_render, parsed.action_text))
        if len(self.history) > self.max_history:
            overflow = len(self.history) - self.max_history
            self.history = self.history[overflow:]
            self.history_start_t += overflow
        out_info = {"llm_attempts": info.get("attempts"),
                    "llm_fallback": fallback}
        if "backend_tokens" in info and parsed.has_plan:
            action_tokens = count_plan_tokens(parsed.action_text)
            out_info["plan_tokens"] = max(
                0, info["backend_tokens"] - action_tokens)
            out_info["token_source"] = "backend"
        if info.get("protocol_violations"):
            out_info["protocol_violations"] = info["protocol_violations"]
        return raw, out_info
