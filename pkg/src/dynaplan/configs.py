"""Run configuration: YAML/JSON config tree, policy specs, built-in demos."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import decision
from .craftlite import CraftConfig
from .envs import make_env
from .errors import ConfigError
from .planners import NoiseParams
from .pogs import PogsConfig
from .policies import DynamicPolicy, Policy, ScriptedPlanner, \
    fixed_frequency_policy
from .training import MatrixConfig, RLConfig, TeacherConfig

# Default sweep environment: the horizon is deliberately tight so that both
# churn (always-plan) and staleness (rarely-plan) actually cost successes.
DEFAULT_SWEEP_POGS = dict(num_nodes=30, k_nearest=2,
                          min_start_target_distance=12,
                          extra_edge_fraction=0.0, max_steps=38)
DEFAULT_SWEEP_KS: list[Optional[int]] = [1, 2, 4, 8, 16, None]

# Exploration-heavy world for the priming/RL experiment matrix.
MATRIX_CRAFT_ENV = dict(width=20, height=20, n_trees=2, n_stones=4,
                        n_iron=1, n_water=2, max_steps=230)


@dataclass
class EpisodeConfig:
    env_kind: str = "pogs"
    env: dict = field(default_factory=dict)
    policy: dict = field(default_factory=lambda: {"family": "fixed", "k": 4})
    seed: int = 0
    k_tokens: float = 0.0
    gamma: float = 1.0
    record_path: Optional[str] = None
    force: bool = False

    def validate(self) -> None:
        if self.env_kind not in ("pogs", "craftlite"):
            raise ConfigError(f"unknown env kind {self.env_kind!r}")
        family = self.policy.get("family")
        if family not in ("fixed", "never", "dynamic", "llm"):
            raise ConfigError(f"unknown policy family {family!r}")
        if family == "fixed" and int(self.policy.get("k", 0)) < 1:
            raise ConfigError("fixed policy requires k >= 1")
        params_path = self.policy.get("params_path")
        if params_path and not os.path.exists(params_path):
            raise ConfigError(f"params file not found: {params_path}")
        try:
            env_config_cls(self.env_kind)(**self.env).validate()
        except TypeError as exc:
            raise ConfigError(f"bad env config: {exc}")
        except ValueError as exc:
            raise ConfigError(f"bad env config: {exc}")


def env_config_cls(kind: str):
    return PogsConfig if kind == "pogs" else CraftConfig


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def episode_config_from(data: dict) -> EpisodeConfig:
    env = dict(data.get("env", {}))
    kind = env.pop("kind", data.get("env_kind", "pogs"))
    cfg = EpisodeConfig(
        env_kind=kind,
        env=env,
        policy=dict(data.get("policy", {"family": "fixed", "k": 4})),
        seed=int(data.get("seed", 0)),
        k_tokens=float(data.get("k_tokens", 0.0)),
        gamma=float(data.get("gamma", 1.0)),
        record_path=(data.get("record", {}) or {}).get("path"),
        force=bool((data.get("record", {}) or {}).get("force", False)),
    )
    cfg.validate()
    return cfg


def build_policy(spec: dict, env) -> Policy:
    family = spec.get("family", "fixed")
    noise = None
    if "epsilon" in spec:
        noise = NoiseParams(retarget_prob=float(spec["epsilon"]))
    if family == "never":
        return fixed_frequency_policy(None, noise)
    if family == "fixed":
        return fixed_frequency_policy(int(spec.get("k", 4)), noise)
    if family == "dynamic":
        if spec.get("params_path"):
            params = decision.load_params(spec["params_path"])
        else:
            params = decision.default_params()
        return DynamicPolicy(params, ScriptedPlanner(noise),
                             greedy=bool(spec.get("greedy", False)))
    if family == "llm":
        from .llm import EndpointConfig, LLMPolicy
        ep = spec.get("endpoint") or {}
        endpoint = EndpointConfig(**ep)
        mode = spec.get("mode", "dynamic")
        if isinstance(mode, (list, tuple)):
            mode = ("every_k", int(mode[1]))
        system = _system_prompt_for(env)
        return LLMPolicy(mode, endpoint, system)
    raise ConfigError(f"unknown policy family {family!r}")


def _system_prompt_for(env) -> str:
    if env.kind == "pogs":
        from .llm import load_prompt_body
        cfg = env.config
        return load_prompt_body("pogs_system").format(
            action_list=list(range(cfg.num_nodes)),
            num_nodes=cfg.num_nodes, k_nearest=cfg.k_nearest)
    from .craftlite import CRAFT_ACTIONS
    from .llm import load_prompt_body
    return load_prompt_body("craft_system").format(
        actions=", ".join(CRAFT_ACTIONS))


def build_episode_driver(cfg: EpisodeConfig):
    from .episode import EpisodeDriver
    env = make_env(cfg.env_kind, cfg.env, cfg.seed)
    policy = build_policy(cfg.policy, env)
    return EpisodeDriver(env, policy, seed=cfg.seed, k_tokens=cfg.k_tokens,
                         gamma=cfg.gamma,
                         config_extra={"policy_spec": cfg.policy})


def rl_config_from(data: dict) -> RLConfig:
    fields = {f.name for f in dataclasses.fields(RLConfig)}
    kwargs = {k: v for k, v in (data or {}).items() if k in fields}
    if "epsilon" in (data or {}):
        kwargs["noise"] = NoiseParams(retarget_prob=float(data["epsilon"]))
    cfg = RLConfig(**kwargs)
    cfg.validate()
    return cfg


def matrix_config_from(data: dict) -> MatrixConfig:
    data = data or {}
    env = dict(data.get("env", MATRIX_CRAFT_ENV))
    kind = env.pop("kind", "craftlite")
    teacher = TeacherConfig(**data.get("teacher", {"n_trajectories": 64}))
    # PPO with its state-conditioned value baseline is the stable choice on
    # the gridworld, where plain score-function gradients misassign the
    # credit for achievements to the planning steps just before them.
    rl = rl_config_from(data.get("rl", {"algo": "ppo",
                                        "batch_episodes": 32,
                                        "max_iterations": 12,
                                        "learning_rate": 0.3}))
    return MatrixConfig(env_kind=kind, env=env, teacher=teacher, rl=rl,
                        seed=int(data.get("seed", 0)),
                        score_threshold=float(data.get("score_threshold", 0.5)))
