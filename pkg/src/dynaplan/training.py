"""Teacher-data generation, behavior-cloning priming, and policy-gradient
training of the decision policy against the token-penalized objective."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .decision import (DecisionParams, PrimingConfig, bc_prime,
                       episode_return, grad_log_prob)
from .episode import EpisodeDriver
from .planners import NoiseParams
from .policies import DynamicPolicy, FixedFrequencyPolicy, NeverPlanPolicy, \
    Policy, ScriptedPlanner
from .protocol import Trajectory


def derive_seed(*parts) -> int:
    """Stable cross-platform child seed."""
    import zlib
    return zlib.adler32(":".join(str(p) for p in parts).encode())


@dataclass
class TeacherConfig:
    n_trajectories: int = 1024
    k_min: int = 2
    k_max: int = 12
    n_prompt_styles: int = 16  # recorded metadata, mirrors the prompt library


@dataclass
class RLConfig:
    k_tokens: float = 0.0
    gamma: float = 1.0
    batch_episodes: int = 16
    learning_rate: float = 0.4
    baseline_window: int = 32
    max_iterations: int = 40
    algo: str = "reinforce"  # reinforce | ppo
    ppo_clip: float = 0.2
    gae_lambda: float = 0.95
    ppo_epochs: int = 4
    noise: Optional[NoiseParams] = None

    def validate(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.k_tokens < 0:
            raise ValueError("k_tokens must be >= 0")
        if self.algo not in ("reinforce", "ppo"):
            raise ValueError(f"unknown algo {self.algo!r}")


@dataclass
class RLResult:
    params: DecisionParams
    curve: list[dict] = field(default_factory=list)
    halted: bool = False


def generate_teacher_data(env_factory: Callable[[int], object],
                          teacher_cfg: TeacherConfig,
                          seed: int) -> list[Trajectory]:
    """Roll fixed-frequency scripted-planner episodes with K ~ U{k_min..k_max}
    drawn once per trajectory; decisions are recorded as priming labels."""
    rng = random.Random(f"teacher:{seed}")
    out = []
    for i in range(teacher_cfg.n_trajectories):
        k = rng.randint(teacher_cfg.k_min, teacher_cfg.k_max)
        style = rng.randint(1, teacher_cfg.n_prompt_styles)
        env_seed = derive_seed(seed, "teacher", i)
        env = env_factory(env_seed)
        policy = FixedFrequencyPolicy(k)
        driver = EpisodeDriver(env, policy, seed=env_seed,
                               plan_source="teacher",
                               config_extra={"teacher_k": k,
                                             "prompt_style": style})
        out.append(driver.run())
    return out


def _penalized_returns_to_go(traj: Trajectory, k_tokens: float,
                             gamma: float) -> list[float]:
    rewards = [rec.reward - (k_tokens * rec.env_info.get("plan_tokens", 0)
                             if rec.d else 0.0)
               for rec in traj.steps]
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def _decision_steps(traj: Trajectory):
    """(features, d, old_prob, index) for steps where the policy decided."""
    for i, rec in enumerate(traj.steps):
        prob = rec.env_info.get("prob")
        feats = rec.env_info.get("features")
        if prob is None or feats is None:
            continue
        yield np.asarray(feats, dtype=float), rec.d, float(prob), i


def rollout_batch(env_factory, policy_builder, params: DecisionParams,
                  seeds: list[int], k_tokens: float,
                  gamma: float) -> list[Trajectory]:
    trajs = []
    for s in seeds:
        env = env_factory(s)
        driver = EpisodeDriver(env, policy_builder(params), seed=s,
                               k_tokens=k_tokens, gamma=gamma)
        trajs.append(driver.run())
    return trajs


def _curve_row(iteration: int, episodes: int, trajs: list[Trajectory],
               k_tokens: float, gamma: float) -> dict:
    returns = [episode_return(t, k_tokens, gamma) for t in trajs]
    plan_tokens = [rec.env_info.get("plan_tokens", 0)
                   for t in trajs for rec in t.steps if rec.d]
    return {
        "iteration": iteration,
        "episodes": episodes,
        "mean_return": float(np.mean(returns)),
        "mean_task_return": float(np.mean([t.summary["return_task"]
                                           for t in trajs])),
        "mean_score": float(np.mean([t.summary["score"] for t in trajs])),
        "f_p": float(np.mean([t.summary["f_p"] for t in trajs])),
        "mean_plan_tokens": float(np.mean(plan_tokens)) if plan_tokens else 0.0,
    }


def default_policy_builder(noise: Optional[NoiseParams] = None,
                           never_plan: bool = False):
    if never_plan:
        return lambda params: NeverPlanPolicy()
    return lambda params: DynamicPolicy(params, ScriptedPlanner(noise))


def rl_train(env_factory, params0: DecisionParams, rl_config: RLConfig,
             seed: int,
             policy_builder: Optional[Callable[[DecisionParams], Policy]] = None
             ) -> RLResult:
    """Score-function gradient ascent (REINFORCE with a moving-average
    baseline) on the token-penalized return; optional PPO-style clipped
    updates with a linear value baseline and GAE."""
    rl_config.validate()
    builder = policy_builder or default_policy_builder(rl_config.noise)
    params = params0.copy()
    baseline_hist: deque = deque(maxlen=rl_config.baseline_window)
    curve: list[dict] = []
    best = None
    bad_streak = 0
    halted = False

    for it in range(rl_config.max_iterations):
        seeds = [derive_seed(seed, "rl", it, j)
                 for j in range(rl_config.batch_episodes)]
        trajs = rollout_batch(env_factory, builder, params, seeds,
                              rl_config.k_tokens, rl_config.gamma)
        returns = [episode_return(t, rl_config.k_tokens, rl_config.gamma)
                   for t in trajs]
        # The baseline must live on the same scale as the per-step
        # returns-to-go it is subtracted from; a full-episode-return baseline
        # systematically depresses late-step advantages and destabilizes
        # training.
        all_gs = [_penalized_returns_to_go(t, rl_config.k_tokens,
                                           rl_config.gamma) for t in trajs]
        step_g_mean = float(np.mean([g for gs in all_gs for g in gs])) \
            if any(all_gs) else 0.0
        baseline = float(np.mean(baseline_hist)) if baseline_hist \
            else step_g_mean

        if rl_config.algo == "reinforce":
            grad = np.zeros_like(params.weights)
            for traj, gs in zip(trajs, all_gs):
                for feats, d, _, i in _decision_steps(traj):
                    grad += grad_log_prob(params, feats, d) * (gs[i] - baseline)
            grad /= len(trajs)
            params = DecisionParams(params.weights
                                    + rl_config.learning_rate * grad)
        else:
            params = _ppo_update(params, trajs, rl_config)

        baseline_hist.append(step_g_mean)
        row = _curve_row(it, (it + 1) * rl_config.batch_episodes, trajs,
                         rl_config.k_tokens, rl_config.gamma)
        curve.append(row)

        mean_ret = row["mean_return"]
        if best is None or mean_ret > best:
            best = mean_ret
            bad_streak = 0
        elif best > 0 and mean_ret < 0.5 * best:
            bad_streak += 1
            if bad_streak >= 10:
                halted = True
                break
        else:
            bad_streak = 0

    return RLResult(params=params, curve=curve, halted=halted)


def _ppo_update(params: DecisionParams, trajs: list[Trajectory],
                cfg: RLConfig) -> DecisionParams:
    """Clipped-surrogate update with a linear value baseline fit across the
    whole batch (a per-trajectory fit would interpolate the returns and zero
    every advantage) and GAE along each trajectory."""
    per_traj = []
    pooled_x, pooled_g = [], []
    for traj in trajs:
        rewards = [rec.reward - (cfg.k_tokens * rec.env_info.get("plan_tokens", 0)
                                 if rec.d else 0.0)
                   for rec in traj.steps]
        steps = list(_decision_steps(traj))
        if not steps:
            continue
        gs = _penalized_returns_to_go(traj, cfg.k_tokens, cfg.gamma)
        x = np.array([s[0] for s in steps])
        g = np.array([gs[s[3]] for s in steps])
        per_traj.append((steps, rewards, x))
        pooled_x.append(x)
        pooled_g.append(g)
    if not per_traj:
        return params
    w, *_ = np.linalg.lstsq(np.vstack(pooled_x), np.concatenate(pooled_g),
                            rcond=None)

    feats, ds, old_probs, advs = [], [], [], []
    for steps, rewards, x in per_traj:
        values = x @ w
        n = len(steps)
        deltas = np.empty(n)
        for j, (_, _, _, i) in enumerate(steps):
            v_next = values[j + 1] if j + 1 < n else 0.0
            deltas[j] = rewards[i] + cfg.gamma * v_next - values[j]
        adv = np.empty(n)
        acc = 0.0
        for j in range(n - 1, -1, -1):
            acc = deltas[j] + cfg.gamma * cfg.gae_lambda * acc
            adv[j] = acc
        for (f, d, p, _), a in zip(steps, adv):
            feats.append(f)
            ds.append(1.0 if d else 0.0)
            old_probs.append(p)
            advs.append(a)
    x = np.array(feats)
    y = np.array(ds)
    p_old = np.array(old_probs)
    p_old_d = np.where(y > 0.5, p_old, 1.0 - p_old)
    a = np.array(advs)
    if a.std() > 1e-9:
        a = (a - a.mean()) / a.std()

    theta = params.weights.copy()
    for _ in range(cfg.ppo_epochs):
        z = np.clip(x @ theta, -35, 35)
        p = 1.0 / (1.0 + np.exp(-z))
        p_d = np.where(y > 0.5, p, 1.0 - p)
        ratio = p_d / np.maximum(p_old_d, 1e-12)
        clipped = (ratio > 1.0 + cfg.ppo_clip) & (a > 0) \
            | (ratio < 1.0 - cfg.ppo_clip) & (a < 0)
        active = ~clipped
        # d/dtheta ratio = ratio * (d - p) * x  for the chosen decision
        grad = ((active * ratio * a * (y - p))[:, None] * x).mean(axis=0)
        theta = theta + cfg.learning_rate * grad
    return DecisionParams(theta)


ARMS = ("primed_dynamic", "base_dynamic", "primed_never", "base_never")


@dataclass
class MatrixConfig:
    env_kind: str = "craftlite"
    env: dict = field(default_factory=dict)
    teacher: TeacherConfig = field(default_factory=lambda: TeacherConfig(64))
    priming: PrimingConfig = field(default_factory=PrimingConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    seed: int = 0
    score_threshold: float = 0.5


@dataclass
class MatrixResult:
    arms: dict[str, RLResult]
    primed_params: DecisionParams
    teacher_size: int

    def episodes_to_threshold(self, arm: str, threshold: float) -> Optional[int]:
        for row in self.arms[arm].curve:
            if row["mean_score"] >= threshold:
                return row["episodes"]
        return None


def run_experiment_matrix(config: MatrixConfig) -> MatrixResult:
    """The 2x2 {primed, base} x {dynamic, never-plan} comparison with shared
    environment seeds across arms per iteration."""
    from .envs import make_env

    def env_factory(s):
        return make_env(config.env_kind, config.env, s)

    teacher = generate_teacher_data(env_factory, config.teacher,
                                    derive_seed(config.seed, "teacher"))
    primed = bc_prime(teacher, config.priming).params
    base = DecisionParams.zeros()

    arms: dict[str, RLResult] = {}
    for arm in ARMS:
        params0 = primed.copy() if arm.startswith("primed") else base.copy()
        builder = default_policy_builder(config.rl.noise,
                                         never_plan=arm.endswith("never"))
        arms[arm] = rl_train(env_factory, params0, config.rl,
                             seed=config.seed, policy_builder=builder)
    return MatrixResult(arms=arms, primed_params=primed,
                        teacher_size=len(teacher))
