"""Teacher data, REINFORCE training, and the experiment matrix."""

import dataclasses
import random
from collections import Counter

import numpy as np
import pytest

from dynaplan.craftlite import CraftConfig
from dynaplan.decision import DecisionParams, compute_features
from dynaplan.envs import make_env
from dynaplan.policies import Policy
from dynaplan.pogs import PogsConfig
from dynaplan.protocol import render_output
from dynaplan.training import (MatrixConfig, RLConfig, TeacherConfig,
                               derive_seed, generate_teacher_data, rl_train,
                               run_experiment_matrix)


def craft_factory(**kwargs):
    cfg = dataclasses.asdict(CraftConfig(**kwargs))
    return lambda s: make_env("craftlite", cfg, s)


class TestTeacherData:
    def test_counts_and_k_recorded(self):
        factory = craft_factory(width=10, height=10, max_steps=60)
        trajs = generate_teacher_data(factory, TeacherConfig(12), seed=5)
        assert len(trajs) == 12
        for t in trajs:
            assert 2 <= t.config["teacher_k"] <= 12
            assert 1 <= t.config["prompt_style"] <= 16

    def test_labels_follow_schedule(self):
        factory = craft_factory(width=10, height=10, max_steps=60)
        trajs = generate_teacher_data(factory, TeacherConfig(6), seed=9)
        for traj in trajs:
            k = traj.config["teacher_k"]
            for rec in traj.steps:
                assert rec.d == (rec.t % k == 0)
            planned = [r for r in traj.steps if r.d]
            assert all(r.plan_source == "teacher" for r in planned)

    def test_k_histogram_uniform(self):
        """Chi-square against the uniform K distribution; oracle is direct
        counting of the same generator draws."""
        rng = random.Random("teacher:77")
        ks = [rng.randint(2, 12) for _ in range(10_000)]
        counts = Counter(ks)
        assert set(counts) == set(range(2, 13))
        expected = 10_000 / 11
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2 < 29.6  # p=0.001 at 10 dof

    def test_determinism(self):
        factory = craft_factory(width=10, height=10, max_steps=40)
        a = generate_teacher_data(factory, TeacherConfig(4), seed=2)
        b = generate_teacher_data(factory, TeacherConfig(4), seed=2)
        assert [t.summary for t in a] == [t.summary for t in b]


class BanditEnv:
    """Two-step fixture: a plan emitted at t=0 pays +1, planning later or
    never pays nothing. Used to check that training finds the obvious
    optimum (oracle: exhaustive evaluation of the pure policies)."""

    kind = "bandit"

    def __init__(self, seed):
        self.t = 0
        self.done = False
        self.status = "running"
        self.planned_at_0 = False

    class Obs:
        text_render = "bandit"

    def observe(self):
        return self.Obs()

    def step(self, action_text):
        reward = 0.0
        if self.t == 0 and action_text == "planned":
            self.planned_at_0 = True
        if self.t == 1:
            reward = 1.0 if self.planned_at_0 else 0.0
            self.done = True
            self.status = "success"
        self.t += 1
        return self.Obs(), reward, self.done, {}

    def default_action(self, rng):
        return "noop"

    def fresh_memory(self):
        class M:
            novelty = False

            def update(self, obs):
                pass

            def known_count(self):
                return 0
        return M()

    def survival_pressure(self, obs):
        return False

    def score(self):
        return 1.0 if self.planned_at_0 else 0.0

    def config_dict(self):
        return {}


class BanditPolicy(Policy):
    """Decides via the logistic policy; d=1 emits a plan block whose action
    is the rewarded one."""

    name = "bandit"

    def __init__(self, params):
        self.params = params

    def output(self, view, rng):
        from dynaplan.decision import decide
        d, prob = decide(self.params, view.features, rng)
        if d:
            return render_output("pay attention via: planned", "planned"), \
                {"prob": prob}
        return "noop", {"prob": prob}


class TestRLTrain:
    def test_bandit_learns_to_plan_at_start(self):
        cfg = RLConfig(k_tokens=0.0, batch_episodes=32, max_iterations=220,
                       learning_rate=1.0, baseline_window=8)
        result = rl_train(lambda s: BanditEnv(s), DecisionParams.zeros(), cfg,
                          seed=3, policy_builder=lambda p: BanditPolicy(p))
        # greedy policy must plan at t=0 with prob >= 0.99
        f0 = compute_features(0, None, False, True, 0, False)
        from dynaplan.decision import logistic
        prob = logistic(float(result.params.weights @ f0))
        assert prob >= 0.99
        assert result.curve[-1]["mean_return"] > 0.95

    def test_huge_penalty_kills_planning(self):
        cfg = RLConfig(k_tokens=1.0, batch_episodes=16, max_iterations=40,
                       learning_rate=0.8)
        result = rl_train(lambda s: BanditEnv(s), DecisionParams.zeros(), cfg,
                          seed=4, policy_builder=lambda p: BanditPolicy(p))
        assert result.curve[-1]["f_p"] < 0.1

    def test_seed_determinism(self):
        cfg = RLConfig(batch_episodes=4, max_iterations=5)
        a = rl_train(lambda s: BanditEnv(s), DecisionParams.zeros(), cfg,
                     seed=7, policy_builder=lambda p: BanditPolicy(p))
        b = rl_train(lambda s: BanditEnv(s), DecisionParams.zeros(), cfg,
                     seed=7, policy_builder=lambda p: BanditPolicy(p))
        assert np.array_equal(a.params.weights, b.params.weights)
        assert a.curve == b.curve

    def test_ppo_variant_runs(self):
        cfg = RLConfig(batch_episodes=32, max_iterations=40, algo="ppo",
                       learning_rate=0.6)
        result = rl_train(lambda s: BanditEnv(s), DecisionParams.zeros(), cfg,
                          seed=5, policy_builder=lambda p: BanditPolicy(p))
        assert result.curve[-1]["mean_return"] > 0.8

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RLConfig(gamma=0.0).validate()
        with pytest.raises(ValueError):
            RLConfig(k_tokens=-1).validate()
        with pytest.raises(ValueError):
            RLConfig(algo="sgd").validate()

    def test_pogs_training_smoke(self):
        env_cfg = dataclasses.asdict(
            PogsConfig(num_nodes=12, min_start_target_distance=4,
                       max_steps=20))
        factory = lambda s: make_env("pogs", env_cfg, s)
        cfg = RLConfig(batch_episodes=8, max_iterations=6)
        result = rl_train(factory, DecisionParams.zeros(), cfg, seed=1)
        assert len(result.curve) == 6
        assert all(np.isfinite(result.params.weights))


class TestMatrix:
    def test_arms_and_shared_seeds(self):
        cfg = MatrixConfig(
            env_kind="craftlite",
            env=dataclasses.asdict(CraftConfig(width=10, height=10,
                                               max_steps=60)),
            teacher=TeacherConfig(8),
            rl=RLConfig(batch_episodes=4, max_iterations=3),
            seed=11,
        )
        result = run_experiment_matrix(cfg)
        assert set(result.arms) == {"primed_dynamic", "base_dynamic",
                                    "primed_never", "base_never"}
        for arm, rl_result in result.arms.items():
            assert len(rl_result.curve) == 3
            if arm.endswith("never"):
                assert all(row["f_p"] == 0.0 for row in rl_result.curve)
        # Paired design: env seeds derive only from (seed, iteration, index).
        assert derive_seed(11, "rl", 0, 0) == derive_seed(11, "rl", 0, 0)

    def test_episodes_to_threshold(self):
        from dynaplan.training import MatrixResult, RLResult
        curve = [{"episodes": 4, "mean_score": 0.2},
                 {"episodes": 8, "mean_score": 0.6}]
        res = MatrixResult(arms={"a": RLResult(DecisionParams.zeros(), curve)},
                           primed_params=DecisionParams.zeros(),
                           teacher_size=0)
        assert res.episodes_to_threshold("a", 0.5) == 8
        assert res.episodes_to_threshold("a", 0.9) is None
