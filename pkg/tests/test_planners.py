"""Scripted planners: frontier selection, retarget noise, errand builder,
plan following, and the human command grammar."""

import random
from collections import Counter

import pytest

from dynaplan.craftlite import CraftConfig, generate_world
from dynaplan.envs import CraftEnv
from dynaplan.episode import EpisodeDriver
from dynaplan.errors import PlanningError
from dynaplan.planners import (CraftMemory, NoiseParams, Plan, PogsMemory,
                               compile_human_plan, craft_plan, follow_plan,
                               incumbent_goal, plan_validity, pogs_plan,
                               pogs_plan_options)
from dynaplan.policies import fixed_frequency_policy
from dynaplan.pogs import PogsConfig, PogsInstance, observe as p_observe
from dynaplan.protocol import PlanState


def pogs_memory(adjacency, current):
    mem = PogsMemory()
    mem.adjacency = {k: set(v) for k, v in adjacency.items()}
    seen = set(mem.adjacency)
    labels = {n for nbrs in mem.adjacency.values() for n in nbrs}
    mem.fringe = labels - seen
    mem.current = current
    mem.visited = {current}
    return mem


def plan_state_from(plan: Plan) -> PlanState:
    return PlanState(plan_text=plan.text, plan_steps=list(plan.steps),
                     token_length=len(plan.text.split()))


class TestPogsPlan:
    def test_target_visible(self):
        mem = pogs_memory({0: {1}, 1: {0, 2}, 2: {1}}, current=0)
        plan = pogs_plan(mem, target=2, noise=NoiseParams(0.0),
                         rng=random.Random(0))
        assert plan.goal_tag == "reach target"
        assert plan.steps == ["1", "2"]

    def test_closest_frontier_rule(self):
        # frontiers 1 (distance 1) and 4 (distance 3)
        mem = pogs_memory({0: {1, 2}, 2: {0, 3}, 3: {2, 4}}, current=0)
        plan = pogs_plan(mem, target=99, noise=NoiseParams(0.0),
                         rng=random.Random(0))
        assert plan.goal_tag == "reach node 1"
        assert plan.steps == ["1"]

    def test_uniform_retarget_chi_square(self):
        """epsilon=1: frontier chosen uniformly; oracle = direct counting."""
        mem = pogs_memory({0: {1, 2, 3}}, current=0)
        rng = random.Random(42)
        counts = Counter(
            pogs_plan(mem, 99, NoiseParams(1.0), rng).goal_tag
            for _ in range(10_000))
        assert set(counts) == {"reach node 1", "reach node 2", "reach node 3"}
        expected = 10_000 / 3
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2 < 13.8  # p=0.001 at 2 dof

    def test_incumbent_commitment(self):
        # With a live committed frontier goal, epsilon=0 keeps it even though
        # another frontier is closer.
        mem = pogs_memory({0: {1, 2}, 2: {0, 3}, 3: {2, 4}}, current=0)
        plan = pogs_plan(mem, 99, NoiseParams(0.0), random.Random(0),
                         prev_goal=4)
        assert plan.goal_tag == "reach node 4"
        assert plan.steps == ["2", "3", "4"]

    def test_expired_incumbent_falls_back(self):
        mem = pogs_memory({0: {1, 2}, 2: {0, 3}, 3: {2, 4}}, current=0)
        plan = pogs_plan(mem, 99, NoiseParams(0.0), random.Random(0),
                         prev_goal=3)  # 3 is expanded, not a frontier
        assert plan.goal_tag == "reach node 1"

    def test_options_sum_to_one(self):
        mem = pogs_memory({0: {1, 2, 5}, 2: {0, 3}}, current=0)
        for eps in (0.0, 0.3, 1.0):
            opts = pogs_plan_options(mem, 99, NoiseParams(eps))
            assert abs(sum(p for p, _ in opts) - 1.0) < 1e-12

    def test_no_frontier_no_target_raises(self):
        mem = pogs_memory({0: {1}, 1: {0}}, current=0)
        with pytest.raises(PlanningError):
            pogs_plan(mem, 99, NoiseParams(0.0), random.Random(0))

    def test_empty_memory_raises(self):
        with pytest.raises(PlanningError):
            pogs_plan(PogsMemory(), 1, NoiseParams(0.0), random.Random(0))


def craft_memory_from(world):
    mem = CraftMemory(width=world.config.width, height=world.config.height)
    mem.tiles = dict(world.tiles)  # full knowledge for planner unit tests
    return mem


def flat_memory(w=12, h=12, **special):
    mem = CraftMemory(width=w, height=h)
    mem.tiles = {(x, y): "grass" for x in range(w) for y in range(h)}
    mem.tiles.update(special)
    return mem


def summary_at(mem, pos, facing="south", inventory=None, health=9, hunger=9,
               unlocked=(), zombie=None):
    from dynaplan.craftlite import CraftObservation
    view = {p: t for p, t in mem.tiles.items()
            if abs(p[0] - pos[0]) <= 2 and abs(p[1] - pos[1]) <= 2}
    return CraftObservation(view=view, position=pos, facing=facing,
                            inventory=dict(inventory or {}), health=health,
                            hunger=hunger, unlocked=frozenset(unlocked),
                            zombie=zombie, text_render="")


class TestCraftPlan:
    def test_survival_plan(self):
        mem = flat_memory()
        mem.tiles[(3, 3)] = "water"  # 3 cells away (diagonal)
        summary = summary_at(mem, (5, 5), hunger=1)
        plan = craft_plan(mem, summary)
        assert plan.goal_tag == "restore food"
        assert len(plan.steps) == 4  # 3 moves + eat
        assert plan.steps[-1] == "eat"
        assert all(s.startswith("move") for s in plan.steps[:-1])

    def test_survival_plan_straight_line(self):
        # Straight ahead the last walking move already faces the water.
        mem = flat_memory()
        mem.tiles[(5, 2)] = "water"
        summary = summary_at(mem, (5, 5), hunger=1)
        plan = craft_plan(mem, summary)
        assert plan.steps == ["move north", "move north", "eat"]

    def test_place_table_next(self):
        mem = flat_memory()
        mem.tiles[(2, 2)] = "tree"
        summary = summary_at(mem, (5, 5), inventory={"wood": 1},
                             unlocked={"collect_wood"})
        plan = craft_plan(mem, summary)
        assert plan.goal_tag == "place_table"
        assert plan.steps[-1] == "place table"

    def test_nothing_discovered_explores(self):
        mem = CraftMemory(width=12, height=12)
        mem.tiles = {(x, y): "grass" for x in range(4, 7) for y in range(4, 7)}
        summary = summary_at(mem, (5, 5))
        plan = craft_plan(mem, summary, NoiseParams(0.0), random.Random(0))
        assert plan.goal_tag.startswith("explore")
        assert plan.steps

    def test_zombie_engagement(self):
        mem = flat_memory()
        summary = summary_at(mem, (5, 5), inventory={"wood_pickaxe": 1},
                             zombie=(5, 3))
        plan = craft_plan(mem, summary)
        assert plan.goal_tag == "defeat zombie"
        assert plan.steps[-1] == "attack"

    def test_zombie_ignored_without_weapon(self):
        mem = flat_memory()
        mem.tiles[(2, 2)] = "tree"
        summary = summary_at(mem, (5, 5), zombie=(5, 3))
        plan = craft_plan(mem, summary)
        assert plan.goal_tag == "collect_wood"

    def test_priority_totality_fuzz(self):
        """Exactly one priority rule fires for any world summary."""
        rng = random.Random(3)
        for seed in range(40):
            world = generate_world(CraftConfig(width=10, height=10), seed=seed)
            mem = craft_memory_from(world)
            summary = summary_at(
                mem, world.agent_pos,
                inventory={k: rng.randint(0, 2) for k in
                           ("wood", "stone", "iron", "wood_pickaxe")},
                health=rng.randint(1, 9), hunger=rng.randint(1, 9),
                unlocked=set(), zombie=None)
            plan = craft_plan(mem, summary, NoiseParams(0.0), random.Random(0))
            assert plan.steps, f"seed {seed} produced an empty plan"

    def test_full_chain_oracle_plan(self):
        """With full map knowledge the errand chain terminates in diamond."""
        world = generate_world(CraftConfig(width=12, height=12), seed=4)
        mem = craft_memory_from(world)
        summary = summary_at(mem, world.agent_pos,
                             inventory={"iron_pickaxe": 1, "wood_pickaxe": 1},
                             unlocked=set(
                                 ["collect_wood", "place_table",
                                  "craft_wood_pickaxe", "collect_stone",
                                  "craft_stone_pickaxe", "collect_iron",
                                  "place_furnace", "craft_iron_pickaxe"]))
        plan = craft_plan(mem, summary)
        assert plan.goal_tag == "collect_diamond"
        assert plan.steps[-1] == "collect"


class TestFollowPlan:
    def test_pogs_follow(self):
        cfg = PogsConfig(num_nodes=4, k_nearest=1, min_start_target_distance=1)
        adjacency = {0: {1}, 1: {0, 2}, 2: {1, 3}, 3: {2}}
        inst = PogsInstance(config=cfg, adjacency=adjacency, start_node=1,
                            target_node=3, current_node=1, visit_sequence=[1])
        obs = p_observe(inst)
        plan = PlanState(plan_text="p via: 2, 3", plan_steps=["2", "3"])
        assert follow_plan(plan, obs) == "2"
        assert plan_validity(plan, obs)

    def test_exhausted(self):
        plan = PlanState(plan_text="p via: 2", plan_steps=["2"],
                         steps_executed=1)
        assert follow_plan(plan, None) is None
        assert not plan_validity(plan, None)

    def test_pogs_non_adjacent_step_invalid(self):
        cfg = PogsConfig(num_nodes=4, k_nearest=1, min_start_target_distance=1)
        adjacency = {0: {1}, 1: {0, 2}, 2: {1, 3}, 3: {2}}
        inst = PogsInstance(config=cfg, adjacency=adjacency, start_node=0,
                            target_node=3, current_node=0, visit_sequence=[0])
        obs = p_observe(inst)
        plan = PlanState(plan_text="p via: 3", plan_steps=["3"])
        assert follow_plan(plan, obs) is None  # 3 not adjacent to 0

    def test_craft_precondition(self):
        mem = flat_memory()
        summary = summary_at(mem, (5, 5), inventory={"wood": 1, "stone": 1})
        plan = PlanState(plan_text="p via: craft stone_pickaxe",
                         plan_steps=["craft stone_pickaxe"])
        assert follow_plan(plan, summary) is None  # no adjacent table
        mem2 = flat_memory()
        mem2.tiles[(5, 4)] = "table"
        summary2 = summary_at(mem2, (5, 5),
                              inventory={"wood": 1, "stone": 1})
        assert follow_plan(plan, summary2) == "craft stone_pickaxe"

    def test_free_text_plan_counts_valid(self):
        plan = PlanState(plan_text="press onward bravely", plan_steps=[],
                         token_length=3)
        assert plan_validity(plan, None)
        assert follow_plan(plan, None) is None


class TestFixedFrequency:
    def test_schedule_count(self):
        env = CraftEnv(CraftConfig(max_steps=10, zombie_enabled=False), seed=2)
        drv = EpisodeDriver(env, fixed_frequency_policy(4), seed=2)
        traj = drv.run()
        d_steps = [r.t for r in traj.steps if r.d]
        assert d_steps == [t for t in range(traj.summary["steps"]) if t % 4 == 0]
        assert traj.summary["plan_events"] == -(-traj.summary["steps"] // 4)

    def test_k1_always_plans(self):
        env = CraftEnv(CraftConfig(max_steps=6, zombie_enabled=False), seed=2)
        drv = EpisodeDriver(env, fixed_frequency_policy(1), seed=2)
        traj = drv.run()
        assert all(r.d for r in traj.steps)
        assert traj.summary["f_p"] == 1.0

    def test_never_plan_identity(self):
        env = CraftEnv(CraftConfig(max_steps=12, zombie_enabled=False), seed=2)
        drv = EpisodeDriver(env, fixed_frequency_policy(None), seed=2)
        traj = drv.run()
        assert all(not r.d for r in traj.steps)
        assert all(r.plan_text is None for r in traj.steps)

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            fixed_frequency_policy(0)


class TestFullObservabilityOracle:
    def test_noise_free_plan_matches_oracle_length(self):
        """With epsilon=0 and full observability, following the plan reaches
        the target in exactly the oracle shortest-path length."""
        from dynaplan.envs import PogsEnv
        from dynaplan.pogs import shortest_path_oracle, step

        for seed in range(20):
            cfg = PogsConfig(num_nodes=15, k_nearest=15,  # sees everything
                             min_start_target_distance=4, max_steps=60)
            env = PogsEnv(cfg, seed)
            inst = env.instance
            oracle = shortest_path_oracle(inst.adjacency, inst.start_node,
                                          inst.target_node)
            mem = PogsMemory()
            mem.update(p_observe(inst))
            plan = pogs_plan(mem, inst.target_node, NoiseParams(0.0),
                             random.Random(0))
            assert len(plan.steps) == len(oracle) - 1
            for s in plan.steps:
                _, reward, done, info = step(inst, s)
                assert not info["invalid"]
            assert inst.status == "success"
            assert inst.step_count == len(oracle) - 1


class TestIncumbentGoal:
    def test_parse_forms(self):
        assert incumbent_goal("reach node 7 via: 3, 5, 7") == 7
        assert incumbent_goal("explore 4,9 via: move north") == (4, 9)
        assert incumbent_goal("reach target via: 3") is None
        assert incumbent_goal("craft_stone_pickaxe via: collect") is None
        assert incumbent_goal(None) is None


class TestHumanCommands:
    def test_pogs_goto(self):
        mem = pogs_memory({0: {1}, 1: {0, 2}, 2: {1}}, current=0)
        plan = compile_human_plan("goto 2", mem, None, "pogs", target=5)
        assert plan.steps == ["1", "2"]
        assert plan.goal_tag == "goto 2"

    def test_pogs_goto_unknown_rejected(self):
        mem = pogs_memory({0: {1}}, current=0)
        with pytest.raises(ValueError):
            compile_human_plan("goto 9", mem, None, "pogs", target=5)

    def test_pogs_explore(self):
        mem = pogs_memory({0: {1, 2}, 2: {0, 3}}, current=0)
        plan = compile_human_plan("explore", mem, None, "pogs", target=99)
        assert plan.steps == ["1"]  # deterministic closest frontier

    def test_craft_goto_and_collect(self):
        mem = flat_memory()
        mem.tiles[(5, 2)] = "tree"
        summary = summary_at(mem, (5, 5))
        plan = compile_human_plan("goto tree", mem, summary, "craftlite")
        assert plan.steps[-1] == "move north"
        plan = compile_human_plan("collect wood", mem, summary, "craftlite")
        assert plan.steps[-1] == "collect"

    def test_craft_craft_command(self):
        mem = flat_memory()
        mem.tiles.update({(5, 3): "table", (3, 3): "tree"})
        summary = summary_at(mem, (5, 5), inventory={"wood": 1})
        plan = compile_human_plan("craft wood_pickaxe", mem, summary,
                                  "craftlite")
        assert plan.steps[-1] == "craft wood_pickaxe"

    def test_unknown_command(self):
        with pytest.raises(ValueError):
            compile_human_plan("sing a song", flat_memory(),
                               summary_at(flat_memory(), (5, 5)), "craftlite")
