#!/usr/bin/env python3
"""Compare autonomous episodes against a scripted steering schedule on one
world, and write both trajectories for replay or console inspection."""

import argparse

from dynaplan.craftlite import CraftConfig
from dynaplan.decision import default_params
from dynaplan.envs import CraftEnv
from dynaplan.episode import EpisodeDriver
from dynaplan.policies import DynamicPolicy
from dynaplan.recording import write_trajectory
from dynaplan.steering import chain_director, run_steered_episode
from dynaplan.training import derive_seed

STEERING_ENV = CraftConfig(width=20, height=20, n_trees=2, n_stones=4,
                           n_iron=1, n_water=2, max_steps=230)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env-seed", type=int, default=11)
    parser.add_argument("--n-autonomous", type=int, default=20)
    parser.add_argument("--out-dir", default="out")
    args = parser.parse_args()

    best = None
    diamonds = 0
    for j in range(args.n_autonomous):
        env = CraftEnv(STEERING_ENV, seed=args.env_seed)
        driver = EpisodeDriver(env, DynamicPolicy(default_params()),
                               seed=derive_seed(args.env_seed, "auto", j))
        traj = driver.run()
        diamonds += traj.status == "success"
        if best is None or traj.summary["score"] > best.summary["score"]:
            best = traj
    print(f"autonomous: {diamonds}/{args.n_autonomous} diamond runs, "
          f"best score {best.summary['score']:.3f}")

    env = CraftEnv(STEERING_ENV, seed=args.env_seed)
    driver = EpisodeDriver(env, DynamicPolicy(default_params()),
                           seed=derive_seed(args.env_seed, "steer"))
    steered = run_steered_episode(driver, chain_director)
    adherence = [i["adherence"] for i in steered.summary["injections"]]
    print(f"steered: status={steered.status} "
          f"score {steered.summary['score']:.3f} in "
          f"{steered.summary['steps']} steps, "
          f"{len(adherence)} injections, "
          f"min adherence {min(adherence):.2f}")
    write_trajectory(best, f"{args.out_dir}/autonomous_best.jsonl", force=True)
    write_trajectory(steered, f"{args.out_dir}/steered.jsonl", force=True)
    print(f"wrote {args.out_dir}/autonomous_best.jsonl and "
          f"{args.out_dir}/steered.jsonl")


if __name__ == "__main__":
    main()
