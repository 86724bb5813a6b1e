#!/usr/bin/env python3
"""Train the decision policy under different per-token plan penalties and
report final planning frequency and task score per penalty level."""

import argparse
import statistics as st

from dynaplan.analytics import write_csv
from dynaplan.configs import DEFAULT_SWEEP_POGS
from dynaplan.decision import DecisionParams
from dynaplan.envs import make_env
from dynaplan.training import (RLConfig, default_policy_builder, derive_seed,
                               rl_train, rollout_batch)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--penalties", type=float, nargs="+",
                        default=[0.0, 0.001, 0.005])
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--iterations", type=int, default=40)
    parser.add_argument("--out", default="out/penalty_ablation.csv")
    args = parser.parse_args()

    factory = lambda s: make_env("pogs", DEFAULT_SWEEP_POGS, s)
    rows = []
    for k_tokens in args.penalties:
        fps, scores, plan_tokens = [], [], []
        for seed in range(args.seeds):
            cfg = RLConfig(k_tokens=k_tokens, batch_episodes=24,
                           max_iterations=args.iterations, learning_rate=0.4)
            result = rl_train(factory, DecisionParams.zeros(), cfg, seed=seed)
            evals = rollout_batch(
                factory, default_policy_builder(), result.params,
                [derive_seed(999, "eval", j) for j in range(96)],
                k_tokens, 1.0)
            fps.append(st.mean(t.summary["f_p"] for t in evals))
            scores.append(st.mean(t.summary["score"] for t in evals))
            plan_tokens.append(st.mean(t.summary["total_plan_tokens"]
                                       for t in evals))
        rows.append({
            "k_tokens": k_tokens,
            "median_f_p": st.median(fps),
            "mean_score": st.mean(scores),
            "mean_plan_tokens": st.mean(plan_tokens),
            "n_seeds": args.seeds,
        })
        print(f"k_tokens={k_tokens}: median f_p {st.median(fps):.3f}, "
              f"mean score {st.mean(scores):.3f}, "
              f"mean plan tokens/episode {st.mean(plan_tokens):.1f}")
    write_csv(args.out, rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
