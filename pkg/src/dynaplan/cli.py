"""Command-line entry points: episode, sweep, train, matrix, serve, replay."""

from __future__ import annotations

import argparse
import os
import sys

from . import analytics, configs, decision, recording, training
from .envs import make_env
from .errors import ConfigError, DynaplanError


def _load(args) -> dict:
    data = configs.load_config_file(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    return data


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_episode(args) -> int:
    data = _load(args)
    cfg = configs.episode_config_from(data)
    if args.force:
        cfg.force = True
    driver = configs.build_episode_driver(cfg)
    traj = driver.run()
    path = cfg.record_path or _out(args, f"episode_seed{cfg.seed}.jsonl")
    recording.write_trajectory(traj, path, force=cfg.force or args.force)
    print(f"episode finished: status={traj.status} "
          f"steps={traj.summary['steps']} score={traj.summary['score']:.3f} "
          f"return={traj.summary['return_task']:.3f} "
          f"f_p={traj.summary['f_p']:.3f}")
    print(f"trajectory written to {path}")
    return 0


def cmd_sweep(args) -> int:
    data = _load(args)
    sweep_cfg = data.get("sweep", {})
    env = dict(data.get("env", {"kind": "pogs", **configs.DEFAULT_SWEEP_POGS}))
    kind = env.pop("kind", "pogs")
    ks = [None if k in ("never", None) else int(k)
          for k in sweep_cfg.get("ks", configs.DEFAULT_SWEEP_KS)]
    n_seeds = int(sweep_cfg.get("n_seeds", args.n_seeds))
    epsilon = sweep_cfg.get("epsilon")
    from .planners import NoiseParams
    from .policies import fixed_frequency_policy
    noise = NoiseParams(float(epsilon)) if epsilon is not None else None

    result = analytics.goldilocks_sweep(
        lambda s: make_env(kind, env, s), ks, n_seeds,
        master_seed=int(data.get("seed", 0)),
        policy_factory=lambda k: fixed_frequency_policy(k, noise))
    path = analytics.write_csv(_out(args, "sweep.csv"),
                               analytics.sweep_rows_for_csv(result))
    for row in result.rows:
        print(f"k={row.label:>5}: score {row.mean_score:.3f}±{row.se_score:.3f}"
              f"  tokens {row.mean_output_tokens:8.1f}"
              f"  backtracks {row.mean_backtracks:6.2f}")
    print(f"sweep table written to {path}")
    return 0


def cmd_train(args) -> int:
    data = _load(args)
    env = dict(data.get("env", {"kind": "pogs", **configs.DEFAULT_SWEEP_POGS}))
    kind = env.pop("kind", "pogs")
    rl = configs.rl_config_from(data.get("rl", {}))
    seed = int(data.get("seed", 0))
    params0 = decision.DecisionParams.zeros()
    if data.get("params_path"):
        params0 = decision.load_params(data["params_path"])
    result = training.rl_train(lambda s: make_env(kind, env, s), params0,
                               rl, seed=seed)
    curve_path = analytics.write_csv(_out(args, "train_curve.csv"),
                                     result.curve)
    params_path = _out(args, "trained_params.csv")
    decision.save_params(result.params, params_path)
    last = result.curve[-1]
    print(f"training done: iterations={len(result.curve)} "
          f"halted={result.halted} final_return={last['mean_return']:.3f} "
          f"final_f_p={last['f_p']:.3f}")
    print(f"curve written to {curve_path}; params to {params_path}")
    return 0


def cmd_matrix(args) -> int:
    data = _load(args)
    mcfg = configs.matrix_config_from(data.get("matrix", data))
    result = training.run_experiment_matrix(mcfg)
    for arm, rl_result in result.arms.items():
        path = analytics.write_csv(_out(args, f"matrix_{arm}.csv"),
                                   rl_result.curve)
        crossed = result.episodes_to_threshold(arm, mcfg.score_threshold)
        last = rl_result.curve[-1]
        print(f"{arm}: final_score={last['mean_score']:.3f} "
              f"f_p={last['f_p']:.2f} "
              f"episodes_to_{mcfg.score_threshold}="
              f"{crossed if crossed is not None else 'never'} -> {path}")
    params_path = _out(args, "primed_params.csv")
    decision.save_params(result.primed_params, params_path)
    print(f"primed params written to {params_path}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve
    data = _load(args)
    service = data.get("service", {})
    host = args.host or service.get("host", "127.0.0.1")
    port = args.port or int(service.get("port", 8710))
    print(f"serving on http://{host}:{port} (websocket at /ws/<session>)")
    serve(host=host, port=port)
    return 0


def cmd_replay(args) -> int:
    traj = recording.read_trajectory(args.trajectory)
    report = recording.replay_trajectory(traj)
    if report["identical"]:
        print(f"replay OK: {len(traj.steps)} steps reproduce bit-identically "
              f"(status={traj.status})")
        return 0
    print("replay MISMATCH:")
    for line in report["mismatches"][:20]:
        print(f"  {line}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynaplan",
        description="Dynamic test-time planning: environments, sweeps, "
                    "decision-policy training, and live steering.")
    parser.add_argument("--config", "-c", help="YAML/JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", "-o", default="out")
    parser.add_argument("--force", action="store_true",
                        help="overwrite existing record files")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("episode", help="run one episode and record it")
    sweep = sub.add_parser("sweep", help="fixed-frequency Goldilocks sweep")
    sweep.add_argument("--n-seeds", type=int, default=200)
    sub.add_parser("train", help="RL-train the decision policy")
    sub.add_parser("matrix", help="run the primed/base x dynamic/never matrix")
    serve = sub.add_parser("serve", help="start the live steering service")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    replay = sub.add_parser("replay", help="verify a recorded trajectory")
    replay.add_argument("trajectory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "episode": cmd_episode,
        "sweep": cmd_sweep,
        "train": cmd_train,
        "matrix": cmd_matrix,
        "serve": cmd_serve,
        "replay": cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, DynaplanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
