"""Line-delimited trajectory files: one header record, one record per step,
one footer record. Readers round-trip writers field-exactly, and any saved
trajectory can be replayed bit-identically from its seed and action log."""

from __future__ import annotations

import json
import os

from .envs import make_env
from .episode import summarize_records
from .errors import UsageError
from .protocol import StepRecord, Trajectory

FORMAT_VERSION = 1


def _step_to_dict(rec: StepRecord) -> dict:
    return {
        "type": "step",
        "t": rec.t,
        "observation_text": rec.observation_text,
        "d": rec.d,
        "plan_text": rec.plan_text,
        "plan_source": rec.plan_source,
        "action_text": rec.action_text,
        "reward": rec.reward,
        "plan_token_cost": rec.plan_token_cost,
        "env_info": _jsonify(rec.env_info),
        "fallback_used": rec.fallback_used,
    }


def _jsonify(value):
    """Tuples become lists on disk; keep keys/values JSON-stable."""
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def _step_from_dict(d: dict) -> StepRecord:
    return StepRecord(
        t=d["t"],
        observation_text=d["observation_text"],
        d=d["d"],
        plan_text=d["plan_text"],
        plan_source=d["plan_source"],
        action_text=d["action_text"],
        reward=d["reward"],
        plan_token_cost=d["plan_token_cost"],
        env_info=d["env_info"],
        fallback_used=d["fallback_used"],
    )


def write_trajectory(traj: Trajectory, path: str, force: bool = False) -> str:
    if os.path.exists(path) and not force:
        raise UsageError(f"refusing to overwrite {path} (use force)")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        header = {"type": "header", "version": FORMAT_VERSION,
                  "config": _jsonify(traj.config), "seed": traj.seed}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in traj.steps:
            fh.write(json.dumps(_step_to_dict(rec), sort_keys=True) + "\n")
        footer = {"type": "footer", "status": traj.status,
                  "summary": _jsonify(traj.summary)}
        fh.write(json.dumps(footer, sort_keys=True) + "\n")
    return path


def read_trajectory(path: str) -> Trajectory:
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("type") != "header" \
            or lines[-1].get("type") != "footer":
        raise UsageError(f"{path} is not a trajectory file")
    header, footer = lines[0], lines[-1]
    steps = [_step_from_dict(d) for d in lines[1:-1]]
    return Trajectory(config=header["config"], seed=header["seed"],
                      steps=steps, status=footer["status"],
                      summary=footer["summary"])


def replay_trajectory(traj: Trajectory) -> dict:
    """Re-simulate from (config, seed, recorded actions) and diff the result.

    Returns {"identical": bool, "mismatches": [...]}; the environments are
    deterministic, so any divergence means the file or the code drifted.
    """
    env = make_env(traj.config["env_kind"], traj.config["env"], traj.seed)
    mismatches: list[str] = []
    for rec in traj.steps:
        obs = env.observe()
        if obs.text_render != rec.observation_text:
            mismatches.append(f"t={rec.t}: observation differs")
        if env.done:
            mismatches.append(f"t={rec.t}: episode ended early on replay")
            break
        _, reward, _, info = env.step(rec.action_text)
        if reward != rec.reward:
            mismatches.append(f"t={rec.t}: reward {reward} != {rec.reward}")
        for key in ("invalid", "node", "score", "achievements"):
            if key in rec.env_info and info.get(key) != rec.env_info[key]:
                mismatches.append(f"t={rec.t}: info[{key}] differs")
    if env.status != traj.status:
        mismatches.append(f"status {env.status} != {traj.status}")
    recomputed = summarize_records(traj.steps, traj.config["env_kind"],
                                   traj.status, traj.config.get("k_tokens", 0.0),
                                   traj.config.get("gamma", 1.0))
    stored = dict(traj.summary)
    stored.pop("injections", None)
    for key, value in recomputed.items():
        if stored.get(key) != value:
            mismatches.append(f"summary[{key}]: {stored.get(key)} != {value}")
    return {"identical": not mismatches, "mismatches": mismatches}


def file_fingerprint(path: str) -> str:
    import hashlib
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
