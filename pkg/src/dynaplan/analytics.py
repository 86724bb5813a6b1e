"""Experiment metrics: frequency sweeps, the planning cost ledger, the
planning-advantage estimator (Monte Carlo and exhaustive), and best-of-N."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .episode import EpisodeDriver
from .errors import UsageError
from .planners import Plan, follow_plan
from .policies import Policy, ScriptedPlanner, StepView, fixed_frequency_policy
from .protocol import (PlanState, StepRecord, Trajectory, count_plan_tokens,
                       parse_plan_steps)


# ---------------------------------------------------------------------------
# Cost ledger
# ---------------------------------------------------------------------------

@dataclass
class CostLedger:
    total_plan_tokens: int
    c_tokens: float
    c_latency: float
    f_p: float
    q_p: float
    c_noise_diag: float
    k_tokens: float
    k_noise: float
    plan_count: int
    token_source: str = "whitespace"


def _plan_segments(records: list[StepRecord]):
    """(start_index, end_index, steps) for each plan's lifetime."""
    starts = [i for i, r in enumerate(records) if r.plan_text is not None]
    for j, start in enumerate(starts):
        end = starts[j + 1] if j + 1 < len(starts) else len(records)
        yield start, end, parse_plan_steps(records[start].plan_text)


def plan_utilization(records: list[StepRecord]) -> list[float]:
    """Fraction of each plan's steps executed before replacement.

    Free-text plans (no parseable step list) count as fully utilized; this is
    the utilization-by-step-count default.
    """
    out = []
    for start, end, steps in _plan_segments(records):
        if not steps:
            out.append(1.0)
            continue
        ptr = 0
        for rec in records[start:end]:
            if ptr < len(steps) and rec.action_text == steps[ptr]:
                ptr += 1
        out.append(max(0.0, min(1.0, ptr / len(steps))))
    return out


def cost_ledger(trajectory: Trajectory, k_tokens: float,
                k_noise: float = 1.0) -> CostLedger:
    """Per-trajectory planning cost accounting; diagnostic only, the noise
    term never enters a training reward."""
    records = trajectory.steps
    n = len(records)
    plan_steps_count = sum(1 for r in records if r.d)
    total_tokens = sum(r.env_info.get("plan_tokens", 0) for r in records
                       if r.plan_text is not None)
    utils = plan_utilization(records)
    q_p = float(np.mean(utils)) if utils else 1.0
    f_p = plan_steps_count / n if n else 0.0
    return CostLedger(
        total_plan_tokens=total_tokens,
        c_tokens=k_tokens * total_tokens,
        c_latency=0.0,
        f_p=f_p,
        q_p=q_p,
        c_noise_diag=k_noise * f_p * (1.0 - q_p),
        k_tokens=k_tokens,
        k_noise=k_noise,
        plan_count=len(utils),
        token_source=trajectory.config.get("token_source", "whitespace"),
    )


# ---------------------------------------------------------------------------
# Goldilocks sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    k: Optional[int]  # None encodes never-plan
    mean_score: float
    se_score: float
    mean_output_tokens: float
    mean_backtracks: float
    n: int
    scores: list[float] = field(default_factory=list, repr=False)
    backtracks: list[float] = field(default_factory=list, repr=False)

    @property
    def label(self) -> str:
        return "never" if self.k is None else str(self.k)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    seeds: list[int]

    def row(self, k: Optional[int]) -> SweepRow:
        return next(r for r in self.rows if r.k == k)

    def interior_argmax(self) -> SweepRow:
        """Best row among the swept values excluding k=1 and never."""
        interior = [r for r in self.rows if r.k not in (None, 1)]
        return max(interior, key=lambda r: r.mean_score)


def _se(values) -> float:
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return 0.0
    return float(arr.std(ddof=1) / np.sqrt(len(arr)))


def paired_gap(a: list[float], b: list[float]) -> tuple[float, float]:
    """Mean and standard error of per-seed differences a_i - b_i."""
    diffs = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(diffs.mean()), _se(diffs)


def goldilocks_sweep(env_factory: Callable[[int], object],
                     ks: list[Optional[int]], n_seeds: int,
                     master_seed: int = 0,
                     policy_factory: Callable[[Optional[int]], Policy]
                     = fixed_frequency_policy,
                     k_tokens: float = 0.0) -> SweepResult:
    """Paired-seed sweep over planning intervals; rows sorted by mean output
    tokens so the table reads as a compute-to-performance curve."""
    from .training import derive_seed
    if not ks:
        raise UsageError("ks must be non-empty")
    seeds = [derive_seed(master_seed, "sweep", i) for i in range(n_seeds)]
    rows = []
    for k in ks:
        scores, backs, tokens = [], [], []
        for s in seeds:
            env = env_factory(s)
            driver = EpisodeDriver(env, policy_factory(k), seed=s,
                                   k_tokens=k_tokens)
            traj = driver.run()
            scores.append(traj.summary["score"])
            backs.append(traj.summary.get("backtracks", 0))
            tokens.append(traj.summary["total_output_tokens"])
        rows.append(SweepRow(
            k=k,
            mean_score=float(np.mean(scores)),
            se_score=_se(scores),
            mean_output_tokens=float(np.mean(tokens)),
            mean_backtracks=float(np.mean(backs)),
            n=n_seeds,
            scores=scores,
            backtracks=[float(b) for b in backs],
        ))
    rows.sort(key=lambda r: r.mean_output_tokens)
    return SweepResult(rows=rows, seeds=seeds)


# ---------------------------------------------------------------------------
# Planning advantage
# ---------------------------------------------------------------------------

@dataclass
class AdvantageEstimate:
    mean_new: float
    mean_old: float
    a_plan: float
    se: float
    m: int
    method: str  # monte_carlo | exhaustive


class BranchBudgetExceeded(UsageError):
    pass


class _BranchPoint(Exception):
    def __init__(self, options):
        self.options = options


class _SnapshotBlob:
    """One-time pickle of a driver snapshot; restoring per rollout is much
    cheaper than deepcopying the whole object graph every time."""

    def __init__(self, snapshot: EpisodeDriver):
        import pickle
        policy, records = snapshot.policy, snapshot.records
        snapshot.policy = None
        snapshot.records = []
        try:
            self._blob = pickle.dumps(snapshot)
        finally:
            snapshot.policy = policy
            snapshot.records = records
        self.start_index = 0  # cloned drivers start with empty records

    def restore(self) -> EpisodeDriver:
        import pickle
        return pickle.loads(self._blob)


class _ContinuationPolicy(Policy):
    """Replans exactly when the current plan stops being applicable. Plans
    come from a feed when provided; an empty feed either samples (Monte
    Carlo) or surfaces the choice point for exhaustive enumeration."""

    name = "continuation"

    def __init__(self, planner: ScriptedPlanner, feed: Optional[list] = None):
        self.planner = planner
        self.feed = feed  # None => sample with rng

    def output(self, view: StepView, rng: random.Random):
        action = follow_plan(view.plan_state, view.obs)
        if action is not None:
            return action, {}
        if self.feed is None:
            plan = self.planner.plan(view, rng)
        else:
            options = self.planner.options(view)
            if len(options) == 1:
                plan = options[0][1]
            elif self.feed:
                plan = self.feed.pop(0)
            else:
                raise _BranchPoint(options)
        from .protocol import render_output
        return render_output(plan.text, plan.steps[0]), {}


def _return_to_go(driver: EpisodeDriver, start_index: int) -> float:
    return sum(rec.reward for rec in driver.records[start_index:])


def _prepared_clone(blob: _SnapshotBlob, policy: Policy,
                    plan_override: Optional[Plan], rng_seed) -> EpisodeDriver:
    drv = blob.restore()
    drv.policy = policy
    drv.rng = random.Random(f"adv:{rng_seed}")
    if plan_override is not None:
        drv.plan_state = PlanState(
            plan_text=plan_override.text,
            plan_steps=list(plan_override.steps),
            source="agent",
            created_at=drv.t,
            steps_executed=0,
            token_length=count_plan_tokens(plan_override.text),
        )
    return drv


def _mc_values(blob: _SnapshotBlob, planner, fresh: bool, m: int,
               rng: random.Random):
    fresh_options = None
    if fresh:
        fresh_options = planner.options(_snapshot_view(blob.restore()))
    values = []
    for i in range(m):
        seed_i = rng.random()
        override = None
        if fresh_options is not None:
            from .planners import _sample_options
            override = _sample_options(fresh_options,
                                       random.Random(f"pick:{seed_i}"))
        drv = _prepared_clone(blob, _ContinuationPolicy(planner), override,
                              f"roll:{seed_i}")
        while not drv.env.done:
            drv.step_once()
        values.append(_return_to_go(drv, 0))
    return values


def _snapshot_view(driver: EpisodeDriver) -> StepView:
    obs = driver.env.observe()
    driver.memory.update(obs)
    return StepView(t=driver.t, obs=obs, plan_state=driver.plan_state,
                    memory=driver.memory, features=None,
                    env_kind=driver.env.kind,
                    target=getattr(driver.env, "target", None))


def _exhaustive_value(blob: _SnapshotBlob, planner, plan_override, feed,
                      budget: list) -> list[tuple[float, float]]:
    drv = _prepared_clone(blob, _ContinuationPolicy(planner, feed=list(feed)),
                          plan_override, 0)
    try:
        while not drv.env.done:
            drv.step_once()
    except _BranchPoint as bp:
        out = []
        for p, plan in bp.options:
            for q, v in _exhaustive_value(blob, planner, plan_override,
                                          feed + [plan], budget):
                out.append((p * q, v))
        return out
    budget[0] -= 1
    if budget[0] < 0:
        raise BranchBudgetExceeded("exhaustive branch budget exceeded")
    return [(1.0, _return_to_go(drv, 0))]


def estimate_plan_advantage(snapshot: EpisodeDriver, planner: ScriptedPlanner,
                            m: int = 512, rng: Optional[random.Random] = None,
                            method: str = "monte_carlo",
                            branch_budget: int = 4096) -> AdvantageEstimate:
    """Expected return with a freshly sampled plan minus expected return
    retaining the current one, under a replan-when-invalid continuation.

    `snapshot` must be a cloneable mid-episode driver (EpisodeDriver.snapshot).
    """
    if snapshot.env.done:
        raise UsageError("cannot estimate advantage on a finished episode")
    blob = _SnapshotBlob(snapshot)
    if method == "monte_carlo":
        rng = rng or random.Random(0)
        new_vals = _mc_values(blob, planner, True, m, rng)
        old_vals = _mc_values(blob, planner, False, m, rng)
        a = float(np.mean(new_vals) - np.mean(old_vals))
        se = float(np.sqrt(np.var(new_vals, ddof=1) / m
                           + np.var(old_vals, ddof=1) / m)) if m > 1 else 0.0
        return AdvantageEstimate(float(np.mean(new_vals)),
                                 float(np.mean(old_vals)), a, se, m,
                                 "monte_carlo")
    if method != "exhaustive":
        raise UsageError(f"unknown method {method!r}")

    budget = [branch_budget]
    options = planner.options(_snapshot_view(blob.restore()))
    mean_new = 0.0
    for p, plan in options:
        branches = _exhaustive_value(blob, planner, plan, [], budget)
        total_p = sum(q for q, _ in branches)
        mean_new += p * sum(q * v for q, v in branches) / total_p
    old_branches = _exhaustive_value(blob, planner, None, [], budget)
    mean_old = sum(q * v for q, v in old_branches) / \
        sum(q for q, _ in old_branches)
    return AdvantageEstimate(mean_new, mean_old, mean_new - mean_old, 0.0,
                             0, "exhaustive")


# ---------------------------------------------------------------------------
# Best-of-N
# ---------------------------------------------------------------------------

def _achievement_curve(traj: Trajectory) -> list[float]:
    vals = []
    acc = 0.0
    for rec in traj.steps:
        if "achievements" in rec.env_info:
            acc = rec.env_info["achievements"]
        else:
            acc += rec.reward
        vals.append(acc)
    return vals


def best_of_n(trajectories: list[Trajectory], n: int):
    """Pick the best of the first n trajectories and the achievement-vs-step
    envelope across them. Best = success first, then score, then fewer steps."""
    if n > len(trajectories):
        raise UsageError("n exceeds the number of trajectories")
    chosen = trajectories[:n]

    def key(t: Trajectory):
        return (t.status == "success", t.summary["score"],
                -t.summary["steps"])

    best = max(chosen, key=key)
    curves = [_achievement_curve(t) for t in chosen]
    horizon = max(len(c) for c in curves)
    envelope = []
    for s in range(horizon):
        envelope.append(max((c[min(s, len(c) - 1)] for c in curves)))
    return best, envelope


# ---------------------------------------------------------------------------
# CSV reporting
# ---------------------------------------------------------------------------

def write_csv(path: str, rows: list[dict]) -> str:
    if not rows:
        raise UsageError("no rows to write")
    import os
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return path


def sweep_rows_for_csv(result: SweepResult) -> list[dict]:
    return [{
        "k": row.label,
        "mean_score": row.mean_score,
        "se_score": row.se_score,
        "mean_output_tokens": row.mean_output_tokens,
        "log10_output_tokens": float(np.log10(max(row.mean_output_tokens, 1e-9))),
        "mean_backtracks": row.mean_backtracks,
        "n": row.n,
    } for row in result.rows]


def sweep_rows_long(result: SweepResult) -> list[dict]:
    """Plot-ready long format: one (k, seed, metric, value) row per sample."""
    out = []
    for row in result.rows:
        for seed, score, backtracks in zip(result.seeds, row.scores,
                                           row.backtracks):
            out.append({"k": row.label, "seed": seed,
                        "metric": "score", "value": score})
            out.append({"k": row.label, "seed": seed,
                        "metric": "backtracks", "value": backtracks})
    return out
