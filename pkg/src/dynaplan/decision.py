"""The learnable when-to-plan policy: a logistic decision rule over a small
feature vector, plus the behavior-cloning primer and the penalized-return
objective it is trained against.

The planning and acting policies stay scripted; only the decision to spend a
turn's budget on a fresh plan is learned.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .protocol import PlanState, Trajectory

FEATURE_NAMES = (
    "bias",
    "steps_since_plan",
    "plan_valid",
    "plan_remaining",
    "novelty",
    "progress_stall",
    "survival_pressure",
)
N_FEATURES = len(FEATURE_NAMES)
K_MAX = 12          # normalizes plan age; matches the largest teacher interval
STALL_WINDOW = 8    # steps without reward before the stall flag raises


def compute_features(t: int, plan_state: Optional[PlanState], plan_valid: bool,
                     novelty: bool, steps_since_reward: int,
                     survival_pressure: bool) -> np.ndarray:
    """All components are clipped into [0, 1]."""
    if plan_state is None or plan_state.is_empty:
        age = 1.0
        remaining = 0.0
        valid = 0.0
    else:
        age = min(1.0, max(0.0, (t - plan_state.created_at) / K_MAX))
        remaining = plan_state.remaining_fraction()
        valid = 1.0 if plan_valid else 0.0
    return np.array([
        1.0,
        age,
        valid,
        remaining,
        1.0 if novelty else 0.0,
        1.0 if steps_since_reward >= STALL_WINDOW else 0.0,
        1.0 if survival_pressure else 0.0,
    ], dtype=float)


@dataclass
class DecisionParams:
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} weights, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @classmethod
    def zeros(cls) -> "DecisionParams":
        return cls(np.zeros(N_FEATURES))

    def copy(self) -> "DecisionParams":
        return DecisionParams(self.weights.copy())


# Hand-set default used by demos and the steering harness: plan when the
# current plan is stale, invalid, or the situation changed.
DEFAULT_DECISION_WEIGHTS = np.array([-3.0, 4.0, -3.0, -1.0, 1.5, 1.5, 2.0])


def default_params() -> DecisionParams:
    return DecisionParams(DEFAULT_DECISION_WEIGHTS.copy())


def logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def decide(params: DecisionParams, features: np.ndarray,
           rng: Optional[random.Random] = None,
           greedy: bool = False) -> tuple[bool, float]:
    """Sample (or threshold) the plan/act decision; returns (d, prob)."""
    if features.shape != params.weights.shape:
        raise ValueError("feature/weight dimension mismatch")
    prob = logistic(float(params.weights @ features))
    if greedy:
        return prob >= 0.5, prob
    if rng is None:
        raise ValueError("stochastic decide requires an rng")
    return rng.random() < prob, prob


def grad_log_prob(params: DecisionParams, features: np.ndarray,
                  d: bool) -> np.ndarray:
    """Gradient of log pi(d | features) for the logistic decision policy."""
    prob = logistic(float(params.weights @ features))
    return ((1.0 if d else 0.0) - prob) * features


def episode_return(trajectory: Trajectory, k_tokens: float,
                   gamma: float = 1.0) -> float:
    """Discounted task return minus the per-decision token penalty."""
    total = 0.0
    for rec in trajectory.steps:
        penalty = 0.0
        if rec.d:
            penalty = k_tokens * rec.env_info.get("plan_tokens", 0)
        total += (gamma ** rec.t) * (rec.reward - penalty)
    return total


def step_records_to_xy(trajectories: list[Trajectory]):
    """Stack (features, d) pairs recorded during teacher rollouts."""
    xs, ys = [], []
    for traj in trajectories:
        for rec in traj.steps:
            feats = rec.env_info.get("features")
            if feats is None:
                continue
            xs.append(feats)
            ys.append(1.0 if rec.d else 0.0)
    if not xs:
        raise ValueError("no labeled steps in the given trajectories")
    return np.array(xs, dtype=float), np.array(ys, dtype=float)


@dataclass
class PrimingConfig:
    learning_rate: float = 3.0
    iterations: int = 600
    l2: float = 1e-4


@dataclass
class PrimingResult:
    params: DecisionParams
    loss_curve: list[float] = field(default_factory=list)
    degenerate: bool = False


def bc_prime(trajectories: list[Trajectory],
             hyper: Optional[PrimingConfig] = None) -> PrimingResult:
    """Fit the decision weights to teacher labels by gradient descent on
    binary cross-entropy. All-same labels yield a saturated policy and a
    warning flag instead of a divergent fit."""
    hyper = hyper or PrimingConfig()
    x, y = step_records_to_xy(trajectories)
    if np.all(y == y[0]):
        weights = np.zeros(N_FEATURES)
        weights[0] = 8.0 if y[0] > 0.5 else -8.0
        return PrimingResult(DecisionParams(weights), loss_curve=[], degenerate=True)

    theta = np.zeros(N_FEATURES)
    n = len(y)
    losses = []
    for _ in range(hyper.iterations):
        z = x @ theta
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -35, 35)))
        eps = 1e-12
        loss = -float(np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
        losses.append(loss + 0.5 * hyper.l2 * float(theta @ theta))
        grad = x.T @ (p - y) / n + hyper.l2 * theta
        theta -= hyper.learning_rate * grad
    return PrimingResult(DecisionParams(theta), loss_curve=losses)


def label_accuracy(params: DecisionParams, trajectories: list[Trajectory]) -> float:
    x, y = step_records_to_xy(trajectories)
    z = x @ params.weights
    pred = (z >= 0.0).astype(float)
    return float(np.mean(pred == y))


def save_params(params: DecisionParams, path) -> None:
    """Flat numeric record with a feature-name header line."""
    with open(path, "w") as fh:
        fh.write(",".join(FEATURE_NAMES) + "\n")
        fh.write(",".join(repr(float(w)) for w in params.weights) + "\n")


def load_params(path) -> DecisionParams:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != FEATURE_NAMES:
            raise ValueError(f"unexpected feature header in {path}")
        values = [float(v) for v in fh.readline().strip().split(",")]
    return DecisionParams(np.array(values))
