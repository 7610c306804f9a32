"""Poisoning behaviours for malicious users.

Untargeted users submit a scaled gradient-ascent update; targeted users
train on their shard with every source-class label flipped to the target
class.  Either can additionally be made insidious: a few coordinates are
spiked to the largest magnitude that keeps the gradient's distance to the
benign mean inside the maximum benign pairwise distance, so the result
slips past user-level distance filtering while carrying per-dimension
poison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BEHAVIOR_BENIGN = "benign"
BEHAVIOR_UNTARGETED = "untargeted"
BEHAVIOR_TARGETED = "targeted"


@dataclass
class AttackConfig:
    kind: str = "none"  # none | untargeted | targeted
    ratio: float = 0.0
    stealth: bool = False
    source: int = 0
    target: int = 6
    beta: float = 5.0
    spike_count: int = 10
    spike_policy: str = "max_feasible"

    def validate(self) -> None:
        if self.kind not in ("none", BEHAVIOR_UNTARGETED, BEHAVIOR_TARGETED):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.ratio <= 0.5:
            raise ValueError("attack ratio is capped at 50%")
        if self.kind == BEHAVIOR_TARGETED and self.source == self.target:
            raise ValueError("source and target class must differ")
        if self.spike_policy != "max_feasible":
            raise ValueError(f"unknown spike policy {self.spike_policy!r}")


@dataclass
class BenignStats:
    """What the adversary knows: benign mean and max pairwise distance."""

    mean: np.ndarray
    max_pairwise_sq: float

    @classmethod
    def from_gradients(cls, gradients: list[np.ndarray]) -> "BenignStats":
        stack = np.stack(gradients)
        max_sq = 0.0
        for i in range(len(stack)):
            for j in range(i + 1, len(stack)):
                diff = stack[i] - stack[j]
                max_sq = max(max_sq, float(diff @ diff))
        return cls(stack.mean(axis=0), max_sq)


@dataclass
class StealthResult:
    gradient: np.ndarray
    spiked: np.ndarray  # coordinate indices
    magnitude: float
    feasible: bool


def apply_untargeted(gradient: np.ndarray, beta: float) -> np.ndarray:
    """Gradient ascent: the strongest divergence attack, -beta * g."""
    return -beta * gradient


def flip_labels(labels: np.ndarray, source: int, target: int) -> np.ndarray:
    flipped = labels.copy()
    flipped[labels == source] = target
    return flipped


def apply_stealth(
    gradient: np.ndarray,
    stats: BenignStats,
    spike_count: int,
    rng: np.random.Generator,
    clip: float | None = None,
    margin: float = 0.999,
) -> StealthResult:
    """Spike ``spike_count`` random coordinates while staying camouflaged.

    Each chosen coordinate is set to the common largest magnitude t (signed
    toward the existing attack direction) such that the distance to the
    benign mean remains below the benign pairwise maximum.  When the
    unspiked coordinates already blow the budget there is no feasible t;
    the spikes then collapse to the feasibility bound (the benign-mean
    values themselves) and the result is flagged infeasible.
    """
    out = gradient.astype(np.float64).copy()
    dims = out.size
    if spike_count == 0:
        return StealthResult(out, np.empty(0, dtype=np.int64), 0.0, True)
    if spike_count > dims:
        raise ValueError("cannot spike more coordinates than the gradient has")
    coords = np.sort(rng.choice(dims, size=spike_count, replace=False))
    mu = stats.mean
    budget_sq = margin * margin * stats.max_pairwise_sq

    residual = out - mu
    residual[coords] = 0.0
    base_sq = float(residual @ residual)
    remaining = budget_sq - base_sq

    signs = np.sign(out[coords] - mu[coords])
    signs[signs == 0] = 1.0
    mu_s = signs * mu[coords]  # distance term becomes (t - s*mu)^2 per coord

    if remaining <= 0.0:
        out[coords] = mu[coords]
        return StealthResult(out, coords, 0.0, False)

    # largest t with sum_k (t - mu_s[k])^2 <= remaining
    p = float(spike_count)
    mu_sum = float(mu_s.sum())
    mu_sq = float(mu_s @ mu_s)
    disc = mu_sum * mu_sum - p * (mu_sq - remaining)
    if disc < 0.0:
        t = mu_sum / p  # minimizer of the spike contribution
        feasible = float(((t - mu_s) ** 2).sum()) <= remaining
    else:
        t = (mu_sum + float(np.sqrt(disc))) / p
        feasible = True
    if clip is not None:
        t = float(np.clip(t, -clip, clip))
    out[coords] = signs * t
    return StealthResult(out, coords, abs(t), feasible)


@dataclass
class UserState:
    """Per-user simulation state: shard, behaviour, momentum buffer."""

    user_id: int
    shard_x: np.ndarray
    shard_y: np.ndarray
    behavior: str
    stealth: bool
    batch_size: int
    momentum: float
    rng: np.random.Generator
    velocity: np.ndarray | None = None
    flipped_y: np.ndarray | None = field(default=None, repr=False)

    def batch_indices(self) -> np.ndarray:
        size = min(self.batch_size, len(self.shard_y))
        return self.rng.choice(len(self.shard_y), size=size, replace=False)
