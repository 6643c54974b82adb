"""Stochastic action head: clipped Gaussian over the unit interval.

The actor emits a mean in (0,1); actions are Gaussian draws around it
clipped into [0,1]. Log-probabilities use the unclipped density at the
clipped sample, a deliberate approximation that keeps the ratio
computable without truncation integrals.
"""

from __future__ import annotations

import numpy as np

from .net import GaussianActor

LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_log_prob(action, mean, log_std) -> np.ndarray:
    std = np.exp(log_std)
    z = (np.asarray(action) - np.asarray(mean)) / std
    return -0.5 * z * z - log_std - 0.5 * LOG_2PI


def gaussian_entropy(log_std) -> float:
    return float(0.5 * (1.0 + LOG_2PI) + log_std)


def sample_action(mean: float, log_std: float, rng: np.random.Generator) -> tuple[float, float]:
    """One clipped-Gaussian draw; returns (action, log_prob at the action)."""
    std = float(np.exp(log_std))
    raw = float(mean) + std * float(rng.standard_normal())
    action = min(max(raw, 0.0), 1.0)
    return action, float(gaussian_log_prob(action, mean, log_std))


def act_greedy(actor: GaussianActor, observation: np.ndarray) -> float:
    """Deployment-time action: the actor mean, no sampling."""
    mean, _ = actor.forward(np.asarray(observation, dtype=np.float64)[None, :])
    return float(mean[0])
