"""Truncated generalized advantage estimation."""

from __future__ import annotations

import numpy as np

from .. import backend
from ..errors import DomainError


def gae(rewards, values, bootstrap_value: float, gamma: float, lam: float,
        dones=None) -> np.ndarray:
    """Discounted sum of TD residuals: A_k = sum_i (gamma*lam)^(i-k) d_i
    with d_k = r_k + gamma*V(s_{k+1}) - V(s_k).

    bootstrap_value stands in for V(s_K) past the horizon; a done flag
    at step k zeroes the tail (and the bootstrap) beyond it.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.ndim != 1 or rewards.shape != values.shape:
        raise DomainError(
            f"rewards {rewards.shape} and values {values.shape} must be equal-length vectors"
        )
    if rewards.size == 0:
        raise DomainError("gae needs a horizon of at least 1 step")
    if dones is None:
        nonterminal = np.ones(rewards.size)
    else:
        dones = np.asarray(dones)
        if dones.shape != rewards.shape:
            raise DomainError(f"dones {dones.shape} must match rewards {rewards.shape}")
        nonterminal = 1.0 - dones.astype(np.float64)
    return backend.gae_scan(rewards, values, float(bootstrap_value), nonterminal,
                            float(gamma), float(lam))
