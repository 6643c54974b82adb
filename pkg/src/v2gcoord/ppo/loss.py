"""Clipped-surrogate objective with hand-derived gradients.

The optimized quantity is J = L_clip - c1 * L_value + c2 * entropy;
the returned loss is -J so that gradient descent maximizes J. Gradients
flow through the probability ratio into the actor (mean and log-std)
and through the squared error into the critic. No autodiff anywhere:
each path is written out, and the finite-difference suite checks every
component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from .net import Critic, GaussianActor
from .policy import gaussian_entropy, gaussian_log_prob


@dataclass(frozen=True)
class LossTerms:
    total: float
    surrogate: float
    value: float
    entropy: float

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "surrogate": self.surrogate,
            "value": self.value,
            "entropy": self.entropy,
        }


def ppo_loss(
    actor: GaussianActor,
    critic: Critic,
    observations: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    value_targets: np.ndarray,
    clip_eps: float,
    value_coeff: float,
    entropy_coeff: float,
) -> tuple[LossTerms, list[np.ndarray], list[np.ndarray]]:
    """Loss and gradients for one minibatch.

    value_targets are in the critic's output units (the trainer owns
    any return scaling). Returns (terms, actor_grads, critic_grads)
    with gradient lists aligned to each network's .params.
    """
    obs = np.asarray(observations, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    old_log_probs = np.asarray(old_log_probs, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    value_targets = np.asarray(value_targets, dtype=np.float64)
    n = obs.shape[0]

    mean, actor_cache = actor.forward(obs)
    log_std = float(actor.log_std[0])
    var = np.exp(2.0 * log_std)
    log_probs = gaussian_log_prob(actions, mean, log_std)
    ratio = np.exp(log_probs - old_log_probs)

    surr_raw = ratio * advantages
    surr_clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surrogate = float(np.minimum(surr_raw, surr_clipped).mean())

    values, critic_cache = critic.forward(obs)
    value_err = values - value_targets
    value_loss = float((value_err**2).mean())

    entropy = gaussian_entropy(log_std)
    total = -(surrogate - value_coeff * value_loss + entropy_coeff * entropy)

    if not np.isfinite(total):
        raise DivergenceError(
            "non-finite loss: "
            f"surrogate={surrogate}, value={value_loss}, entropy={entropy}, "
            f"ratio range [{ratio.min()}, {ratio.max()}]"
        )

    # dJ/dlogpi: the unclipped branch carries gradient (ties included,
    # which covers every ratio inside the clip band)
    active = surr_raw <= surr_clipped
    g_logp = ratio * advantages * active / n
    d_mean = g_logp * (actions - mean) / var
    d_log_std = float((g_logp * ((actions - mean) ** 2 / var - 1.0)).sum()) + entropy_coeff
    actor_grads = actor.backward(actor_cache, -d_mean, -d_log_std)

    critic_grads = critic.backward(critic_cache, value_coeff * 2.0 * value_err / n)

    for g in actor_grads + critic_grads:
        if not np.all(np.isfinite(g)):
            raise DivergenceError(
                f"non-finite gradient in a batch of {n}; "
                f"ratio range [{ratio.min()}, {ratio.max()}], "
                f"advantage range [{advantages.min()}, {advantages.max()}]"
            )
    return (
        LossTerms(total=total, surrogate=surrogate, value=value_loss, entropy=entropy),
        actor_grads,
        critic_grads,
    )
