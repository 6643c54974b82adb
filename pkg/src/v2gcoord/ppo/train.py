"""Rollout/update loop tying the environment to the policy optimizer.

Each iteration, Y workers collect fixed-length trajectory segments
under the behavior policy (a lagged parameter copy), advantages come
from truncated GAE under the current critic, and several epochs of
shuffled minibatches flow through the clipped-surrogate loss and Adam.
The behavior copy re-syncs every `old_policy_sync_steps` optimizer
updates. Workers run serially on one thread: with fixed seeds and a
fixed worker count, training is bit-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..env import EpisodeSpec, RewardWeights, V2gEnv
from ..errors import ConfigurationError, DivergenceError
from .checkpoint import save_checkpoint
from .gae import gae
from .loss import LossTerms, ppo_loss
from .net import Critic, GaussianActor
from .optim import Adam
from .policy import sample_action


@dataclass(frozen=True)
class PpoConfig:
    """Optimization hyperparameters. The defaults use tiny learning
    rates sized for runs of hundreds of thousands of episodes; see
    fast_config for a preset that converges on a desktop budget."""

    lr_actor: float = 1e-6
    lr_critic: float = 2e-6
    gamma: float = 0.95
    clip_eps: float = 0.2
    old_policy_sync_steps: int = 10
    minibatch: int = 32
    episodes: int = 300_000
    horizon: int = 20
    actors: int = 4
    gae_lambda: float = 0.95
    value_coeff: float = 0.5
    entropy_coeff: float = 0.01
    epochs: int = 4
    hidden: tuple[int, ...] = (64, 64)
    log_std_init: float = float(np.log(0.3))
    log_std_min: float = float(np.log(0.02))
    log_std_max: float = 0.0
    normalize_advantages: bool = True
    return_scale: float = 1.0
    checkpoint_every: int = 0  # episodes; 0 = only on completion

    def __post_init__(self):
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            raise ConfigurationError("learning rates must be > 0")
        if not 0 < self.gamma <= 1:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.clip_eps <= 0:
            raise ConfigurationError(f"clip_eps must be > 0, got {self.clip_eps}")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigurationError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}")
        for name in ("old_policy_sync_steps", "minibatch", "horizon", "actors", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.episodes < 0:
            raise ConfigurationError(f"episodes must be >= 0, got {self.episodes}")
        if self.return_scale <= 0:
            raise ConfigurationError(f"return_scale must be > 0, got {self.return_scale}")
        if self.log_std_min > self.log_std_max:
            raise ConfigurationError("log_std_min must not exceed log_std_max")


def fast_config(**overrides) -> PpoConfig:
    """Reduced-budget preset: learning rates raised to converge within
    thousands of episodes instead of hundreds of thousands, returns
    scaled so the critic regresses O(1) targets, and the exploration
    floor lifted so the policy keeps probing while the budget lasts."""
    defaults = dict(
        lr_actor=1e-3,
        lr_critic=1e-3,
        episodes=10_000,
        entropy_coeff=0.01,
        log_std_min=float(np.log(0.1)),
        return_scale=1000.0,
    )
    defaults.update(overrides)
    return PpoConfig(**defaults)


@dataclass
class Segment:
    """One worker's fixed-length slice of experience."""

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    bootstrap_obs: np.ndarray | None  # None when the segment ended an episode
    finished_episodes: list = field(default_factory=list)  # (reward, final variance)


@dataclass
class TrainReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r["reward"] for r in self.rows])

    @property
    def variances(self) -> np.ndarray:
        return np.array([r["variance_kw2"] for r in self.rows])

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "TrainReport":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return cls(rows=rows)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


class Trainer:
    """Owns the networks, optimizers, worker environments, and report."""

    def __init__(
        self,
        spec: EpisodeSpec,
        config: PpoConfig,
        weights: RewardWeights | None = None,
        seed: int = 0,
    ):
        self.spec = spec
        self.config = config
        self.weights = weights if weights is not None else RewardWeights()
        self.seed = int(seed)

        param_rng = np.random.default_rng(_derive_seed(self.seed, 1))
        obs_size = V2gEnv.OBS_SIZE
        self.actor = GaussianActor(obs_size, config.hidden, param_rng, config.log_std_init)
        self.critic = Critic(obs_size, config.hidden, param_rng)
        self.actor_old = GaussianActor(obs_size, config.hidden, param_rng, config.log_std_init)
        self._sync_old()
        self.opt_actor = Adam(self.actor.params, lr=config.lr_actor)
        self.opt_critic = Adam(self.critic.params, lr=config.lr_critic)

        self.envs = [
            V2gEnv(spec, self.weights, seed=_derive_seed(self.seed, 2, w))
            for w in range(config.actors)
        ]
        self._env_active = [False] * config.actors
        self._ep_reward = [0.0] * config.actors
        self.sample_rngs = [
            np.random.default_rng(_derive_seed(self.seed, 3, w)) for w in range(config.actors)
        ]
        self.shuffle_rng = np.random.default_rng(_derive_seed(self.seed, 4))

        self.updates_done = 0
        self.episodes_done = 0
        self.report = TrainReport()
        self.last_loss: LossTerms | None = None
        self._last_good: tuple[np.ndarray, np.ndarray, int] | None = None

    # -- policy plumbing ---------------------------------------------------

    def _sync_old(self) -> None:
        self.actor_old.set_flat(self.actor.get_flat())

    # -- experience collection ----------------------------------------------

    def _collect_segment(self, w: int) -> Segment:
        env = self.envs[w]
        rng = self.sample_rngs[w]
        horizon = self.config.horizon
        obs_buf = np.empty((horizon, V2gEnv.OBS_SIZE))
        act_buf = np.empty(horizon)
        logp_buf = np.empty(horizon)
        rew_buf = np.empty(horizon)
        done_buf = np.zeros(horizon)
        finished = []

        if not self._env_active[w]:
            obs = env.reset()
            self._env_active[w] = True
            self._ep_reward[w] = 0.0
        else:
            obs = env._observe()

        log_std = float(self.actor_old.log_std[0])
        steps = 0
        bootstrap_obs = None
        for k in range(horizon):
            mean, _ = self.actor_old.forward(obs.normalized[None, :])
            mu = float(mean[0])
            if not math.isfinite(mu):
                raise DivergenceError("actor produced a non-finite action mean")
            action, logp = sample_action(mu, log_std, rng)
            next_obs, reward, done, info = env.step(action)
            obs_buf[k] = obs.normalized
            act_buf[k] = action
            logp_buf[k] = logp
            rew_buf[k] = reward
            self._ep_reward[w] += reward
            steps += 1
            if done:
                done_buf[k] = 1.0
                finished.append((self._ep_reward[w], env.trace[-1].variance_kw2))
                self._env_active[w] = False
                self._ep_reward[w] = 0.0
                break
            obs = next_obs
        if steps == horizon and not done_buf[steps - 1]:
            bootstrap_obs = obs.normalized.copy()
        return Segment(
            observations=obs_buf[:steps],
            actions=act_buf[:steps],
            log_probs=logp_buf[:steps],
            rewards=rew_buf[:steps],
            dones=done_buf[:steps],
            bootstrap_obs=bootstrap_obs,
            finished_episodes=finished,
        )

    # -- optimization -------------------------------------------------------

    def _update(self, segments: list[Segment]) -> None:
        cfg = self.config
        all_obs, all_act, all_logp, all_adv, all_vtarg = [], [], [], [], []
        for seg in segments:
            values_scaled, _ = self.critic.forward(seg.observations)
            values = values_scaled * cfg.return_scale
            if seg.bootstrap_obs is not None:
                v_boot, _ = self.critic.forward(seg.bootstrap_obs[None, :])
                bootstrap = float(v_boot[0]) * cfg.return_scale
            else:
                bootstrap = 0.0
            adv = gae(seg.rewards, values, bootstrap, cfg.gamma, cfg.gae_lambda, seg.dones)
            returns = adv + values
            all_obs.append(seg.observations)
            all_act.append(seg.actions)
            all_logp.append(seg.log_probs)
            all_adv.append(adv)
            all_vtarg.append(returns / cfg.return_scale)
        obs = np.concatenate(all_obs)
        actions = np.concatenate(all_act)
        old_logp = np.concatenate(all_logp)
        adv = np.concatenate(all_adv)
        vtarg = np.concatenate(all_vtarg)
        if cfg.normalize_advantages:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        n = obs.shape[0]
        for _ in range(cfg.epochs):
            order = self.shuffle_rng.permutation(n)
            for start in range(0, n, cfg.minibatch):
                mb = order[start : start + cfg.minibatch]
                terms, a_grads, c_grads = ppo_loss(
                    self.actor,
                    self.critic,
                    obs[mb],
                    actions[mb],
                    old_logp[mb],
                    adv[mb],
                    vtarg[mb],
                    cfg.clip_eps,
                    cfg.value_coeff,
                    cfg.entropy_coeff,
                )
                self.opt_actor.step(self.actor.params, a_grads)
                self.opt_critic.step(self.critic.params, c_grads)
                self.actor.log_std[...] = np.clip(
                    self.actor.log_std, cfg.log_std_min, cfg.log_std_max
                )
                self.last_loss = terms
                self.updates_done += 1
                if self.updates_done % cfg.old_policy_sync_steps == 0:
                    self._sync_old()

    # -- main loop ------------------------------------------------------------

    def train(self, checkpoint_path=None, report_path=None) -> TrainReport:
        """Run to the configured episode budget.

        On divergence the last healthy parameters are written to
        checkpoint_path (when given) and the error re-raised with that
        path attached.
        """
        cfg = self.config
        self._snapshot_good()
        try:
            while self.episodes_done < cfg.episodes:
                segments = [self._collect_segment(w) for w in range(cfg.actors)]
                self._update(segments)
                loss_dict = self.last_loss.as_dict() if self.last_loss else {}
                for seg in segments:
                    for ep_reward, final_var in seg.finished_episodes:
                        if self.episodes_done >= cfg.episodes:
                            break
                        self.report.rows.append(
                            {
                                "episode": self.episodes_done,
                                "reward": float(ep_reward),
                                "variance_kw2": float(final_var),
                                "loss_terms": loss_dict,
                            }
                        )
                        self.episodes_done += 1
                self._snapshot_good()
                if (
                    checkpoint_path
                    and cfg.checkpoint_every
                    and self.episodes_done % cfg.checkpoint_every < cfg.actors
                ):
                    self.save(checkpoint_path)
        except DivergenceError as exc:
            if checkpoint_path and self._last_good is not None:
                self._restore_good()
                self.save(checkpoint_path)
                raise DivergenceError(str(exc), checkpoint_path=str(checkpoint_path)) from exc
            raise
        if checkpoint_path:
            self.save(checkpoint_path)
        if report_path:
            self.report.write_jsonl(report_path)
        return self.report

    def save(self, path) -> None:
        save_checkpoint(
            path,
            self.actor,
            self.critic,
            self.opt_actor,
            self.opt_critic,
            episode=self.episodes_done,
            config=self.config,
        )

    def _snapshot_good(self) -> None:
        self._last_good = (self.actor.get_flat(), self.critic.get_flat(), self.episodes_done)

    def _restore_good(self) -> None:
        actor_flat, critic_flat, episodes = self._last_good
        self.actor.set_flat(actor_flat)
        self.critic.set_flat(critic_flat)
        self.episodes_done = episodes


def train(
    spec: EpisodeSpec,
    config: PpoConfig,
    weights: RewardWeights | None = None,
    seed: int = 0,
    checkpoint_path=None,
    report_path=None,
) -> TrainReport:
    """One-call training entry point; see Trainer for the mechanics."""
    trainer = Trainer(spec, config, weights=weights, seed=seed)
    return trainer.train(checkpoint_path=checkpoint_path, report_path=report_path)
