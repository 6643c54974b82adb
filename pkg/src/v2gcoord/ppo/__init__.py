"""Actor-critic policy optimization built on plain numpy arrays."""

from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .gae import gae
from .loss import LossTerms, ppo_loss
from .net import Critic, GaussianActor, Mlp
from .optim import Adam
from .policy import act_greedy, gaussian_entropy, gaussian_log_prob, sample_action
from .train import PpoConfig, Trainer, TrainReport, fast_config, train

__all__ = [
    "Adam",
    "Critic",
    "GaussianActor",
    "LossTerms",
    "Mlp",
    "PpoConfig",
    "TrainReport",
    "Trainer",
    "act_greedy",
    "config_hash",
    "fast_config",
    "gae",
    "gaussian_entropy",
    "gaussian_log_prob",
    "load_checkpoint",
    "paper_config",
    "ppo_loss",
    "sample_action",
    "save_checkpoint",
    "train",
]
