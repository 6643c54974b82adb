"""Microgrid simulation and learned coordination of an EV aggregator.

The package splits into a physical layer (fleet, aggregator, grid), a
decision layer (environment, policy optimization), and tooling
(evaluation, command line). Hot numeric kernels run jit-compiled or in
pure numpy; see ``backend``.
"""

from .aggregator import allocate, compute_eva_soc, power_envelope, step_aggregate
from .env import EpisodeSpec, RewardWeights, V2gEnv
from .evaluate import EvaluationReport, decision_latency, evaluate
from .fleet import Fleet, FleetConfig, availability, sample_fleet
from .grid import GridScenario, default_scenario, load_scenario, save_scenario
from .ppo import PpoConfig, Trainer, fast_config, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "EpisodeSpec",
    "EvaluationReport",
    "Fleet",
    "FleetConfig",
    "GridScenario",
    "PpoConfig",
    "RewardWeights",
    "Trainer",
    "V2gEnv",
    "allocate",
    "availability",
    "compute_eva_soc",
    "decision_latency",
    "default_scenario",
    "evaluate",
    "fast_config",
    "load_checkpoint",
    "load_scenario",
    "power_envelope",
    "sample_fleet",
    "save_checkpoint",
    "save_scenario",
    "step_aggregate",
    "__version__",
]
