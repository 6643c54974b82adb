"""Hourly decision process over the microgrid simulator.

State: the past day of total loads, the aggregate fleet SOC, and the
load variance (26 values, normalized). Action: one scalar in [0, 1],
mapped affinely onto the feasible aggregate power interval for the
hour, so no action can ever violate an SOC or charger constraint.
Reward: variance flattening plus peak-valley and SOC-boundary shaping;
scenarios with renewables add a term for absorbing generation.

Episodes follow the plug-in cycle: daily runs cover the 20 hours from
15:00 to 11:00 next day; weekly runs chain seven arrival cohorts over
one full week of hours (the last few come after the final departure,
with an empty fleet). Connection windows are tracked on an absolute
hour axis so overnight and multi-day wraps stay unambiguous.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import grid
from .aggregator import compute_eva_soc, power_envelope, step_aggregate
from .errors import ConfigurationError, DomainError, LifecycleError
from .fleet import Fleet, FleetConfig, sample_fleet
from .grid import GridScenario, RealizedSeries, load_variance, peak_valley

SLOTS_PER_DAY = 24
DAILY_START_SLOT = 15
DAILY_LENGTH = 20
WEEKLY_DAYS = 7
# a full week of hourly slots; the last cohort departs by hour 178, so
# the trailing steps run with an empty fleet
WEEKLY_LENGTH = WEEKLY_DAYS * SLOTS_PER_DAY

VARIANCE_FLOOR_KW2 = 1.0
OUT_OF_BAND_PENALTY = -100.0

MODES = ("baseload", "res", "weekly", "large_scale")


@dataclass(frozen=True)
class RewardWeights:
    """Coefficients of the composite reward; signs are load-bearing."""

    alpha: float = 10.0  # > 0, rewards low variance
    beta: float = -5.0  # < 0, penalizes peak-valley spread
    chi: float = 10.0  # > 0, rewards SOC distance from the band edge
    psi: float = -1.0  # < 0, rewards negative mean net load (RES absorption)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.beta >= 0:
            raise ConfigurationError(f"beta must be < 0, got {self.beta}")
        if self.chi <= 0:
            raise ConfigurationError(f"chi must be > 0, got {self.chi}")
        if self.psi >= 0:
            raise ConfigurationError(f"psi must be < 0, got {self.psi}")


@dataclass(frozen=True)
class EpisodeSpec:
    """What one episode consists of: scenario, fleet, mode, horizon."""

    scenario: GridScenario
    fleet: FleetConfig = field(default_factory=FleetConfig)
    mode: str = "baseload"
    start_slot: int = DAILY_START_SLOT
    length_slots: int = 0  # 0 means mode default (20 daily, 168 weekly)
    soc_target: float = 0.8
    departure_ramp_slots: int = 3
    tie_penalty: float = -100.0
    normalize_mode: str = "zscore"  # or "running"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.normalize_mode not in ("zscore", "running"):
            raise ConfigurationError(
                f"normalize_mode must be 'zscore' or 'running', got {self.normalize_mode!r}"
            )
        if not 0 <= self.start_slot < SLOTS_PER_DAY:
            raise ConfigurationError(f"start_slot must lie in [0, 24), got {self.start_slot}")
        if self.length_slots < 0:
            raise ConfigurationError(f"length_slots must be >= 0, got {self.length_slots}")
        if self.mode == "weekly" and self.scenario.n_slots != grid.SLOTS_PER_WEEK:
            raise ConfigurationError("weekly mode needs a 168-slot scenario")
        self.fleet.validate()

    @property
    def horizon(self) -> int:
        if self.length_slots:
            return self.length_slots
        return WEEKLY_LENGTH if self.mode == "weekly" else DAILY_LENGTH

    @property
    def n_days(self) -> int:
        return WEEKLY_DAYS if self.mode == "weekly" else 1

    def uses_res_reward(self) -> bool:
        if self.mode == "res":
            return True
        has_res = self.scenario.pv is not None or self.scenario.wt is not None
        return self.mode in ("weekly", "large_scale") and has_res


@dataclass(frozen=True)
class MdpObservation:
    raw: np.ndarray  # 24 past loads oldest->newest, aggregate SOC, variance
    normalized: np.ndarray


def normalize(raw: np.ndarray) -> np.ndarray:
    """Z-score across the entries of one state vector.

    The mean and spread are taken over the 26 entries themselves, not
    over features across time. A constant vector normalizes to zeros.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise DomainError("state vector contains non-finite values")
    std = raw.std()
    if std == 0.0:
        return np.zeros_like(raw)
    return (raw - raw.mean()) / std


class RunningNormalizer:
    """Per-feature running mean/std (Welford); optional alternative to
    the whole-vector z-score for experiments with mixed units."""

    def __init__(self, size: int):
        self.count = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def update(self, raw: np.ndarray) -> None:
        self.count += 1
        delta = raw - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (raw - self.mean)

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(raw)
        std = np.sqrt(self.m2 / self.count)
        out = np.zeros_like(raw)
        np.divide(raw - self.mean, std, out=out, where=std > 0)
        return out


# ---------------------------------------------------------------------------
# reward terms
# ---------------------------------------------------------------------------


def reward_baseload(
    window: np.ndarray,
    eva_soc: float,
    soc_bounds: Optional[tuple[float, float]],
    weights: RewardWeights,
) -> float:
    """Variance + peak-valley + SOC-boundary shaping for one step.

    soc_bounds is the aggregate band (min, max); None means no EV is
    connected and the SOC term drops out. Inside the band the SOC term
    rewards distance to the nearest edge; outside it a flat penalty
    applies (reachable only transiently, the allocator clips power).
    """
    var = max(load_variance(window), VARIANCE_FLOOR_KW2)
    p_max, p_min = peak_valley(window)
    r = weights.alpha / var + weights.beta * (p_max - p_min)
    if soc_bounds is not None:
        lo, hi = soc_bounds
        if eva_soc < lo - 1e-12 or eva_soc > hi + 1e-12:
            r += OUT_OF_BAND_PENALTY
        else:
            r += weights.chi * min(abs(eva_soc - lo), abs(hi - eva_soc))
    return float(r)


def reward_res(
    window: np.ndarray,
    eva_soc: float,
    soc_bounds: Optional[tuple[float, float]],
    net_load_series: np.ndarray,
    weights: RewardWeights,
) -> float:
    """Baseload reward plus renewable-absorption shaping.

    The extra term is psi / f1 with f1 the mean net exchange
    (-pv - wt + eva). Both are negative when generation dominates, so
    deeper absorption earns more; f1 = 0 guards the division to 0.
    """
    r = reward_baseload(window, eva_soc, soc_bounds, weights)
    f1 = grid.mean_net_load(net_load_series)
    if f1 != 0.0:
        r += weights.psi / f1
    return float(r)


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------


@dataclass
class TraceRow:
    slot: int
    baseload_kw: float
    pv_kw: float
    wt_kw: float
    eva_power_kw: float
    total_load_kw: float
    eva_soc: float
    variance_kw2: float
    reward: float


class V2gEnv:
    """Stateful MDP over one scenario + fleet configuration.

    reset() draws a fresh fleet (and noise realization) from a
    deterministic per-episode seed stream; step() advances one hour.
    A single instance is not thread-safe; run one per rollout worker.
    """

    OBS_SIZE = SLOTS_PER_DAY + 2

    def __init__(self, spec: EpisodeSpec, weights: Optional[RewardWeights] = None, seed: int = 0):
        self.spec = spec
        self.weights = weights if weights is not None else RewardWeights()
        self.seed = int(seed)
        self._episode = -1
        self._active = False
        self._running_norm = (
            RunningNormalizer(self.OBS_SIZE) if spec.normalize_mode == "running" else None
        )
        self.trace: list[TraceRow] = []

    # -- episode construction ------------------------------------------------

    def _build_fleet(self, episode_entropy) -> None:
        """Sample one cohort per day and pin each EV's absolute window."""
        cohorts = []
        arr_abs = []
        dep_abs = []
        n = self.spec.fleet.n_evs
        for day in range(self.spec.n_days):
            seed = int(np.random.SeedSequence(episode_entropy + [day]).generate_state(1)[0])
            cohort = sample_fleet(replace(self.spec.fleet, rng_seed=seed))
            cohort = replace(cohort, ids=cohort.ids + day * n)
            cohorts.append(cohort)
            arr_abs.append(cohort.arrival_slot + day * SLOTS_PER_DAY)
            # departures land on the morning after each arrival day
            dep_abs.append(cohort.departure_slot + (day + 1) * SLOTS_PER_DAY)
        fleet = cohorts[0]
        for extra in cohorts[1:]:
            fleet = fleet.concat(extra)
        self.fleet = fleet
        self._arr_abs = np.concatenate(arr_abs)
        self._dep_abs = np.concatenate(dep_abs)

    def _connected(self, slot: int) -> np.ndarray:
        return (self._arr_abs <= slot) & (slot < self._dep_abs)

    def _effective_bounds(self, slot: int) -> tuple[np.ndarray, np.ndarray]:
        # min bound ramps to the departure target over the last hours
        left = (self._dep_abs - slot - 1).astype(np.float64)
        ramp = self.spec.departure_ramp_slots
        target = self.spec.soc_target
        if ramp > 0:
            ramped = target - (target - self.fleet.soc_min) * left / ramp
        else:
            ramped = np.where(left == 0, target, self.fleet.soc_min)
        lo = np.maximum(self.fleet.soc_min, ramped)
        return lo, self.fleet.soc_max

    def _series_index(self, slot: int) -> int:
        return slot % self.realized.baseload_kw.shape[0]

    def _zero_eva_load(self, slot: int) -> float:
        return self.realized.total_load(self._series_index(slot), 0.0)

    # -- public API ------------------------------------------------------------

    def reset(self, seed: Optional[int] = None) -> MdpObservation:
        """Start a new episode; identical seeds reproduce it exactly."""
        if seed is not None:
            self.seed = int(seed)
            self._episode = 0
        else:
            self._episode += 1
        entropy = [self.seed, self._episode]
        noise_rng = np.random.default_rng(
            np.random.SeedSequence(entropy + [10_000])
        )
        self.realized: RealizedSeries = self.spec.scenario.realize(
            noise_rng if self.spec.scenario.noise_pct > 0 else None
        )
        self._build_fleet(entropy)
        self.slot = self.spec.start_slot
        self._steps = 0
        self._active = True
        self.trace = []
        self._net_history = deque(maxlen=SLOTS_PER_DAY)
        self._load_history = deque(maxlen=SLOTS_PER_DAY)
        for s in range(self.slot - SLOTS_PER_DAY, self.slot):
            self._load_history.append(self._zero_eva_load(s))
            self._net_history.append(self.realized.net_load(self._series_index(s), 0.0))
        return self._observe()

    def _observe(self) -> MdpObservation:
        mask = self._connected(self.slot) if self._active else None
        if mask is not None and mask.any():
            soc = compute_eva_soc(self.fleet, mask, 0.0, 1.0)
        else:
            soc = 0.0
        window = np.asarray(self._load_history, dtype=np.float64)
        raw = np.concatenate([window, [soc, load_variance(window)]])
        if self._running_norm is not None:
            self._running_norm.update(raw)
            normalized = self._running_norm.normalize(raw)
        else:
            normalized = normalize(raw)
        return MdpObservation(raw=raw, normalized=normalized)

    def step(self, action: float) -> tuple[MdpObservation, float, bool, dict]:
        if not self._active:
            raise LifecycleError("step() called on an inactive episode; call reset() first")
        if not -1e-9 <= action <= 1 + 1e-9:
            raise DomainError(f"action must lie in [0, 1], got {action}")
        action = float(min(max(action, 0.0), 1.0))

        slot = self.slot
        mask = self._connected(slot)
        lo_b, hi_b = self._effective_bounds(slot)
        env_lo, env_hi = power_envelope(self.fleet, mask, 1.0, soc_lo=lo_b, soc_hi=hi_b)
        command = env_lo + action * (env_hi - env_lo)
        self.fleet, eva_state, alloc = step_aggregate(
            self.fleet, mask, command, 1.0, soc_lo=lo_b, soc_hi=hi_b
        )
        applied = alloc.applied_eva_power_kw

        idx = self._series_index(slot)
        total = self.realized.total_load(idx, applied)
        self._load_history.append(total)
        self._net_history.append(self.realized.net_load(idx, applied))
        window = np.asarray(self._load_history, dtype=np.float64)

        soc_bounds = (
            (eva_state.soc_min_k, eva_state.soc_max_k) if eva_state.n_connected else None
        )
        eva_soc = eva_state.soc if eva_state.n_connected else 0.0
        if self.spec.uses_res_reward():
            reward = reward_res(
                window, eva_soc, soc_bounds, np.asarray(self._net_history), self.weights
            )
        else:
            reward = reward_baseload(window, eva_soc, soc_bounds, self.weights)
        tie_violated = grid.tie_line_violated(self.spec.scenario, total)
        if tie_violated:
            reward += self.spec.tie_penalty

        variance = load_variance(window)
        self.trace.append(
            TraceRow(
                slot=slot,
                baseload_kw=float(self.realized.baseload_kw[idx]),
                pv_kw=float(self.realized.pv_kw[idx]),
                wt_kw=float(self.realized.wt_kw[idx]),
                eva_power_kw=applied,
                total_load_kw=total,
                eva_soc=eva_soc,
                variance_kw2=variance,
                reward=reward,
            )
        )

        self._steps += 1
        self.slot += 1
        done = self._steps >= self.spec.horizon
        if done:
            self._active = False
        obs = self._observe() if not done else self._final_observation(window)
        info = {
            "slot": slot,
            "eva_power_kw": command,
            "applied_eva_power_kw": applied,
            "kappa": alloc.kappa,
            "n_clipped": int(alloc.clipped_ids.size),
            "n_connected": eva_state.n_connected,
            "envelope_kw": (env_lo, env_hi),
            "total_load_kw": total,
            "variance_kw2": variance,
            "eva_soc": eva_soc,
            "tie_violated": tie_violated,
            "allocation": alloc,
            "mask": mask,
        }
        return obs, float(reward), done, info

    def _final_observation(self, window: np.ndarray) -> MdpObservation:
        # terminal convenience view; not used for decisions
        raw = np.concatenate([window, [0.0, load_variance(window)]])
        if self._running_norm is not None:
            normalized = self._running_norm.normalize(raw)
        else:
            normalized = normalize(raw)
        return MdpObservation(raw=raw, normalized=normalized)

    # -- export ------------------------------------------------------------

    def write_trace(self, path) -> None:
        """Per-step CSV: slot,baseload_kw,pv_kw,wt_kw,eva_power_kw,total_load_kw,eva_soc,variance_kw2,reward."""
        write_trace_rows(self.trace, path)


def write_trace_rows(rows: list[TraceRow], path) -> None:
    """CSV export for any trace row list; floats round-trip via repr."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            (
                "slot",
                "baseload_kw",
                "pv_kw",
                "wt_kw",
                "eva_power_kw",
                "total_load_kw",
                "eva_soc",
                "variance_kw2",
                "reward",
            )
        )
        for row in rows:
            writer.writerow(
                (
                    row.slot,
                    repr(row.baseload_kw),
                    repr(row.pv_kw),
                    repr(row.wt_kw),
                    repr(row.eva_power_kw),
                    repr(row.total_load_kw),
                    repr(row.eva_soc),
                    repr(row.variance_kw2),
                    repr(row.reward),
                )
            )
