"""Uncontrolled-charging baseline and the episode evaluation harness.

evaluate() rolls one episode under a policy (greedy checkpoint or the
plug-and-charge baseline), rolls the baseline on the same scenario and
seed, and reduces both traces to the headline metrics: trailing-window
load variance at departure, peak/valley, tariff-weighted cost, SOC
violations (always zero by construction), and per-decision latency.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregator import power_envelope
from .env import EpisodeSpec, RewardWeights, TraceRow, V2gEnv
from .errors import ConfigurationError
from .fleet import Fleet, availability
from .grid import charging_cost
from .ppo.checkpoint import load_checkpoint
from .ppo.net import GaussianActor
from .ppo.policy import act_greedy

UNCONTROLLED = "uncontrolled"


def uncontrolled_policy(fleet: Fleet, mask: np.ndarray, slot: int, dt_h: float = 1.0) -> float:
    """Plug-and-charge power draw: every connected EV charges at full
    rate (headroom-limited near the top) until it hits soc_max. Ignores
    tariff and grid state entirely; never discharges."""
    if not np.any(mask):
        return 0.0
    headroom_kw = (fleet.soc_max[mask] - fleet.soc[mask]) * fleet.capacity_kwh[mask] / dt_h
    return float(np.minimum(fleet.p_ch_max_kw[mask], np.maximum(headroom_kw, 0.0)).sum())


@dataclass(frozen=True)
class LatencyStats:
    min_ms: float
    mean_ms: float
    median_ms: float
    p95_ms: float
    max_ms: float

    @classmethod
    def from_samples(cls, seconds: list) -> "LatencyStats":
        ms = np.asarray(seconds, dtype=np.float64) * 1e3
        return cls(
            min_ms=float(ms.min()),
            mean_ms=float(ms.mean()),
            median_ms=float(np.median(ms)),
            p95_ms=float(np.percentile(ms, 95)),
            max_ms=float(ms.max()),
        )

    def as_dict(self) -> dict:
        return {
            "min_ms": self.min_ms,
            "mean_ms": self.mean_ms,
            "median_ms": self.median_ms,
            "p95_ms": self.p95_ms,
            "max_ms": self.max_ms,
        }


@dataclass
class EvaluationReport:
    """One policy run reduced to scalars, next to its same-seed
    uncontrolled baseline. Latency is wall-clock and therefore lives
    outside the deterministic metric set."""

    mode: str
    seed: int
    policy: str
    trace: list[TraceRow] = field(repr=False, default_factory=list)
    baseline_trace: list[TraceRow] = field(repr=False, default_factory=list)
    journal: list[dict] = field(repr=False, default_factory=list)
    soc_quantiles: list[dict] = field(repr=False, default_factory=list)
    departure_variance_kw2: float = 0.0
    arrival_variance_kw2: float = 0.0
    baseline_departure_variance_kw2: float = 0.0
    variance_reduction_pct: float = 0.0
    peak_kw: float = 0.0
    valley_kw: float = 0.0
    baseline_peak_kw: float = 0.0
    baseline_valley_kw: float = 0.0
    cost: float = 0.0
    baseline_cost: float = 0.0
    cost_reduction_pct: float = 0.0
    total_reward: float = 0.0
    soc_violations: int = 0
    latency: LatencyStats | None = None

    def metrics_dict(self) -> dict:
        """The deterministic scalars (identical for identical runs)."""
        return {
            "mode": self.mode,
            "seed": self.seed,
            "policy": self.policy,
            "departure_variance_kw2": self.departure_variance_kw2,
            "arrival_variance_kw2": self.arrival_variance_kw2,
            "baseline_departure_variance_kw2": self.baseline_departure_variance_kw2,
            "variance_reduction_pct": self.variance_reduction_pct,
            "peak_kw": self.peak_kw,
            "valley_kw": self.valley_kw,
            "baseline_peak_kw": self.baseline_peak_kw,
            "baseline_valley_kw": self.baseline_valley_kw,
            "cost": self.cost,
            "baseline_cost": self.baseline_cost,
            "cost_reduction_pct": self.cost_reduction_pct,
            "total_reward": self.total_reward,
            "soc_violations": self.soc_violations,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metrics_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_latency_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.latency.as_dict() if self.latency else {}, fh, indent=1, sort_keys=True)
            fh.write("\n")


def resolve_policy(policy) -> GaussianActor | None:
    """None means the uncontrolled baseline; otherwise a greedy actor.

    Accepts the literal "uncontrolled", the baseline function itself,
    an in-memory actor, or a checkpoint path.
    """
    if policy is None or policy is uncontrolled_policy or policy == UNCONTROLLED:
        return None
    if isinstance(policy, GaussianActor):
        actor = policy
    elif isinstance(policy, (str, Path)):
        actor = load_checkpoint(policy)["actor"]
    else:
        raise ConfigurationError(
            f"policy must be {UNCONTROLLED!r}, an actor, or a checkpoint path, got {type(policy)!r}"
        )
    if actor.mlp.sizes[0] != V2gEnv.OBS_SIZE:
        raise ConfigurationError(
            f"checkpoint observes {actor.mlp.sizes[0]} features, "
            f"the environment emits {V2gEnv.OBS_SIZE}"
        )
    return actor


def _run_episode(actor, spec, weights, seed):
    """Roll one episode; returns (env, per-slot connected SOC arrays,
    per-step latency seconds, total reward, SOC-bound violations)."""
    env = V2gEnv(spec, weights, seed=seed)
    obs = env.reset()
    soc_per_slot: list[tuple[int, np.ndarray]] = []
    journal: list[dict] = []
    latency: list[float] = []
    total_reward = 0.0
    violations = 0
    done = False
    while not done:
        t0 = time.perf_counter()
        action = 1.0 if actor is None else act_greedy(actor, obs.normalized)
        obs, reward, done, info = env.step(action)
        latency.append(time.perf_counter() - t0)
        total_reward += reward
        journal.append(
            {
                "slot": int(info["slot"]),
                "kappa": float(info["kappa"]),
                "n_clipped": int(info["n_clipped"]),
                "eva_power_kw": float(info["applied_eva_power_kw"]),
                "n_connected": int(info["n_connected"]),
                "envelope_lo_kw": float(info["envelope_kw"][0]),
                "envelope_hi_kw": float(info["envelope_kw"][1]),
            }
        )
        mask = info["mask"]
        if np.any(mask):
            socs = env.fleet.soc[mask]
            violations += int(
                np.sum(
                    (socs < env.fleet.soc_min[mask] - 1e-9)
                    | (socs > env.fleet.soc_max[mask] + 1e-9)
                )
            )
            soc_per_slot.append((info["slot"], socs.copy()))
    return env, soc_per_slot, journal, latency, total_reward, violations


def soc_distribution_trace(soc_per_slot) -> list[dict]:
    """Five-number summary of connected-EV SOCs for each slot that had
    anyone plugged in (violin-plot feed)."""
    rows = []
    for slot, socs in soc_per_slot:
        socs = np.asarray(socs, dtype=np.float64)
        if socs.size == 0:
            continue
        q25, median, q75 = np.quantile(socs, [0.25, 0.5, 0.75])
        rows.append(
            {
                "slot": int(slot),
                "min": float(socs.min()),
                "q25": float(q25),
                "median": float(median),
                "q75": float(q75),
                "max": float(socs.max()),
            }
        )
    return rows


def _arrival_variance(trace: list[TraceRow], arrival_cutoff_slot: int) -> float:
    for row in trace:
        if row.slot % 24 == arrival_cutoff_slot % 24:
            return row.variance_kw2
    return trace[0].variance_kw2


def _reduction_pct(baseline: float, value: float) -> float:
    if abs(baseline) < 1e-12:
        return 0.0
    return (baseline - value) / abs(baseline) * 100.0


def evaluate(
    policy,
    spec: EpisodeSpec,
    seed: int = 0,
    weights: RewardWeights | None = None,
) -> EvaluationReport:
    """Run `policy` and the uncontrolled baseline on the same scenario
    and seed and compare. When the policy IS the baseline, the same
    trace backs both sides and every reduction is exactly zero."""
    actor = resolve_policy(policy)
    env, soc_per_slot, journal, latency, total_reward, violations = _run_episode(
        actor, spec, weights, seed
    )
    if actor is None:
        base_env = env
    else:
        base_env, _, _, _, _, _ = _run_episode(None, spec, weights, seed)

    trace = env.trace
    base_trace = base_env.trace
    slots = [row.slot for row in trace]
    powers = [row.eva_power_kw for row in trace]
    tariff = spec.scenario.tariff
    cost = charging_cost(slots, powers, tariff)
    base_cost = charging_cost(
        [row.slot for row in base_trace], [row.eva_power_kw for row in base_trace], tariff
    )
    totals = np.array([row.total_load_kw for row in trace])
    base_totals = np.array([row.total_load_kw for row in base_trace])

    arrival_cutoff = int(round(spec.fleet.arrival_hi))
    report = EvaluationReport(
        mode=spec.mode,
        seed=int(seed),
        policy=UNCONTROLLED if actor is None else "greedy",
        trace=trace,
        baseline_trace=base_trace,
        journal=journal,
        soc_quantiles=soc_distribution_trace(soc_per_slot),
        departure_variance_kw2=trace[-1].variance_kw2,
        arrival_variance_kw2=_arrival_variance(trace, arrival_cutoff),
        baseline_departure_variance_kw2=base_trace[-1].variance_kw2,
        variance_reduction_pct=_reduction_pct(
            base_trace[-1].variance_kw2, trace[-1].variance_kw2
        ),
        peak_kw=float(totals.max()),
        valley_kw=float(totals.min()),
        baseline_peak_kw=float(base_totals.max()),
        baseline_valley_kw=float(base_totals.min()),
        cost=cost,
        baseline_cost=base_cost,
        cost_reduction_pct=_reduction_pct(base_cost, cost),
        total_reward=total_reward,
        soc_violations=violations,
        latency=LatencyStats.from_samples(latency),
    )
    return report


def decision_latency(actor: GaussianActor, fleet: Fleet, slot: int, observation: np.ndarray,
                     dt_h: float = 1.0, repeats: int = 1) -> list[float]:
    """Time the full decision path for one slot: greedy action, power
    envelope, and per-EV allocation. Returns seconds per repeat."""
    from .aggregator import allocate

    samples = []
    mask = availability(fleet, slot % 24)
    for _ in range(repeats):
        t0 = time.perf_counter()
        action = act_greedy(actor, observation)
        lo, hi = power_envelope(fleet, mask, dt_h)
        command = lo + action * (hi - lo)
        if np.any(mask):
            allocate(fleet, mask, command, dt_h)
        samples.append(time.perf_counter() - t0)
    return samples


def markdown_table(report: EvaluationReport) -> str:
    """Comparison table: baseline vs policy with reductions."""
    rows = [
        ("departure-window variance (kW^2)",
         report.baseline_departure_variance_kw2, report.departure_variance_kw2,
         f"{report.variance_reduction_pct:.2f}%"),
        ("peak load (kW)", report.baseline_peak_kw, report.peak_kw, ""),
        ("valley load (kW)", report.baseline_valley_kw, report.valley_kw, ""),
        ("charging cost", report.baseline_cost, report.cost,
         f"{report.cost_reduction_pct:.2f}%"),
    ]
    lines = [
        "| metric | uncontrolled | policy | reduction |",
        "| --- | --- | --- | --- |",
    ]
    for name, base, value, red in rows:
        lines.append(f"| {name} | {base:.1f} | {value:.1f} | {red} |")
    return "\n".join(lines)
