"""EV aggregator: aggregate SOC, feasible power envelope, disaggregation.

The aggregator treats all plugged-in EVs as one storage unit. A
commanded aggregate power is split across vehicles so that every
unclipped EV shares one buffer factor: each moves the same fraction of
its SOC headroom (charging) or its SOC depth above the floor
(discharging). Charger-limit clipping is followed by re-solving the
factor over the remaining vehicles until the command is conserved.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DomainError, InfeasibleError
from .fleet import Fleet

CONSERVATION_RTOL = 1e-9


@dataclass(frozen=True)
class EvaState:
    """Aggregate view of the connected sub-fleet at one timeslot."""

    soc: float
    connected_energy_kwh: float
    n_connected: int
    soc_min_k: float
    soc_max_k: float
    p_envelope: tuple[float, float]  # (max discharge kW <= charge kW)


@dataclass(frozen=True)
class AllocationResult:
    """Outcome of splitting one aggregate command across the fleet.

    power_kw spans the full fleet (zeros where disconnected). kappa is
    the shared buffer factor of the final solve: positive while
    charging, negative while discharging, zero for a null command.
    saturated flags the degenerate case where every connected EV was
    pinned and the command could not be met exactly; applied then
    reports the achievable total.
    """

    power_kw: np.ndarray
    applied_eva_power_kw: float
    kappa: float
    clipped_ids: np.ndarray
    n_iterations: int
    saturated: bool


def _bounds(fleet: Fleet, soc_lo, soc_hi):
    lo = fleet.soc_min if soc_lo is None else np.asarray(soc_lo, dtype=np.float64)
    hi = fleet.soc_max if soc_hi is None else np.asarray(soc_hi, dtype=np.float64)
    if lo.shape != fleet.soc.shape or hi.shape != fleet.soc.shape:
        raise DomainError("soc bound arrays must match the fleet length")
    return lo, hi


def compute_eva_soc(fleet: Fleet, mask: np.ndarray, eva_power_kw: float, dt_h: float) -> float:
    """Aggregate SOC after one interval at the given aggregate power.

    (P * dt + sum of SOC_n * Q_n) / (sum of Q_n), over connected EVs.
    """
    q = fleet.capacity_kwh[mask]
    if q.size == 0:
        raise DomainError("aggregate SOC is undefined with no connected EVs")
    denom = float(q.sum())
    return float((eva_power_kw * dt_h + float((fleet.soc[mask] * q).sum())) / denom)


def power_envelope(
    fleet: Fleet,
    mask: np.ndarray,
    dt_h: float,
    soc_lo=None,
    soc_hi=None,
) -> tuple[float, float]:
    """Feasible aggregate power interval (lo, hi) in kW for this hour.

    hi sums each connected EV's charge limit min(p_ch_max,
    headroom*Q/dt); lo mirrors it against the minimum bound. With a
    rising minimum near departure, lo can be positive: the aggregate
    MUST charge at least that much. Empty connected set gives (0, 0).
    """
    if not np.any(mask):
        return (0.0, 0.0)
    lo_b, hi_b = _bounds(fleet, soc_lo, soc_hi)
    floor, ceil, _, _ = backend.ev_power_bounds(
        fleet.soc[mask],
        fleet.capacity_kwh[mask],
        fleet.p_ch_max_kw[mask],
        fleet.p_dis_max_kw[mask],
        lo_b[mask],
        hi_b[mask],
        dt_h,
    )
    return (float(floor.sum()), float(ceil.sum()))


def allocate(
    fleet: Fleet,
    mask: np.ndarray,
    eva_power_kw: float,
    dt_h: float,
    soc_lo=None,
    soc_hi=None,
) -> AllocationResult:
    """Split an aggregate power command across connected EVs.

    Raises InfeasibleError (carrying the achievable total) when the
    command lies outside the envelope; the caller is expected to clip
    against power_envelope first.
    """
    n = len(fleet)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        if eva_power_kw != 0.0:
            raise InfeasibleError(
                f"cannot apply {eva_power_kw} kW with no connected EVs",
                achievable_kw=0.0,
            )
        return AllocationResult(
            power_kw=np.zeros(n),
            applied_eva_power_kw=0.0,
            kappa=0.0,
            clipped_ids=np.empty(0, dtype=np.int64),
            n_iterations=0,
            saturated=False,
        )
    lo_b, hi_b = _bounds(fleet, soc_lo, soc_hi)
    floor, ceil, head, depth = backend.ev_power_bounds(
        fleet.soc[idx],
        fleet.capacity_kwh[idx],
        fleet.p_ch_max_kw[idx],
        fleet.p_dis_max_kw[idx],
        lo_b[idx],
        hi_b[idx],
        dt_h,
    )
    env_lo = float(floor.sum())
    env_hi = float(ceil.sum())
    tol = CONSERVATION_RTOL * max(1.0, abs(eva_power_kw))
    if eva_power_kw > env_hi + tol or eva_power_kw < env_lo - tol:
        achievable = min(max(eva_power_kw, env_lo), env_hi)
        raise InfeasibleError(
            f"command {eva_power_kw:.6g} kW outside feasible envelope "
            f"[{env_lo:.6g}, {env_hi:.6g}] kW",
            overshoot=abs(eva_power_kw - achievable),
            achievable_kw=achievable,
        )
    target = min(max(eva_power_kw, env_lo), env_hi)  # absorb sub-tol float excess
    p_conn, kappa, clipped, n_iter = backend.waterfill(target, floor, ceil, head, depth, dt_h)
    applied = float(p_conn.sum())
    power = np.zeros(n)
    power[idx] = p_conn
    saturated = abs(applied - eva_power_kw) > tol
    return AllocationResult(
        power_kw=power,
        applied_eva_power_kw=applied,
        kappa=float(kappa),
        clipped_ids=fleet.ids[idx[clipped]].copy(),
        n_iterations=int(n_iter),
        saturated=saturated,
    )


def step_aggregate(
    fleet: Fleet,
    mask: np.ndarray,
    eva_power_kw: float,
    dt_h: float,
    soc_lo=None,
    soc_hi=None,
) -> tuple[Fleet, EvaState, AllocationResult]:
    """Allocate, integrate every EV's SOC, and summarize the aggregate.

    The fleet is untouched if allocation fails. The returned EvaState
    predicts the aggregate SOC from the pre-step fleet; it equals the
    capacity-weighted mean SOC of the post-step connected EVs.
    """
    lo_b, hi_b = _bounds(fleet, soc_lo, soc_hi)
    result = allocate(fleet, mask, eva_power_kw, dt_h, soc_lo=lo_b, soc_hi=hi_b)
    envelope = power_envelope(fleet, mask, dt_h, soc_lo=lo_b, soc_hi=hi_b)
    new_soc = fleet.soc + result.power_kw * dt_h / fleet.capacity_kwh
    # absorb float residue at the bounds, never a real violation
    over = new_soc - hi_b
    new_soc = np.where(mask & (over > 0) & (over < 1e-12), hi_b, new_soc)
    under = lo_b - new_soc
    new_soc = np.where(mask & (under > 0) & (under < 1e-12), lo_b, new_soc)
    q = fleet.capacity_kwh[mask]
    if q.size:
        soc_agg = compute_eva_soc(fleet, mask, result.applied_eva_power_kw, dt_h)
        state = EvaState(
            soc=soc_agg,
            connected_energy_kwh=float(q.sum()),
            n_connected=int(q.size),
            soc_min_k=float((lo_b[mask] * q).sum() / q.sum()),
            soc_max_k=float((hi_b[mask] * q).sum() / q.sum()),
            p_envelope=envelope,
        )
    else:
        state = EvaState(
            soc=0.0,
            connected_energy_kwh=0.0,
            n_connected=0,
            soc_min_k=0.0,
            soc_max_k=0.0,
            p_envelope=(0.0, 0.0),
        )
    return fleet.with_soc(new_soc), state, result


def allocation_to_csv(path, slot: int, fleet_after: Fleet, mask: np.ndarray, result: AllocationResult, append: bool = False) -> None:
    """Audit trail: one row per connected EV, `slot,ev_id,power_kw,soc_after`."""
    mode = "a" if append else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow(("slot", "ev_id", "power_kw", "soc_after"))
        for i in np.flatnonzero(mask):
            writer.writerow(
                (slot, int(fleet_after.ids[i]), repr(float(result.power_kw[i])), repr(float(fleet_after.soc[i])))
            )
