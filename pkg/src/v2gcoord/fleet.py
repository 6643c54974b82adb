"""EV population model.

Samples a fleet of EVs with stochastic plug-in/plug-out hours and
initial state of charge, answers availability queries for any hour of
day, and integrates per-vehicle SOC under commanded power. Values are
immutable: updates return new records, the struct-of-arrays `Fleet`
is never mutated in place.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, InfeasibleError, PowerLimitError

SLOTS_PER_DAY = 24

# float residue absorbed when checking SOC bounds; anything larger raises
SOC_ATOL = 1e-12


@dataclass(frozen=True)
class EvRecord:
    """One EV: battery limits, plug window, and current state of charge.

    arrival_slot/departure_slot are hours of day in [0, 24). The plug
    window is [arrival, departure) and may wrap past midnight (an EV
    arriving at 18 and departing at 8 is connected overnight).
    """

    id: int
    capacity_kwh: float
    p_ch_max_kw: float
    p_dis_max_kw: float
    soc: float
    arrival_slot: int
    departure_slot: int
    soc_min: float = 0.2
    soc_max: float = 0.9


@dataclass(frozen=True)
class FleetConfig:
    """Sampling distributions and physical defaults for a fleet.

    Arrival/departure hours and initial SOC are truncated normals;
    bounds are inclusive. Battery capacity and charger limits are
    shared by every EV. `soc_target` is the level each EV must reach
    by departure; the minimum SOC bound ramps up to it linearly over
    the last `departure_ramp_slots` connected hours.
    """

    n_evs: int = 509
    arrival_mean: float = 18.0
    arrival_std: float = 1.0
    arrival_lo: float = 15.0
    arrival_hi: float = 21.0
    departure_mean: float = 8.0
    departure_std: float = 1.0
    departure_lo: float = 6.0
    departure_hi: float = 10.0
    soc_init_mean: float = 0.5
    soc_init_std: float = 0.1
    soc_init_lo: float = 0.2
    soc_init_hi: float = 0.8
    capacity_kwh: float = 24.0
    p_ch_max_kw: float = 6.0
    p_dis_max_kw: float = -6.0
    soc_min: float = 0.2
    soc_max: float = 0.9
    soc_target: float = 0.8
    departure_ramp_slots: int = 3
    rng_seed: int = 0

    def validate(self) -> None:
        if self.n_evs < 0:
            raise ConfigurationError(f"n_evs must be >= 0, got {self.n_evs}")
        for name in ("arrival", "departure", "soc_init"):
            lo = getattr(self, f"{name}_lo")
            hi = getattr(self, f"{name}_hi")
            std = getattr(self, f"{name}_std")
            if not lo < hi:
                raise ConfigurationError(
                    f"{name}_lo must be < {name}_hi, got [{lo}, {hi}]"
                )
            if not std > 0:
                raise ConfigurationError(f"{name}_std must be > 0, got {std}")
        if not 0.0 <= self.arrival_lo <= self.arrival_hi < SLOTS_PER_DAY:
            raise ConfigurationError("arrival bounds must lie in [0, 24)")
        if not 0.0 <= self.departure_lo <= self.departure_hi < SLOTS_PER_DAY:
            raise ConfigurationError("departure bounds must lie in [0, 24)")
        if self.capacity_kwh <= 0:
            raise ConfigurationError(
                f"capacity_kwh must be > 0, got {self.capacity_kwh}"
            )
        if self.p_ch_max_kw < 0:
            raise ConfigurationError(
                f"p_ch_max_kw must be >= 0, got {self.p_ch_max_kw}"
            )
        if self.p_dis_max_kw > 0:
            raise ConfigurationError(
                f"p_dis_max_kw must be <= 0, got {self.p_dis_max_kw}"
            )
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ConfigurationError(
                f"need 0 <= soc_min < soc_max <= 1, got [{self.soc_min}, {self.soc_max}]"
            )
        if not self.soc_min <= self.soc_init_lo <= self.soc_init_hi <= self.soc_max:
            raise ConfigurationError("initial SOC bounds must lie within [soc_min, soc_max]")
        if not self.soc_min <= self.soc_target <= self.soc_max:
            raise ConfigurationError(
                f"soc_target must lie in [soc_min, soc_max], got {self.soc_target}"
            )
        if self.departure_ramp_slots < 0:
            raise ConfigurationError(
                f"departure_ramp_slots must be >= 0, got {self.departure_ramp_slots}"
            )


# ---------------------------------------------------------------------------
# fleet container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fleet(Sequence):
    """Column-oriented fleet snapshot.

    Behaves as a read-only sequence of EvRecord while keeping the data
    in numpy arrays for vectorized scheduling. All arrays share length.
    """

    ids: np.ndarray
    capacity_kwh: np.ndarray
    p_ch_max_kw: np.ndarray
    p_dis_max_kw: np.ndarray
    soc: np.ndarray
    arrival_slot: np.ndarray
    departure_slot: np.ndarray
    soc_min: np.ndarray
    soc_max: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        for name in (
            "capacity_kwh",
            "p_ch_max_kw",
            "p_dis_max_kw",
            "soc",
            "arrival_slot",
            "departure_slot",
            "soc_min",
            "soc_max",
        ):
            if len(getattr(self, name)) != n:
                raise ConfigurationError(f"fleet column {name} has mismatched length")

    @classmethod
    def from_records(cls, records: Sequence[EvRecord]) -> "Fleet":
        return cls(
            ids=np.array([r.id for r in records], dtype=np.int64),
            capacity_kwh=np.array([r.capacity_kwh for r in records], dtype=np.float64),
            p_ch_max_kw=np.array([r.p_ch_max_kw for r in records], dtype=np.float64),
            p_dis_max_kw=np.array([r.p_dis_max_kw for r in records], dtype=np.float64),
            soc=np.array([r.soc for r in records], dtype=np.float64),
            arrival_slot=np.array([r.arrival_slot for r in records], dtype=np.int64),
            departure_slot=np.array([r.departure_slot for r in records], dtype=np.int64),
            soc_min=np.array([r.soc_min for r in records], dtype=np.float64),
            soc_max=np.array([r.soc_max for r in records], dtype=np.float64),
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Fleet(
                ids=self.ids[index],
                capacity_kwh=self.capacity_kwh[index],
                p_ch_max_kw=self.p_ch_max_kw[index],
                p_dis_max_kw=self.p_dis_max_kw[index],
                soc=self.soc[index],
                arrival_slot=self.arrival_slot[index],
                departure_slot=self.departure_slot[index],
                soc_min=self.soc_min[index],
                soc_max=self.soc_max[index],
            )
        return EvRecord(
            id=int(self.ids[index]),
            capacity_kwh=float(self.capacity_kwh[index]),
            p_ch_max_kw=float(self.p_ch_max_kw[index]),
            p_dis_max_kw=float(self.p_dis_max_kw[index]),
            soc=float(self.soc[index]),
            arrival_slot=int(self.arrival_slot[index]),
            departure_slot=int(self.departure_slot[index]),
            soc_min=float(self.soc_min[index]),
            soc_max=float(self.soc_max[index]),
        )

    def __iter__(self) -> Iterator[EvRecord]:
        for i in range(len(self)):
            yield self[i]

    def with_soc(self, soc: np.ndarray) -> "Fleet":
        """New snapshot with replaced SOC column."""
        if soc.shape != self.soc.shape:
            raise DomainError(
                f"soc column shape {soc.shape} does not match fleet size {self.soc.shape}"
            )
        return replace(self, soc=np.asarray(soc, dtype=np.float64).copy())

    def concat(self, other: "Fleet") -> "Fleet":
        return Fleet(
            ids=np.concatenate([self.ids, other.ids]),
            capacity_kwh=np.concatenate([self.capacity_kwh, other.capacity_kwh]),
            p_ch_max_kw=np.concatenate([self.p_ch_max_kw, other.p_ch_max_kw]),
            p_dis_max_kw=np.concatenate([self.p_dis_max_kw, other.p_dis_max_kw]),
            soc=np.concatenate([self.soc, other.soc]),
            arrival_slot=np.concatenate([self.arrival_slot, other.arrival_slot]),
            departure_slot=np.concatenate([self.departure_slot, other.departure_slot]),
            soc_min=np.concatenate([self.soc_min, other.soc_min]),
            soc_max=np.concatenate([self.soc_max, other.soc_max]),
        )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _truncated_normal(rng: np.random.Generator, mean: float, std: float, lo: float, hi: float) -> float:
    """One truncated-normal draw by rejection; bounds are inclusive."""
    for _ in range(10_000):
        x = rng.normal(mean, std)
        if lo <= x <= hi:
            return float(x)
    raise ConfigurationError(
        f"truncated normal N({mean}, {std}^2) on [{lo}, {hi}] rejected 10000 draws; "
        "bounds are too far in the tail"
    )


def sample_fleet(config: FleetConfig) -> Fleet:
    """Draw a fleet from the configured distributions.

    Each EV consumes its own RNG stream keyed by (rng_seed, ev id), so
    a fleet is reproducible and insensitive to sampling order. Plug
    hours are rounded to whole slots; SOC stays continuous.
    """
    config.validate()
    n = config.n_evs
    arrival = np.empty(n, dtype=np.int64)
    departure = np.empty(n, dtype=np.int64)
    soc = np.empty(n, dtype=np.float64)
    for i in range(n):
        rng = np.random.default_rng([config.rng_seed, i])
        a = _truncated_normal(
            rng, config.arrival_mean, config.arrival_std, config.arrival_lo, config.arrival_hi
        )
        d = _truncated_normal(
            rng, config.departure_mean, config.departure_std, config.departure_lo, config.departure_hi
        )
        s = _truncated_normal(
            rng, config.soc_init_mean, config.soc_init_std, config.soc_init_lo, config.soc_init_hi
        )
        arrival[i] = int(np.clip(round(a), config.arrival_lo, config.arrival_hi))
        departure[i] = int(np.clip(round(d), config.departure_lo, config.departure_hi))
        soc[i] = s
    full = np.full
    return Fleet(
        ids=np.arange(n, dtype=np.int64),
        capacity_kwh=full(n, float(config.capacity_kwh)),
        p_ch_max_kw=full(n, float(config.p_ch_max_kw)),
        p_dis_max_kw=full(n, float(config.p_dis_max_kw)),
        soc=soc,
        arrival_slot=arrival,
        departure_slot=departure,
        soc_min=full(n, float(config.soc_min)),
        soc_max=full(n, float(config.soc_max)),
    )


# ---------------------------------------------------------------------------
# availability and departure-aware SOC bounds
# ---------------------------------------------------------------------------


def availability(fleet: Fleet, timeslot: int) -> np.ndarray:
    """Boolean mask: which EVs are plugged in during hour `timeslot`.

    The window is [arrival, departure) and wraps midnight. Pure query,
    no state change.
    """
    if not 0 <= timeslot < SLOTS_PER_DAY:
        raise DomainError(f"timeslot must lie in [0, 24), got {timeslot}")
    a = fleet.arrival_slot
    d = fleet.departure_slot
    wraps = a > d
    inside = np.where(
        wraps,
        (timeslot >= a) | (timeslot < d),
        (timeslot >= a) & (timeslot < d),
    )
    return inside.astype(bool)


def remaining_plug_slots(fleet: Fleet, timeslot: int) -> np.ndarray:
    """Connected hours left after the current one finishes.

    Only meaningful where availability() is True; an EV in its last
    connected hour reports 0.
    """
    if not 0 <= timeslot < SLOTS_PER_DAY:
        raise DomainError(f"timeslot must lie in [0, 24), got {timeslot}")
    return (fleet.departure_slot - timeslot - 1) % SLOTS_PER_DAY


def effective_soc_bounds(
    fleet: Fleet,
    timeslot: int,
    soc_target: float = 0.8,
    ramp_slots: int = 3,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-EV SOC bounds to enforce at the END of hour `timeslot`.

    The max bound is static. The min bound rises linearly from the
    parking floor to `soc_target` across the final `ramp_slots`
    connected hours, reaching the target exactly when the EV departs,
    so a vehicle is never released below its required level.
    """
    left = remaining_plug_slots(fleet, timeslot).astype(np.float64)
    if ramp_slots > 0:
        ramped = soc_target - (soc_target - fleet.soc_min) * left / ramp_slots
    else:
        ramped = np.where(left == 0, soc_target, fleet.soc_min)
    lo = np.maximum(fleet.soc_min, ramped)
    return lo, fleet.soc_max.copy()


# ---------------------------------------------------------------------------
# per-EV SOC update
# ---------------------------------------------------------------------------


def apply_ev_power(ev: EvRecord, power_kw: float, dt_h: float) -> EvRecord:
    """Integrate SOC over one interval of constant power.

    Charging positive, discharging negative, lossless both ways. The
    update refuses to cross the record's SOC bounds: violations beyond
    float residue raise instead of clamping silently.
    """
    if dt_h <= 0:
        raise DomainError(f"dt_h must be > 0, got {dt_h}")
    if not ev.p_dis_max_kw - SOC_ATOL <= power_kw <= ev.p_ch_max_kw + SOC_ATOL:
        raise PowerLimitError(
            f"EV {ev.id}: power {power_kw} kW outside "
            f"[{ev.p_dis_max_kw}, {ev.p_ch_max_kw}] kW"
        )
    new_soc = ev.soc + power_kw * dt_h / ev.capacity_kwh
    if new_soc > ev.soc_max + SOC_ATOL:
        raise InfeasibleError(
            f"EV {ev.id}: SOC would reach {new_soc:.6f} > max {ev.soc_max}",
            overshoot=new_soc - ev.soc_max,
        )
    if new_soc < ev.soc_min - SOC_ATOL:
        raise InfeasibleError(
            f"EV {ev.id}: SOC would reach {new_soc:.6f} < min {ev.soc_min}",
            overshoot=ev.soc_min - new_soc,
        )
    return replace(ev, soc=float(np.clip(new_soc, ev.soc_min, ev.soc_max)))


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

_CSV_COLUMNS = (
    "id",
    "capacity_kwh",
    "p_ch_max_kw",
    "p_dis_max_kw",
    "soc",
    "arrival_slot",
    "departure_slot",
)


def fleet_to_csv(fleet: Fleet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for ev in fleet:
            writer.writerow(
                [
                    ev.id,
                    repr(ev.capacity_kwh),
                    repr(ev.p_ch_max_kw),
                    repr(ev.p_dis_max_kw),
                    repr(ev.soc),
                    ev.arrival_slot,
                    ev.departure_slot,
                ]
            )


def fleet_from_csv(path, soc_min: float = 0.2, soc_max: float = 0.9) -> Fleet:
    """Load a fleet; SOC operating bounds are not part of the file format."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != _CSV_COLUMNS:
            raise ConfigurationError(
                f"fleet CSV must start with header {','.join(_CSV_COLUMNS)}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_CSV_COLUMNS):
                raise ConfigurationError(
                    f"fleet CSV line {lineno}: expected {len(_CSV_COLUMNS)} fields, got {len(row)}"
                )
            try:
                records.append(
                    EvRecord(
                        id=int(row[0]),
                        capacity_kwh=float(row[1]),
                        p_ch_max_kw=float(row[2]),
                        p_dis_max_kw=float(row[3]),
                        soc=float(row[4]),
                        arrival_slot=int(row[5]),
                        departure_slot=int(row[6]),
                        soc_min=soc_min,
                        soc_max=soc_max,
                    )
                )
            except ValueError as exc:
                raise ConfigurationError(f"fleet CSV line {lineno}: {exc}") from exc
    if not records:
        raise ConfigurationError("fleet CSV contains no EV rows")
    return Fleet.from_records(records)
