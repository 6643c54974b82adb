"""Everything outside the fleet: baseload, renewables, tariff, metrics.

A GridScenario bundles the exogenous microgrid data for one run: the
baseload series (daily 24 or weekly 168 slots), optional PV and wind
parameters, the time-of-use tariff, tie-line limits, and a noise
half-width. Scenarios are immutable; stochastic realizations are drawn
from them explicitly with a caller-supplied RNG.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

SLOTS_PER_DAY = 24
SLOTS_PER_WEEK = 168
VARIANCE_WINDOW = 24


# ---------------------------------------------------------------------------
# renewable generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PvParams:
    """Photovoltaic array: rated power with irradiance and temperature derating."""

    p_rated_kw: float
    irradiance_series: np.ndarray  # kW/m2 per slot
    irradiance_std: float  # kW/m2, rating reference
    temp_series: np.ndarray  # degC per slot
    temp_coeff: float = -0.004  # 1/degC
    temp_ref: float = 25.0

    def __post_init__(self):
        if self.p_rated_kw <= 0:
            raise ConfigurationError(f"pv p_rated_kw must be > 0, got {self.p_rated_kw}")
        if self.irradiance_std <= 0:
            raise ConfigurationError(
                f"pv irradiance_std must be > 0, got {self.irradiance_std}"
            )
        irr = np.asarray(self.irradiance_series, dtype=np.float64)
        if np.any(irr < 0):
            raise ConfigurationError("pv irradiance_series must be >= 0")
        object.__setattr__(self, "irradiance_series", irr)
        object.__setattr__(
            self, "temp_series", np.asarray(self.temp_series, dtype=np.float64)
        )
        if len(self.temp_series) != len(irr):
            raise ConfigurationError("pv temp_series length must match irradiance_series")


@dataclass(frozen=True)
class WtParams:
    """Wind turbine: cut-in / rated / cut-out piecewise power curve."""

    p_rated_kw: float
    v_cut_in: float
    v_rated: float
    v_cut_out: float
    wind_series: np.ndarray  # m/s per slot

    def __post_init__(self):
        if self.p_rated_kw <= 0:
            raise ConfigurationError(f"wt p_rated_kw must be > 0, got {self.p_rated_kw}")
        if not 0 <= self.v_cut_in < self.v_rated < self.v_cut_out:
            raise ConfigurationError(
                "wt speeds must satisfy 0 <= v_cut_in < v_rated < v_cut_out, got "
                f"({self.v_cut_in}, {self.v_rated}, {self.v_cut_out})"
            )
        object.__setattr__(
            self, "wind_series", np.asarray(self.wind_series, dtype=np.float64)
        )


def pv_power(pv: PvParams, slot: int) -> float:
    """PV output: rated power scaled by relative irradiance and derated
    linearly with temperature above the reference; never negative."""
    if not 0 <= slot < len(pv.irradiance_series):
        raise DomainError(f"slot {slot} outside series of length {len(pv.irradiance_series)}")
    raw = (
        pv.p_rated_kw
        * (pv.irradiance_series[slot] / pv.irradiance_std)
        * (1.0 + pv.temp_coeff * (pv.temp_series[slot] - pv.temp_ref))
    )
    return float(max(0.0, raw))


def pv_series(pv: PvParams) -> np.ndarray:
    raw = (
        pv.p_rated_kw
        * (pv.irradiance_series / pv.irradiance_std)
        * (1.0 + pv.temp_coeff * (pv.temp_series - pv.temp_ref))
    )
    return np.maximum(0.0, raw)


def wt_power(wt: WtParams, slot: int) -> float:
    """Wind output: zero below cut-in and at/above cut-out, linear ramp
    from cut-in to rated speed, rated power between rated and cut-out."""
    if not 0 <= slot < len(wt.wind_series):
        raise DomainError(f"slot {slot} outside series of length {len(wt.wind_series)}")
    return float(_wt_curve(wt, np.asarray([wt.wind_series[slot]]))[0])


def wt_series(wt: WtParams) -> np.ndarray:
    return _wt_curve(wt, wt.wind_series)


def _wt_curve(wt: WtParams, v: np.ndarray) -> np.ndarray:
    ramp = (v - wt.v_cut_in) / (wt.v_rated - wt.v_cut_in) * wt.p_rated_kw
    out = np.where(v <= wt.v_cut_in, 0.0, np.where(v <= wt.v_rated, ramp, wt.p_rated_kw))
    return np.where(v >= wt.v_cut_out, 0.0, out)


# ---------------------------------------------------------------------------
# tariff
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TariffBand:
    label: str
    start_hour: int
    end_hour: int  # exclusive; may wrap past midnight
    price: float


@dataclass(frozen=True)
class TariffSchedule:
    """Hour-of-day electricity prices assembled from labeled bands.

    Bands cover [start_hour, end_hour) and may wrap midnight; together
    they must label each of the 24 hours exactly once.
    """

    bands: tuple[TariffBand, ...]
    price_per_hour: np.ndarray = field(init=False)

    def __post_init__(self):
        prices = np.full(SLOTS_PER_DAY, np.nan)
        for band in self.bands:
            if band.price <= 0:
                raise ConfigurationError(
                    f"tariff band {band.label!r}: price must be > 0, got {band.price}"
                )
            if not (0 <= band.start_hour < SLOTS_PER_DAY and 0 <= band.end_hour <= SLOTS_PER_DAY):
                raise ConfigurationError(
                    f"tariff band {band.label!r}: hours must lie in [0, 24]"
                )
            span = (band.end_hour - band.start_hour) % SLOTS_PER_DAY
            if span == 0:
                raise ConfigurationError(f"tariff band {band.label!r} covers no hours")
            for j in range(span):
                h = (band.start_hour + j) % SLOTS_PER_DAY
                if not np.isnan(prices[h]):
                    raise ConfigurationError(f"tariff hour {h} labeled more than once")
                prices[h] = band.price
        uncovered = np.flatnonzero(np.isnan(prices))
        if uncovered.size:
            raise ConfigurationError(f"tariff leaves hours {uncovered.tolist()} unlabeled")
        object.__setattr__(self, "price_per_hour", prices)

    def price_at(self, slot: int) -> float:
        """Price for a slot index; indices beyond one day wrap by hour of day."""
        if slot < 0:
            raise DomainError(f"slot must be >= 0, got {slot}")
        return float(self.price_per_hour[slot % SLOTS_PER_DAY])

    @classmethod
    def default_tou(cls) -> "TariffSchedule":
        return cls(
            bands=(
                TariffBand("off-peak", 23, 7, 0.4),
                TariffBand("shoulder", 7, 10, 0.8),
                TariffBand("peak", 10, 12, 1.2),
                TariffBand("shoulder-afternoon", 12, 18, 0.8),
                TariffBand("peak-evening", 18, 21, 1.2),
                TariffBand("shoulder-evening", 21, 23, 0.8),
            )
        )


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridScenario:
    """Exogenous microgrid data for one run."""

    baseload_kw: np.ndarray
    scale: float = 1.0
    pv: Optional[PvParams] = None
    wt: Optional[WtParams] = None
    tariff: TariffSchedule = field(default_factory=TariffSchedule.default_tou)
    tie_line_kw: tuple[float, float] = (-np.inf, np.inf)
    noise_pct: float = 0.0

    def __post_init__(self):
        base = np.asarray(self.baseload_kw, dtype=np.float64)
        if len(base) not in (SLOTS_PER_DAY, SLOTS_PER_WEEK):
            raise ConfigurationError(
                f"baseload_kw must have 24 or 168 slots, got {len(base)}"
            )
        object.__setattr__(self, "baseload_kw", base)
        if self.scale <= 0:
            raise ConfigurationError(f"scale must be > 0, got {self.scale}")
        if not 0 <= self.noise_pct < 1:
            raise ConfigurationError(f"noise_pct must lie in [0, 1), got {self.noise_pct}")
        lo, hi = self.tie_line_kw
        if lo > hi:
            raise ConfigurationError(f"tie_line_kw min {lo} exceeds max {hi}")
        for name in ("pv", "wt"):
            gen = getattr(self, name)
            if gen is not None:
                series = gen.irradiance_series if name == "pv" else gen.wind_series
                if len(series) != len(base):
                    raise ConfigurationError(
                        f"{name} series length {len(series)} must match baseload {len(base)}"
                    )

    @property
    def n_slots(self) -> int:
        return len(self.baseload_kw)

    def realize(self, rng: Optional[np.random.Generator] = None) -> "RealizedSeries":
        """Concrete per-slot series: scaled, with one multiplicative
        uniform noise draw per slot per series when noise_pct > 0."""
        base = self.baseload_kw * self.scale
        pv = pv_series(self.pv) * self.scale if self.pv is not None else np.zeros(self.n_slots)
        wt = wt_series(self.wt) * self.scale if self.wt is not None else np.zeros(self.n_slots)
        if self.noise_pct > 0:
            if rng is None:
                raise DomainError("noise_pct > 0 requires an rng to realize the scenario")
            base = base * (1.0 + rng.uniform(-self.noise_pct, self.noise_pct, self.n_slots))
            pv = pv * (1.0 + rng.uniform(-self.noise_pct, self.noise_pct, self.n_slots))
            wt = wt * (1.0 + rng.uniform(-self.noise_pct, self.noise_pct, self.n_slots))
        return RealizedSeries(baseload_kw=base, pv_kw=pv, wt_kw=wt)


@dataclass(frozen=True)
class RealizedSeries:
    """One noise draw of a scenario, already scaled."""

    baseload_kw: np.ndarray
    pv_kw: np.ndarray
    wt_kw: np.ndarray

    def total_load(self, slot: int, eva_power_kw: float) -> float:
        if not 0 <= slot < len(self.baseload_kw):
            raise DomainError(f"slot {slot} outside series of length {len(self.baseload_kw)}")
        return float(
            self.baseload_kw[slot] - self.pv_kw[slot] - self.wt_kw[slot] + eva_power_kw
        )

    def net_load(self, slot: int, eva_power_kw: float) -> float:
        """Microgrid net exchange excluding baseload: -pv - wt + eva."""
        if not 0 <= slot < len(self.baseload_kw):
            raise DomainError(f"slot {slot} outside series of length {len(self.baseload_kw)}")
        return float(-self.pv_kw[slot] - self.wt_kw[slot] + eva_power_kw)


def total_load(scenario: GridScenario, slot: int, eva_power_kw: float,
               realized: Optional[RealizedSeries] = None) -> float:
    """Composite load: scaled baseload minus renewables plus EVA power.

    Pass a RealizedSeries to evaluate a specific noise draw; without
    one the scenario must be noise-free.
    """
    if realized is None:
        realized = scenario.realize()
    return realized.total_load(slot, eva_power_kw)


def tie_line_violated(scenario: GridScenario, load_kw: float) -> bool:
    lo, hi = scenario.tie_line_kw
    return load_kw < lo or load_kw > hi


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------


def load_variance(window: Sequence[float]) -> float:
    """Population variance of the trailing day of loads (kW^2)."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (VARIANCE_WINDOW,):
        raise DomainError(f"variance window must hold {VARIANCE_WINDOW} loads, got {w.shape}")
    mean = w.sum() / VARIANCE_WINDOW
    return float(((w - mean) ** 2).sum() / VARIANCE_WINDOW)


def peak_valley(window: Sequence[float]) -> tuple[float, float]:
    """(max, min) of the trailing day of loads."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (VARIANCE_WINDOW,):
        raise DomainError(f"peak/valley window must hold {VARIANCE_WINDOW} loads, got {w.shape}")
    return float(w.max()), float(w.min())


def charging_cost(slots: Sequence[int], powers_kw: Sequence, tariff: TariffSchedule,
                  dt_h: float = 1.0) -> float:
    """Tariff-weighted energy exchanged by the aggregator.

    Positive is money spent charging; negative is discharge revenue.
    Entries may be aggregate kW floats or allocation results (their
    applied total is used; per-EV powers already sum to it).
    """
    if len(slots) != len(powers_kw):
        raise DomainError(
            f"slots ({len(slots)}) and powers ({len(powers_kw)}) must align"
        )
    total = 0.0
    for slot, p in zip(slots, powers_kw):
        p_kw = getattr(p, "applied_eva_power_kw", p)
        total += tariff.price_at(slot) * float(p_kw) * dt_h
    return total


def mean_net_load(net_load_series: Sequence[float]) -> float:
    """Average microgrid exchange (-pv - wt + eva); negative means the
    renewables exceeded what the fleet absorbed."""
    series = np.asarray(net_load_series, dtype=np.float64)
    if series.size == 0:
        raise DomainError("mean_net_load needs a nonempty series")
    return float(series.mean())


# ---------------------------------------------------------------------------
# synthetic profiles
# ---------------------------------------------------------------------------


def synthetic_baseload(peak_kw: float = 300.0, valley_kw: float = 130.0) -> np.ndarray:
    """Residential double-peak day: valley near 03:00, peaks near 12:00
    and 20:00. A stand-in profile; any 24/168-slot CSV can replace it."""
    h = np.arange(SLOTS_PER_DAY, dtype=np.float64)

    def bump_at(center, width):
        # circular hour distance so the evening peak decays into the night
        d = np.minimum(np.abs(h - center), SLOTS_PER_DAY - np.abs(h - center))
        return np.exp(-0.5 * (d / width) ** 2)

    bump = 0.85 * bump_at(12.0, 2.6) + bump_at(20.0, 2.2) + 0.35 * bump_at(8.0, 1.8)
    bump = bump - bump.min()
    curve = valley_kw + (peak_kw - valley_kw) * bump / bump.max()
    return curve


def synthetic_irradiance(peak_kw_m2: float = 1.0) -> np.ndarray:
    h = np.arange(SLOTS_PER_DAY, dtype=np.float64)
    sun = np.sin(np.pi * (h - 6.0) / 12.0)
    return peak_kw_m2 * np.where((h >= 6.0) & (h <= 18.0), np.maximum(sun, 0.0), 0.0)


def synthetic_temperature(low_c: float = 18.0, high_c: float = 30.0) -> np.ndarray:
    h = np.arange(SLOTS_PER_DAY, dtype=np.float64)
    return low_c + (high_c - low_c) * 0.5 * (1.0 - np.cos(2.0 * np.pi * (h - 4.0) / 24.0))


def synthetic_wind(mean_ms: float = 7.0, swing_ms: float = 2.5) -> np.ndarray:
    h = np.arange(SLOTS_PER_DAY, dtype=np.float64)
    return mean_ms + swing_ms * np.sin(2.0 * np.pi * (h - 2.0) / 24.0)


def _tile_weekly(series: np.ndarray) -> np.ndarray:
    return np.tile(series, SLOTS_PER_WEEK // SLOTS_PER_DAY)


def default_scenario(
    res: bool = False,
    weekly: bool = False,
    scale: float = 1.0,
    noise_pct: float = 0.0,
    peak_kw: float = 300.0,
) -> GridScenario:
    """Built-in scenario family used by the CLI and the tests.

    With res=True, PV and wind are sized so their combined peak is
    roughly 40% of the baseload peak.
    """
    base = synthetic_baseload(peak_kw=peak_kw)
    irr = synthetic_irradiance()
    temp = synthetic_temperature()
    wind = synthetic_wind()
    if weekly:
        base, irr, temp, wind = map(_tile_weekly, (base, irr, temp, wind))
    pv = wt = None
    if res:
        pv = PvParams(
            p_rated_kw=0.25 * peak_kw,
            irradiance_series=irr,
            irradiance_std=1.0,
            temp_series=temp,
        )
        wt = WtParams(
            p_rated_kw=0.15 * peak_kw,
            v_cut_in=3.0,
            v_rated=9.5,
            v_cut_out=20.0,
            wind_series=wind,
        )
    return GridScenario(
        baseload_kw=base,
        scale=scale,
        pv=pv,
        wt=wt,
        tariff=TariffSchedule.default_tou(),
        noise_pct=noise_pct,
    )


# ---------------------------------------------------------------------------
# scenario JSON
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {"baseload_kw", "scale", "pv", "wt", "tariff", "tie_line_kw", "noise_pct"}
_PV_KEYS = {"p_rated_kw", "irradiance_series", "irradiance_std", "temp_series", "temp_coeff", "temp_ref"}
_WT_KEYS = {"p_rated_kw", "v_cut_in", "v_rated", "v_cut_out", "wind_series"}
_BAND_KEYS = {"label", "start_hour", "end_hour", "price"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigurationError(f"unknown field(s) {sorted(unknown)} in {where}")


def scenario_to_json(scenario: GridScenario) -> dict:
    doc = {
        "baseload_kw": scenario.baseload_kw.tolist(),
        "scale": scenario.scale,
        "noise_pct": scenario.noise_pct,
        "tie_line_kw": [
            None if not np.isfinite(scenario.tie_line_kw[0]) else scenario.tie_line_kw[0],
            None if not np.isfinite(scenario.tie_line_kw[1]) else scenario.tie_line_kw[1],
        ],
        "tariff": [
            {"label": b.label, "start_hour": b.start_hour, "end_hour": b.end_hour, "price": b.price}
            for b in scenario.tariff.bands
        ],
        "pv": None,
        "wt": None,
    }
    if scenario.pv is not None:
        doc["pv"] = {
            "p_rated_kw": scenario.pv.p_rated_kw,
            "irradiance_series": scenario.pv.irradiance_series.tolist(),
            "irradiance_std": scenario.pv.irradiance_std,
            "temp_series": scenario.pv.temp_series.tolist(),
            "temp_coeff": scenario.pv.temp_coeff,
            "temp_ref": scenario.pv.temp_ref,
        }
    if scenario.wt is not None:
        doc["wt"] = {
            "p_rated_kw": scenario.wt.p_rated_kw,
            "v_cut_in": scenario.wt.v_cut_in,
            "v_rated": scenario.wt.v_rated,
            "v_cut_out": scenario.wt.v_cut_out,
            "wind_series": scenario.wt.wind_series.tolist(),
        }
    return doc


def scenario_from_json(doc: dict) -> GridScenario:
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario document must be a JSON object")
    _reject_unknown(doc, _SCENARIO_KEYS, "scenario")
    if "baseload_kw" not in doc:
        raise ConfigurationError("scenario is missing required field 'baseload_kw'")
    pv = None
    if doc.get("pv") is not None:
        _reject_unknown(doc["pv"], _PV_KEYS, "scenario.pv")
        pv = PvParams(**doc["pv"])
    wt = None
    if doc.get("wt") is not None:
        _reject_unknown(doc["wt"], _WT_KEYS, "scenario.wt")
        wt = WtParams(**doc["wt"])
    if "tariff" in doc:
        bands = []
        for i, band in enumerate(doc["tariff"]):
            _reject_unknown(band, _BAND_KEYS, f"scenario.tariff[{i}]")
            bands.append(TariffBand(**band))
        tariff = TariffSchedule(bands=tuple(bands))
    else:
        tariff = TariffSchedule.default_tou()
    raw_tie = doc.get("tie_line_kw") or [None, None]
    tie = (
        -np.inf if raw_tie[0] is None else float(raw_tie[0]),
        np.inf if raw_tie[1] is None else float(raw_tie[1]),
    )
    return GridScenario(
        baseload_kw=np.asarray(doc["baseload_kw"], dtype=np.float64),
        scale=float(doc.get("scale", 1.0)),
        pv=pv,
        wt=wt,
        tariff=tariff,
        tie_line_kw=tie,
        noise_pct=float(doc.get("noise_pct", 0.0)),
    )


def load_scenario(path) -> GridScenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario file {path}: invalid JSON ({exc})") from exc
    return scenario_from_json(doc)


def save_scenario(scenario: GridScenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_json(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")
