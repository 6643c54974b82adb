"""Fleet sampling, availability windows, and per-EV SOC updates."""

import numpy as np
import pytest

from v2gcoord.errors import ConfigurationError, DomainError, InfeasibleError, PowerLimitError
from v2gcoord.fleet import (
    EvRecord,
    Fleet,
    FleetConfig,
    apply_ev_power,
    availability,
    effective_soc_bounds,
    fleet_from_csv,
    fleet_to_csv,
    remaining_plug_slots,
    sample_fleet,
)


def truncated_normal_moments(mean, std, lo, hi):
    # quadrature oracle, independent of the sampling code
    x = np.linspace(lo, hi, 200_001)
    pdf = np.exp(-0.5 * ((x - mean) / std) ** 2)
    z = np.trapezoid(pdf, x)
    m1 = np.trapezoid(x * pdf, x) / z
    m2 = np.trapezoid(x * x * pdf, x) / z
    return m1, np.sqrt(m2 - m1 * m1)


def test_sample_fleet_counts_and_bounds():
    fleet = sample_fleet(FleetConfig(n_evs=509, rng_seed=7))
    assert len(fleet) == 509
    assert np.all(fleet.arrival_slot >= 15) and np.all(fleet.arrival_slot <= 21)
    assert np.all(fleet.departure_slot >= 6) and np.all(fleet.departure_slot <= 10)
    assert np.all(fleet.soc >= 0.2) and np.all(fleet.soc <= 0.8)
    assert np.all(fleet.capacity_kwh == 24.0)
    assert np.all(fleet.p_ch_max_kw == 6.0)
    assert np.all(fleet.p_dis_max_kw == -6.0)


def test_sampling_means_match_quadrature_oracle():
    n = 10_000
    fleet = sample_fleet(FleetConfig(n_evs=n, rng_seed=123))
    m_soc, s_soc = truncated_normal_moments(0.5, 0.1, 0.2, 0.8)
    assert abs(fleet.soc.mean() - m_soc) <= 3 * s_soc / np.sqrt(n)
    # integer fields carry rounding noise on top of the truncated spread
    m_arr, s_arr = truncated_normal_moments(18.0, 1.0, 15.0, 21.0)
    s_arr_int = np.sqrt(s_arr**2 + 1.0 / 12.0)
    assert abs(fleet.arrival_slot.mean() - m_arr) <= 3 * s_arr_int / np.sqrt(n)
    m_dep, s_dep = truncated_normal_moments(8.0, 1.0, 6.0, 10.0)
    s_dep_int = np.sqrt(s_dep**2 + 1.0 / 12.0)
    assert abs(fleet.departure_slot.mean() - m_dep) <= 3 * s_dep_int / np.sqrt(n)


def test_sampling_is_deterministic_per_seed():
    a = sample_fleet(FleetConfig(n_evs=64, rng_seed=5))
    b = sample_fleet(FleetConfig(n_evs=64, rng_seed=5))
    c = sample_fleet(FleetConfig(n_evs=64, rng_seed=6))
    assert list(a) == list(b)
    assert list(a) != list(c)


def test_sampling_streams_are_per_ev():
    # the first 32 EVs of a bigger fleet are exactly the 32-EV fleet
    small = sample_fleet(FleetConfig(n_evs=32, rng_seed=11))
    big = sample_fleet(FleetConfig(n_evs=64, rng_seed=11))
    assert list(small) == list(big[:32])


def test_degenerate_truncation_collapses_to_point():
    cfg = FleetConfig(
        n_evs=1,
        arrival_mean=17.0,
        arrival_std=1e-9,
        arrival_lo=16.9999,
        arrival_hi=17.0001,
        departure_mean=8.0,
        departure_std=1e-9,
        departure_lo=7.9999,
        departure_hi=8.0001,
        soc_init_mean=0.5,
        soc_init_std=1e-9,
        soc_init_lo=0.49999,
        soc_init_hi=0.50001,
        rng_seed=0,
    )
    ev = sample_fleet(cfg)[0]
    assert ev.arrival_slot == 17
    assert ev.departure_slot == 8
    assert abs(ev.soc - 0.5) < 1e-4


@pytest.mark.parametrize(
    "kwargs,field",
    [
        ({"n_evs": -1}, "n_evs"),
        ({"arrival_lo": 21.0, "arrival_hi": 15.0}, "arrival_lo"),
        ({"soc_init_std": 0.0}, "soc_init_std"),
        ({"capacity_kwh": -1.0}, "capacity_kwh"),
        ({"p_ch_max_kw": -2.0}, "p_ch_max_kw"),
        ({"p_dis_max_kw": 2.0}, "p_dis_max_kw"),
        ({"soc_min": 0.95}, "soc_min"),
        ({"soc_target": 0.05}, "soc_target"),
        ({"departure_ramp_slots": -1}, "departure_ramp_slots"),
    ],
)
def test_invalid_config_names_offending_field(kwargs, field):
    with pytest.raises(ConfigurationError, match=field):
        sample_fleet(FleetConfig(rng_seed=0, **kwargs))


# --- availability ----------------------------------------------------------


def test_availability_window_examples():
    ev = EvRecord(0, 24.0, 6.0, -6.0, 0.5, arrival_slot=18, departure_slot=8)
    fleet = Fleet.from_records([ev])
    assert availability(fleet, 20)[0]
    assert not availability(fleet, 12)[0]
    assert availability(fleet, 18)[0]  # arrival hour is included
    assert not availability(fleet, 8)[0]  # departure hour is excluded
    assert availability(fleet, 0)[0]  # wraps past midnight


def test_availability_matches_bruteforce_membership():
    rng = np.random.default_rng(42)
    for _ in range(200):
        a = int(rng.integers(0, 24))
        d = int(rng.integers(0, 24))
        fleet = Fleet.from_records([EvRecord(0, 24.0, 6.0, -6.0, 0.5, a, d)])
        window = [(a + j) % 24 for j in range((d - a) % 24)]
        for slot in range(24):
            assert availability(fleet, slot)[0] == (slot in window)


def test_availability_rejects_bad_slot():
    fleet = Fleet.from_records([EvRecord(0, 24.0, 6.0, -6.0, 0.5, 18, 8)])
    with pytest.raises(DomainError):
        availability(fleet, 24)
    with pytest.raises(DomainError):
        availability(fleet, -1)


def test_remaining_plug_slots_counts_down_to_departure():
    fleet = Fleet.from_records([EvRecord(0, 24.0, 6.0, -6.0, 0.5, 18, 8)])
    # connected hours are 18..23 and 0..7; the hour before departure reports 0
    assert remaining_plug_slots(fleet, 7)[0] == 0
    assert remaining_plug_slots(fleet, 6)[0] == 1
    assert remaining_plug_slots(fleet, 23)[0] == 8
    assert remaining_plug_slots(fleet, 18)[0] == 13


def test_effective_bounds_ramp_to_target():
    fleet = Fleet.from_records([EvRecord(0, 24.0, 6.0, -6.0, 0.5, 18, 8)])
    lo7, hi7 = effective_soc_bounds(fleet, 7, soc_target=0.8, ramp_slots=3)
    lo6, _ = effective_soc_bounds(fleet, 6, soc_target=0.8, ramp_slots=3)
    lo5, _ = effective_soc_bounds(fleet, 5, soc_target=0.8, ramp_slots=3)
    lo4, _ = effective_soc_bounds(fleet, 4, soc_target=0.8, ramp_slots=3)
    lo18, _ = effective_soc_bounds(fleet, 18, soc_target=0.8, ramp_slots=3)
    assert lo7[0] == pytest.approx(0.8)  # departs after this hour
    assert lo6[0] == pytest.approx(0.6)
    assert lo5[0] == pytest.approx(0.4)
    assert lo4[0] == pytest.approx(0.2)  # ramp not started yet
    assert lo18[0] == pytest.approx(0.2)
    assert hi7[0] == pytest.approx(0.9)


# --- SOC update ------------------------------------------------------------


def test_apply_ev_power_arithmetic():
    ev = EvRecord(0, 24.0, 6.0, -6.0, 0.5, 18, 8)
    assert apply_ev_power(ev, 6.0, 1.0).soc == pytest.approx(0.75)
    assert apply_ev_power(ev, 0.0, 1.0).soc == 0.5
    assert apply_ev_power(ev, -6.0, 0.5).soc == pytest.approx(0.375)


def test_apply_ev_power_rejects_bound_violations():
    ev = EvRecord(0, 24.0, 6.0, -6.0, 0.88, 18, 8)
    with pytest.raises(InfeasibleError) as exc:
        apply_ev_power(ev, 6.0, 1.0)
    assert exc.value.overshoot == pytest.approx(1.13 - 0.9)
    low = EvRecord(1, 24.0, 6.0, -6.0, 0.21, 18, 8)
    with pytest.raises(InfeasibleError):
        apply_ev_power(low, -6.0, 1.0)


def test_apply_ev_power_rejects_out_of_limit_power():
    ev = EvRecord(0, 24.0, 6.0, -6.0, 0.5, 18, 8)
    with pytest.raises(PowerLimitError):
        apply_ev_power(ev, 6.5, 1.0)
    with pytest.raises(PowerLimitError):
        apply_ev_power(ev, -6.5, 1.0)


def test_apply_ev_power_roundtrip_is_reversible():
    rng = np.random.default_rng(3)
    for _ in range(500):
        soc = rng.uniform(0.3, 0.8)
        p = rng.uniform(-2.4, 2.4)
        ev = EvRecord(0, 24.0, 6.0, -6.0, soc, 18, 8)
        back = apply_ev_power(apply_ev_power(ev, p, 1.0), -p, 1.0)
        assert abs(back.soc - soc) <= 1e-12


# --- CSV round trip --------------------------------------------------------


def test_fleet_csv_roundtrip(tmp_path):
    fleet = sample_fleet(FleetConfig(n_evs=25, rng_seed=9))
    path = tmp_path / "fleet.csv"
    fleet_to_csv(fleet, path)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "id,capacity_kwh,p_ch_max_kw,p_dis_max_kw,soc,arrival_slot,departure_slot"
    again = fleet_from_csv(path)
    assert list(again) == list(fleet)


def test_fleet_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,capacity\n1,24\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="header"):
        fleet_from_csv(path)


def test_fleet_csv_rejects_malformed_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "id,capacity_kwh,p_ch_max_kw,p_dis_max_kw,soc,arrival_slot,departure_slot\n"
        "0,24.0,6.0,-6.0,not_a_number,18,8\n",
        encoding="utf-8",
    )
    with pytest.raises(ConfigurationError, match="line 2"):
        fleet_from_csv(path)


def test_empty_fleet_is_allowed():
    fleet = sample_fleet(FleetConfig(n_evs=0))
    assert len(fleet) == 0
    assert not availability(fleet, 18).any()
