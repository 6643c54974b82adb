"""Renewable curves, tariff, scenario composition, and scalar metrics."""

import numpy as np
import pytest

from v2gcoord.errors import ConfigurationError, DomainError
from v2gcoord.grid import (
    GridScenario,
    PvParams,
    TariffBand,
    TariffSchedule,
    WtParams,
    charging_cost,
    default_scenario,
    load_scenario,
    load_variance,
    mean_net_load,
    peak_valley,
    pv_power,
    pv_series,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
    synthetic_baseload,
    tie_line_violated,
    total_load,
    wt_power,
    wt_series,
)


def make_pv(irr, temp, p_rated=100.0, i_n=1.0, alpha=-0.004):
    n = len(irr)
    return PvParams(
        p_rated_kw=p_rated,
        irradiance_series=np.asarray(irr, dtype=float),
        irradiance_std=i_n,
        temp_series=np.full(n, temp) if np.isscalar(temp) else np.asarray(temp, dtype=float),
        temp_coeff=alpha,
    )


def make_wt(winds, p_rated=60.0, v_ci=3.0, v_r=9.5, v_co=20.0):
    return WtParams(
        p_rated_kw=p_rated,
        v_cut_in=v_ci,
        v_rated=v_r,
        v_cut_out=v_co,
        wind_series=np.asarray(winds, dtype=float),
    )


# --- PV ----------------------------------------------------------------------


def test_pv_reference_conditions_give_rated_power():
    pv = make_pv([1.0], 25.0)
    assert pv_power(pv, 0) == pytest.approx(100.0)


def test_pv_zero_irradiance_gives_zero():
    pv = make_pv([0.0], 25.0)
    assert pv_power(pv, 0) == 0.0


def test_pv_temperature_derating():
    pv = make_pv([0.5], 35.0)
    assert pv_power(pv, 0) == pytest.approx(100.0 * 0.5 * 0.96)


def test_pv_linear_in_irradiance_and_nonnegative():
    rng = np.random.default_rng(0)
    irr = rng.uniform(0, 1.2, 24)
    pv1 = make_pv(irr, 25.0)
    pv2 = make_pv(2 * irr, 25.0)
    assert np.allclose(pv_series(pv2), 2 * pv_series(pv1))
    hot = make_pv(irr, 300.0)  # absurd temperature, output still floored at 0
    assert np.all(pv_series(hot) >= 0.0)


def test_pv_rejects_nonpositive_rating_reference():
    with pytest.raises(ConfigurationError, match="irradiance_std"):
        PvParams(
            p_rated_kw=10.0,
            irradiance_series=np.zeros(24),
            irradiance_std=0.0,
            temp_series=np.zeros(24),
        )


# --- WT ----------------------------------------------------------------------


def test_wt_piecewise_closed_forms():
    v_ci, v_r, v_co, p = 3.0, 9.5, 20.0, 60.0
    eps = 1e-9
    speeds = [v_ci, (v_ci + v_r) / 2, v_r, v_co - eps, v_co]
    wt = make_wt(speeds, p_rated=p, v_ci=v_ci, v_r=v_r, v_co=v_co)
    assert wt_power(wt, 0) == 0.0
    assert wt_power(wt, 1) == pytest.approx(p / 2)
    assert wt_power(wt, 2) == pytest.approx(p)
    assert wt_power(wt, 3) == pytest.approx(p)
    assert wt_power(wt, 4) == 0.0


def test_wt_monotone_below_cutout_and_continuous_at_cutin():
    grid = np.linspace(0.0, 19.999, 500)
    wt = make_wt(grid)
    out = wt_series(wt)
    assert np.all(np.diff(out) >= -1e-12)
    near_ci = make_wt([3.0 - 1e-9, 3.0 + 1e-9])
    lo, hi = wt_series(near_ci)
    assert abs(hi - lo) < 1e-6


def test_wt_rejects_misordered_speeds():
    with pytest.raises(ConfigurationError, match="v_cut_in"):
        make_wt([5.0], v_ci=10.0, v_r=9.5, v_co=20.0)


# --- tariff --------------------------------------------------------------------


def test_default_tou_band_prices():
    t = TariffSchedule.default_tou()
    assert t.price_at(23) == 0.4
    assert t.price_at(3) == 0.4
    assert t.price_at(8) == 0.8
    assert t.price_at(11) == 1.2
    assert t.price_at(19) == 1.2
    assert t.price_at(14) == 0.8
    assert t.price_at(27) == t.price_at(3)  # weekly slots wrap by hour of day


def test_tariff_rejects_overlap_and_gaps():
    with pytest.raises(ConfigurationError, match="more than once"):
        TariffSchedule(
            bands=(TariffBand("a", 0, 13, 0.5), TariffBand("b", 12, 24, 0.9))
        )
    with pytest.raises(ConfigurationError, match="unlabeled"):
        TariffSchedule(bands=(TariffBand("a", 0, 12, 0.5),))


# --- composite load ------------------------------------------------------------


def test_total_load_identity_without_res():
    sc = GridScenario(baseload_kw=synthetic_baseload())
    assert total_load(sc, 12, 0.0) == pytest.approx(sc.baseload_kw[12])
    assert total_load(sc, 12, 50.0) == pytest.approx(sc.baseload_kw[12] + 50.0)


def test_total_load_component_sum_with_res():
    sc = default_scenario(res=True)
    realized = sc.realize()
    slot = 12
    want = (
        sc.baseload_kw[slot]
        - pv_power(sc.pv, slot)
        - wt_power(sc.wt, slot)
        + 10.0
    )
    assert realized.total_load(slot, 10.0) == pytest.approx(want)
    assert realized.net_load(slot, 10.0) == pytest.approx(
        -pv_power(sc.pv, slot) - wt_power(sc.wt, slot) + 10.0
    )


def test_weekly_noise_stays_within_band():
    sc = default_scenario(res=True, weekly=True, noise_pct=0.10)
    realized = sc.realize(np.random.default_rng(5))
    nominal = sc.baseload_kw
    ratio = realized.baseload_kw / nominal
    assert np.all(ratio >= 0.9 - 1e-12) and np.all(ratio <= 1.1 + 1e-12)
    assert realized.baseload_kw.shape == (168,)
    # noise requires an explicit rng
    with pytest.raises(DomainError):
        sc.realize()


def test_scale_multiplies_all_series():
    sc = default_scenario(res=True, scale=100.0)
    realized = sc.realize()
    small = default_scenario(res=True, scale=1.0).realize()
    assert np.allclose(realized.baseload_kw, 100.0 * small.baseload_kw)
    assert np.allclose(realized.pv_kw, 100.0 * small.pv_kw)
    assert np.allclose(realized.wt_kw, 100.0 * small.wt_kw)


def test_tie_line_flagging():
    sc = GridScenario(baseload_kw=synthetic_baseload(), tie_line_kw=(-100.0, 400.0))
    assert tie_line_violated(sc, 401.0)
    assert tie_line_violated(sc, -101.0)
    assert not tie_line_violated(sc, 0.0)
    default = GridScenario(baseload_kw=synthetic_baseload())
    assert not tie_line_violated(default, 1e12)


# --- metrics --------------------------------------------------------------------


def test_variance_constant_window_is_zero():
    assert load_variance(np.full(24, 77.0)) == 0.0


def test_variance_alternating_two_point():
    w = np.tile([100.0, 200.0], 12)
    assert load_variance(w) == pytest.approx(50.0**2)


def test_variance_matches_two_pass_oracle():
    rng = np.random.default_rng(1)
    w = rng.uniform(50, 500, 24)
    mean = sum(w) / 24
    want = sum((x - mean) ** 2 for x in w) / 24
    assert load_variance(w) == pytest.approx(want, abs=1e-9)


def test_variance_shift_and_scale_laws():
    rng = np.random.default_rng(2)
    w = rng.uniform(50, 500, 24)
    v = load_variance(w)
    assert load_variance(w + 123.0) == pytest.approx(v, abs=1e-9 * max(1, v))
    assert load_variance(3.0 * w) == pytest.approx(9.0 * v, rel=1e-12)


def test_variance_rejects_wrong_length():
    with pytest.raises(DomainError):
        load_variance(np.zeros(23))


def test_peak_valley():
    assert peak_valley(np.full(24, 5.0)) == (5.0, 5.0)
    w = np.full(24, 100.0)
    w[7] = 999.0
    assert peak_valley(w)[0] == 999.0
    rng = np.random.default_rng(3)
    w = rng.uniform(0, 1000, 24)
    s = np.sort(w)
    assert peak_valley(w) == (s[-1], s[0])
    with pytest.raises(DomainError):
        peak_valley(w[:-1])


def test_charging_cost_examples():
    t = TariffSchedule.default_tou()
    assert charging_cost([1, 2, 3], [0.0, 0.0, 0.0], t) == 0.0
    assert charging_cost([23], [6.0], t) == pytest.approx(2.4)
    assert charging_cost([19], [-6.0], t) == pytest.approx(-7.2)
    with pytest.raises(DomainError):
        charging_cost([1, 2], [0.0], t)


def test_charging_cost_linearity():
    t = TariffSchedule.default_tou()
    rng = np.random.default_rng(4)
    slots = list(range(15, 35))
    powers = rng.uniform(-50, 50, len(slots)).tolist()
    assert charging_cost(slots, [2 * p for p in powers], t) == pytest.approx(
        2 * charging_cost(slots, powers, t)
    )


def test_mean_net_load():
    assert mean_net_load(np.zeros(20)) == 0.0
    assert mean_net_load(np.full(24, -100.0)) == -100.0
    rng = np.random.default_rng(5)
    series = rng.normal(size=31)
    assert mean_net_load(series) == pytest.approx(series.sum() / 31)
    with pytest.raises(DomainError):
        mean_net_load([])


# --- scenario JSON ---------------------------------------------------------------


def test_scenario_json_roundtrip(tmp_path):
    sc = default_scenario(res=True, weekly=True, noise_pct=0.1, scale=2.0)
    path = tmp_path / "scenario.json"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert np.array_equal(back.baseload_kw, sc.baseload_kw)
    assert np.array_equal(back.pv.irradiance_series, sc.pv.irradiance_series)
    assert back.wt.v_rated == sc.wt.v_rated
    assert back.scale == 2.0
    assert back.noise_pct == 0.1
    assert back.tariff.bands == sc.tariff.bands
    assert back.tie_line_kw == sc.tie_line_kw


def test_scenario_json_rejects_unknown_fields():
    doc = scenario_to_json(default_scenario())
    doc["frequency_hz"] = 50
    with pytest.raises(ConfigurationError, match="frequency_hz"):
        scenario_from_json(doc)
    doc2 = scenario_to_json(default_scenario(res=True))
    doc2["pv"]["tilt"] = 30
    with pytest.raises(ConfigurationError, match="tilt"):
        scenario_from_json(doc2)


def test_scenario_json_requires_baseload():
    with pytest.raises(ConfigurationError, match="baseload_kw"):
        scenario_from_json({"scale": 1.0})


def test_scenario_rejects_bad_series_length():
    with pytest.raises(ConfigurationError, match="24 or 168"):
        GridScenario(baseload_kw=np.zeros(30))


def test_synthetic_baseload_shape():
    base = synthetic_baseload(peak_kw=300.0, valley_kw=130.0)
    assert base.shape == (24,)
    assert base.max() == pytest.approx(300.0)
    assert base.min() == pytest.approx(130.0)
    assert base.argmin() in (2, 3, 4)  # valley in the small hours
    assert base.argmax() in (19, 20, 21)  # evening peak dominates
