import math

import numpy as np
import pytest

import vaporqm


def test_version():
    assert vaporqm.__version__.count(".") == 2


def test_ground_splitting_grows_with_field():
    low = vaporqm.ground_splitting_hz("Rb87", 0.5)
    high = vaporqm.ground_splitting_hz("Rb87", 1.0)
    assert 0 < low < high
    assert 30e9 < high < 40e9


def test_transition_table_fields():
    lines = vaporqm.transition_table("Rb87", 1.0)
    assert lines
    assert {"frequency_offset_hz", "dipole_strength", "polarization", "lower", "upper"} <= set(lines[0])
    freqs = [l["frequency_offset_hz"] for l in lines]
    assert freqs == sorted(freqs)


def test_faddeeva_at_zero():
    assert vaporqm.faddeeva(0j) == pytest.approx(1.0)


def test_etalon_vectorized():
    e = vaporqm.EtalonSpec(fsr_hz=71.1e9, fwhm_hz=1.19e9)
    t = e.transmission(np.array([0.0, 0.595e9, 35.55e9]))
    assert t[0] == pytest.approx(1.0)
    assert t[1] == pytest.approx(0.5, rel=1e-3)
    assert t[2] < 1e-3


def test_db_round_trip():
    assert vaporqm.from_db(vaporqm.to_db(0.25)) == pytest.approx(0.25)


def test_snr_from_counts():
    fom = vaporqm.figures_of_merit(2000.0, 100.0, 2.5, 40.0, 0.7, 1.81e7)
    assert fom["snr"]["value"] == pytest.approx((2000.0 - 200.0) / 200.0)
    assert fom["snr"]["sigma"] > 0


def test_hbt_inversion():
    hbt = vaporqm.eta_det_hbt(0.97, 0.888)
    assert vaporqm.implied_eta_det(0.97, hbt) == pytest.approx(0.888, rel=1e-9)


def test_lifetime_fit_recovers_tau():
    t = np.linspace(20e-9, 480e-9, 12)
    eff = 0.2 * np.exp(-t / 224e-9)
    fit = vaporqm.fit_lifetime(list(t), list(eff), model="exponential")
    assert fit["ok"]
    assert fit["time_constant_s"] == pytest.approx(224e-9, rel=1e-6)


def test_timetags_are_reproducible():
    signal = [0.0] * 40
    noise = [1e-3] * 40
    a = vaporqm.generate_timetags(signal, noise, 162e-12, 10000, 0.9, 7)
    b = vaporqm.generate_timetags(signal, noise, 162e-12, 10000, 0.9, 7)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert len(a[0]) > 0


def test_validation_error_maps_to_value_error():
    with pytest.raises(ValueError):
        vaporqm.EtalonSpec(fsr_hz=-1.0)
    with pytest.raises(vaporqm.ValidationError):
        vaporqm.number_density("Rb87", 363.15, 1.2)


def test_bundled_scenario_round_trip():
    s = vaporqm.bundled_scenario()
    again = vaporqm.scenario_from_json(s.to_json())
    assert again == s


def test_spectrum_stage(tmp_path):
    record = vaporqm.run_pipeline(vaporqm.bundled_scenario(), "spectrum", tmp_path)
    assert record["status"]["spectrum"]["state"] == "ok"
    od = record["outputs"]["spectrum"]["peak_od"]
    assert 1.0 < od < 2.5
    assert (tmp_path / "record.json").exists()


def test_store_and_retrieve_linear():
    dt = 10e-12
    n = 1200
    t = np.arange(n) * dt
    signal = np.sqrt(np.exp(-((t - 3e-9) / 0.8e-9) ** 2) * 1e9).astype(complex)
    control = (2 * math.pi * 3e9 * np.exp(-((t - 3.5e-9) / 1.5e-9) ** 2)).astype(complex)
    readout = (2 * math.pi * 3e9 * np.exp(-((t - 2e-9) / 1.5e-9) ** 2)).astype(complex)
    p = vaporqm.LambdaParams()
    p.optical_depth = 5.0
    r1 = vaporqm.store_and_retrieve(p, signal, control, readout, dt, z_points=51)
    r2 = vaporqm.store_and_retrieve(p, 3 * signal, control, readout, dt, z_points=51)
    assert 0 < r1["eta_internal_total"] < 1
    assert r2["eta_internal_total"] == pytest.approx(r1["eta_internal_total"], rel=1e-9)
