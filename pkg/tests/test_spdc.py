import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgopo import cavity, spdc
from wgopo.errors import ConfigError, DomainError, SearchError
from wgopo.reproduce import restore_offset

T_QPM = 128.6
BAND = (1540.0, 1580.0)


def test_mismatch_zero_at_degeneracy(qpm, pump):
    assert pump.degeneracy_nm == pytest.approx(1560.054, abs=1e-3)
    assert abs(spdc.phase_mismatch(qpm, pump, pump.degeneracy_nm, T_QPM)) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(1500.0, 1620.0), st.floats(100.0, 160.0))
def test_mismatch_signal_idler_symmetry(signal_nm, temp):
    pump = spdc.PumpSpec()
    qpm = spdc.calibrate_qpm(pump)
    idler = float(spdc.idler_wavelength(pump, signal_nm))
    a = spdc.phase_mismatch(qpm, pump, signal_nm, temp)
    b = spdc.phase_mismatch(qpm, pump, idler, temp)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-6)


def test_single_root_in_one_sided_window(qpm, pump):
    deg = pump.degeneracy_nm
    lam = np.linspace(deg + 1e-3, deg + 40.0, 40_001)
    roots = np.count_nonzero(np.diff(np.sign(spdc.phase_mismatch(qpm, pump, lam, T_QPM + 0.3))))
    assert roots == 1
    below = np.count_nonzero(np.diff(np.sign(spdc.phase_mismatch(qpm, pump, lam, T_QPM - 0.3))))
    assert below == 0


def test_envelope_unit_peak(qpm, pump):
    assert spdc.spdc_envelope(qpm, pump, pump.degeneracy_nm, T_QPM) == pytest.approx(1.0, abs=1e-12)


def test_envelope_zero_at_two_pi(qpm, pump):
    from scipy.optimize import brentq

    target = 2 * np.pi / (qpm.length_cm * 1e-2)
    f = lambda lam: abs(spdc.phase_mismatch(qpm, pump, lam, T_QPM)) - target
    lam0 = brentq(f, pump.degeneracy_nm + 0.01, pump.degeneracy_nm + 60, xtol=1e-12)
    assert spdc.spdc_envelope(qpm, pump, lam0, T_QPM) == pytest.approx(0.0, abs=1e-9)


def test_envelope_width_tens_of_nm(qpm, pump):
    lam = np.linspace(1500, 1620, 24001)
    env = spdc.spdc_envelope(qpm, pump, lam, T_QPM)
    above = lam[env >= 0.5]
    assert above.max() - above.min() > 5.0


def test_envelope_outside_validity(qpm, pump):
    with pytest.raises(DomainError):
        spdc.spdc_envelope(qpm, pump, 100.0, T_QPM)


def test_cluster_contains_1560_at_double_resonance(resonator, qpm, pump, resonance_temperature):
    cs = spdc.cluster_spectrum(resonator, qpm, pump, resonance_temperature, BAND)
    assert cs.cluster_containing(1560.0) is not None


def test_detuned_cluster_lost_then_restored(resonator, qpm, pump, resonance_temperature, default_context):
    w0 = spdc.central_cluster_weight(resonator, qpm, pump, resonance_temperature)
    w1 = spdc.central_cluster_weight(resonator, qpm, pump, resonance_temperature + 0.07)
    assert w1 < 0.5 * w0
    offset = restore_offset(default_context)[0]
    assert offset == pytest.approx(0.15, rel=0.15)
    w2 = spdc.central_cluster_weight(resonator, qpm, pump, resonance_temperature + offset)
    assert w2 >= 0.5 * w0


def test_cluster_spectrum_csv_deterministic(tmp_path, resonator, qpm, pump, resonance_temperature):
    for name in ("a.csv", "b.csv"):
        spdc.cluster_spectrum(resonator, qpm, pump, resonance_temperature, BAND).to_csv(tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_gm_aligned_at_double_resonance(resonator, pump, resonance_temperature):
    gm = spdc.gm_diagram(resonator, pump, resonance_temperature, (1550, 1570))
    assert abs(gm.detuning_near(1560.0)) <= 58.5e6


def test_gm_detuned_by_half_fsr(resonator, pump, resonance_temperature):
    gm = spdc.gm_diagram(resonator, pump, resonance_temperature + 0.07, (1550, 1570))
    d = abs(gm.detuning_near(1560.0))
    f_sr = cavity.fsr(resonator, 1560.0, resonance_temperature)
    # oracle: signal and idler combs each move by the frequency tuning rate
    shift = 2 * abs(spdc.frequency_tuning_rate(resonator, 1560.0, resonance_temperature)) * 0.07
    expected = min(shift % f_sr, f_sr - shift % f_sr)
    assert d == pytest.approx(expected, rel=0.02)
    assert d == pytest.approx(f_sr / 2, rel=0.2)


def test_gm_reflection_symmetry(resonator, pump, resonance_temperature):
    gm = spdc.gm_diagram(resonator, pump, resonance_temperature, (1555, 1565))
    checked = 0
    for k in range(0, len(gm.signal), 7):
        j = gm.partner[k]
        nu_i = gm.idler.frequencies[j]
        m = int(np.argmin(np.abs(gm.signal.frequencies - nu_i)))
        if abs(gm.signal.frequencies[m] - nu_i) > 1e3:
            continue
        assert gm.signal.frequencies[k] == pytest.approx(gm.idler.frequencies[gm.partner[m]], abs=1e3)
        assert abs(gm.detuning[m]) == pytest.approx(abs(gm.detuning[k]), abs=1e3)
        checked += 1
    assert checked > 3


def test_find_double_resonance_from_offset_start(resonator, qpm, pump, resonance_temperature):
    dr = spdc.find_double_resonance(resonator, qpm, pump, resonance_temperature + 0.07, 0.2)
    assert dr.temperature == pytest.approx(resonance_temperature, abs=0.002)


def test_scan_brute_force_oracle(resonator, qpm, pump, resonance_temperature):
    temps = np.linspace(resonance_temperature - 0.02, resonance_temperature + 0.02, 81)
    metric = spdc.filter_metric(resonator, qpm, pump, temps)
    assert abs(temps[int(np.argmax(metric))] - resonance_temperature) <= 0.0005 + 1e-9


def test_two_solutions_spaced_by_mode_hop(resonator, qpm, pump, resonance_temperature):
    dr = spdc.find_double_resonance(resonator, qpm, pump, resonance_temperature + 0.165, 0.35)
    m = dr.scan_metric
    # full-height solutions; the half-FSR restores in between reach ~0.6 of the peak
    peaks = [k for k in range(1, m.size - 1) if m[k] >= m[k - 1] and m[k] > m[k + 1] and m[k] > 0.8 * m.max()]
    assert len(peaks) == 2
    spacing = dr.scan_temperatures[peaks[1]] - dr.scan_temperatures[peaks[0]]
    assert spacing == pytest.approx(0.3, rel=0.1)
    assert spacing == pytest.approx(spdc.mode_hop_period(resonator), abs=0.005)


def test_zero_range_returns_start(resonator, qpm, pump):
    dr = spdc.find_double_resonance(resonator, qpm, pump, 128.5, 0.0)
    assert dr.temperature == 128.5
    assert dr.metric == pytest.approx(spdc.filter_metric(resonator, qpm, pump, 128.5))


def test_negative_range_rejected(resonator, qpm, pump):
    with pytest.raises(ConfigError):
        spdc.find_double_resonance(resonator, qpm, pump, 128.5, -1.0)


def test_search_far_from_phase_matching_fails(resonator, qpm, pump):
    with pytest.raises(SearchError) as info:
        spdc.find_double_resonance(resonator, qpm, pump, 160.0, 0.05)
    assert "best_metric" in info.value.diagnostics


def test_mode_hop_period(resonator):
    assert spdc.mode_hop_period(resonator) == pytest.approx(0.3, rel=0.10)
