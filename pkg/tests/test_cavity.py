import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from wgopo import cavity, dispersion
from wgopo.errors import DomainError, InfeasibleError, ModelError

T_REF = 128.6


def dense_scan(res, center_hz, half_span_hz, points=400_001):
    nu = center_hz + np.linspace(-half_span_hz, half_span_hz, points)
    return nu, cavity.transmission(res, nu, T_REF)


@pytest.fixture(scope="module")
def scan(resonator):
    nu0 = dispersion.C_LIGHT / 1560e-9
    return dense_scan(resonator, nu0, 2e9)


def test_resonance_is_local_maximum(resonator):
    comb = cavity.mode_comb(resonator, T_REF, (1559.9, 1560.1))
    nu = comb.frequencies[0]
    d = 1e5
    assert cavity.transmission(resonator, nu, T_REF) > cavity.transmission(resonator, nu - d, T_REF)
    assert cavity.transmission(resonator, nu, T_REF) > cavity.transmission(resonator, nu + d, T_REF)


def test_scan_peak_spacing_is_fsr(scan):
    nu, tr = scan
    inner = (tr[1:-1] > tr[:-2]) & (tr[1:-1] >= tr[2:])
    peaks = nu[1:-1][inner]
    assert len(peaks) >= 2
    assert np.diff(peaks).mean() == pytest.approx(1.8e9, rel=5e-3)


def test_scan_fwhm_matches_nominal(scan, resonator):
    nu, tr = scan
    k = int(np.argmax(tr))
    above = tr >= tr[k] / 2
    lo = k
    while above[lo - 1]:
        lo -= 1
    hi = k
    while above[hi + 1]:
        hi += 1
    width = nu[hi] - nu[lo]
    assert width == pytest.approx(117e6, rel=0.05)
    assert cavity.finesse(resonator) * width == pytest.approx(1.8e9, rel=5e-3)


def test_finesse_oracle():
    rho = brentq(lambda r: np.pi * np.sqrt(r) / (1 - r) - 15.4, 0.5, 0.99)
    assert rho == pytest.approx(0.8165, abs=1e-3)
    for r in (rho, 0.8165):
        t_pass = r / 0.85
        alpha = -10 * np.log10(t_pass) / 3.6
        assert cavity.finesse(cavity.ResonatorSpec(3.6, 0.85, 0.85, alpha)) == pytest.approx(15.4, abs=0.1)
    t_pass = rho / 0.85
    alpha = -10 * np.log10(t_pass) / 3.6
    res = cavity.ResonatorSpec(3.6, 0.85, 0.85, alpha)
    assert cavity.finesse(res) == pytest.approx(15.4, abs=0.1)


def test_finesse_diverges_toward_lossless_limit():
    values = [cavity.finesse(cavity.ResonatorSpec(3.6, r, r, 0.0)) for r in (0.9, 0.99, 0.999, 0.9999)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] > 1e4


def test_loss_from_finesse_nominal():
    alpha = cavity.loss_from_finesse(15.4, 0.85, 0.85, 3.6)
    assert alpha == pytest.approx(0.049, abs=1e-3)
    assert alpha == pytest.approx(0.06, rel=0.30)


def test_loss_from_finesse_lossless_boundary():
    f_max = cavity.finesse(cavity.ResonatorSpec(3.6, 0.85, 0.85, 0.0))
    assert cavity.loss_from_finesse(f_max, 0.85, 0.85, 3.6) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(InfeasibleError):
        cavity.loss_from_finesse(f_max * 1.01, 0.85, 0.85, 3.6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.5, 0.98), st.floats(0.5, 0.98), st.floats(0.5, 10.0))
def test_loss_from_finesse_inverts_finesse(alpha, r1, r2, length):
    res = cavity.ResonatorSpec(length, r1, r2, alpha)
    back = cavity.loss_from_finesse(cavity.finesse(res), r1, r2, length)
    assert back == pytest.approx(alpha, abs=1e-10)


def escape_series(t_pass, r, terms=5000):
    """Brute-force sum over round trips: half pass, exit, or reflect and continue."""
    amp = np.sqrt(t_pass) * (1 - r)
    ratio = (t_pass * r) ** 2
    return sum(amp * ratio ** k for k in range(terms))


def test_escape_probability_matches_series():
    assert cavity.escape_probability_from(0.9515, 0.85) == pytest.approx(escape_series(0.9515, 0.85), rel=1e-12)
    assert cavity.escape_probability_from(0.9515, 0.85) == pytest.approx(0.4230, abs=5e-4)


def test_escape_probability_no_cavity():
    assert cavity.escape_probability_from(1.0, 1e-12) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 0.999), st.floats(0.0, 0.999))
def test_escape_probabilities_sum_at_most_one(t_pass, r1, r2):
    # photon launched toward face 1; face 2 needs one reflection and one more pass
    p1 = np.sqrt(t_pass) * (1 - r1) / (1 - t_pass ** 2 * r1 * r2)
    p2 = np.sqrt(t_pass) * r1 * t_pass * (1 - r2) / (1 - t_pass ** 2 * r1 * r2)
    assert p1 + p2 <= 1 + 1e-12
    if r1 == r2:
        assert cavity.escape_probability_from(t_pass, r1) == pytest.approx(p1, rel=1e-12)


def test_escape_probability_bad_input():
    with pytest.raises(ModelError):
        cavity.escape_probability_from(0.0, 0.5)
    with pytest.raises(ModelError):
        cavity.escape_probability_from(0.9, 1.0)


def test_mode_count_in_one_nm(resonator):
    comb = cavity.mode_comb(resonator, T_REF, (1559.5, 1560.5))
    expected = (dispersion.C_LIGHT / 1559.5e-9 - dispersion.C_LIGHT / 1560.5e-9) / 1.8e9
    assert abs(len(comb) - expected) <= 1
    assert 67 <= len(comb) <= 70


def test_comb_shift_under_temperature(resonator):
    band = (1559.8, 1560.2)
    a = cavity.mode_comb(resonator, T_REF, band)
    period = 1.8e9 / abs(dispersion.C_LIGHT * 44.5e-12 / 1560e-9 ** 2)
    b = cavity.mode_comb(resonator, T_REF + period, band)
    fsr = np.mean(a.fsr)
    nu = a.frequencies[len(a) // 2]
    k = int(np.argmin(np.abs(b.frequencies - (nu - fsr))))
    assert abs(b.frequencies[k] - nu) / fsr == pytest.approx(1.0, rel=0.05)
    assert period == pytest.approx(0.3, rel=0.10)
    c = cavity.mode_comb(resonator, T_REF + 0.3, band)
    k = int(np.argmin(np.abs(c.frequencies - (nu - fsr))))
    assert abs(c.frequencies[k] - nu) / fsr == pytest.approx(1.0, rel=0.10)


def test_comb_identical_at_same_temperature(resonator):
    a = cavity.mode_comb(resonator, T_REF, (1559.8, 1560.2))
    b = cavity.mode_comb(resonator, T_REF, (1559.8, 1560.2))
    assert np.array_equal(a.frequencies, b.frequencies)


def test_comb_band_outside_validity(resonator):
    with pytest.raises(DomainError, match="validity range"):
        cavity.mode_comb(resonator, T_REF, (100.0, 200.0))


def test_mirror_curve_file(tmp_path, resonator):
    p = tmp_path / "m.txt"
    p.write_text("# wavelength_nm transmittance\n1500 0.20\n1600 0.10\n")
    curve = cavity.load_mirror_curve(p)
    assert float(curve.reflectivity(1550.0)) == pytest.approx(0.85)
