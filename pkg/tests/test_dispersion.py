import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgopo import dispersion
from wgopo.errors import ConfigError, DomainError


def zelmon_ne(lam_um):
    """Independent room-temperature extraordinary index of congruent LN (Zelmon 1997)."""
    l2 = lam_um ** 2
    return np.sqrt(1 + 2.9804 * l2 / (l2 - 0.02047) + 0.5981 * l2 / (l2 - 0.0666)
                   + 8.9543 * l2 / (l2 - 416.08))


@pytest.fixture(scope="module")
def model():
    return dispersion.default_index_model()


def test_bulk_sellmeier_matches_independent_dataset():
    bulk = dispersion.default_sellmeier()
    for lam in (0.78, 1.064, 1.56):
        assert bulk.index(lam, 21.0) == pytest.approx(zelmon_ne(lam), abs=3e-3)


def test_index_at_operating_point_in_bracket(model):
    n = dispersion.index(model, 1560.0, 128.6)
    assert 2.1 < n < 2.3


def test_index_deterministic(model):
    assert dispersion.index(model, 1560.0, 128.6) == dispersion.index(model, 1560.0, 128.6)


def test_index_below_range_is_domain_error(model):
    with pytest.raises(DomainError, match="validity range"):
        dispersion.index(model, 300.0, 128.6)


def test_temperature_out_of_range(model):
    with pytest.raises(DomainError):
        dispersion.index(model, 1560.0, 1000.0)


def test_group_index_after_calibration(model):
    target = dispersion.C_LIGHT / (2 * 3.6e-2 * 1.8e9)
    ng = dispersion.group_index(model, 1560.0, 128.6)
    assert ng == pytest.approx(2.315, abs=0.012)
    assert ng == pytest.approx(target, rel=1e-6)


def test_group_index_exceeds_phase_index_like_bulk(model):
    bulk = dispersion.default_sellmeier()
    h = 1e-3
    dn_dlam = (zelmon_ne(1.56 + h) - zelmon_ne(1.56 - h)) / (2 * h)
    assert dn_dlam < 0  # normal dispersion in the oracle
    assert dispersion.group_index(model, 1560.0, 128.6) > dispersion.index(model, 1560.0, 128.6)
    assert bulk.index(1.56, 128.6) > 0


def test_group_index_deterministic(model):
    assert dispersion.group_index(model, 1560.0, 128.6) == dispersion.group_index(model, 1560.0, 128.6)


def test_tuning_rate_calibrated(model):
    assert dispersion.tuning_rate(model, 1560.0, 128.6) == pytest.approx(44.5, rel=1e-4)


def test_bandwidth_convert_examples():
    assert dispersion.bandwidth_convert(14, 1560) == pytest.approx(1726, rel=1e-3)
    assert dispersion.bandwidth_convert(0.91, 1560) == pytest.approx(112.1, rel=2e-3)
    assert dispersion.bandwidth_convert(0, 1234) == 0


def test_bandwidth_convert_bad_wavelength():
    with pytest.raises(DomainError):
        dispersion.bandwidth_convert(1.0, 0.0)


def test_sellmeier_coefficient_count():
    with pytest.raises(ConfigError):
        dispersion.sellmeier_from_coefficients("bad", [1.0, 2.0])


def test_load_sellmeier_roundtrip(tmp_path):
    bulk = dispersion.default_sellmeier()
    p = tmp_path / "s.yaml"
    p.write_text(
        "name: copy\nform: jundt\ncoefficients: [" + ", ".join(repr(c) for c in bulk.coefficients) + "]\n"
        f"wavelength_range_um: [{bulk.wavelength_range_um[0]}, {bulk.wavelength_range_um[1]}]\n"
        f"temperature_range_c: [{bulk.temperature_range_c[0]}, {bulk.temperature_range_c[1]}]\n")
    other = dispersion.load_sellmeier(p)
    assert other.index(1.55, 100.0) == bulk.index(1.55, 100.0)


def test_load_sellmeier_malformed(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("name: x\n")
    with pytest.raises(ConfigError):
        dispersion.load_sellmeier(p)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 500.0), st.floats(600.0, 3000.0))
def test_bandwidth_roundtrip(width_pm, lam):
    mhz = dispersion.bandwidth_convert(width_pm, lam)
    assert dispersion.bandwidth_convert_inverse(mhz, lam) == pytest.approx(width_pm, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1400.0, 1700.0), st.floats(60.0, 200.0))
def test_index_increases_with_temperature(lam, temp):
    m = dispersion.default_index_model()
    assert dispersion.index(m, lam, temp + 1.0) > dispersion.index(m, lam, temp)
