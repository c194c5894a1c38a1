import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgopo import analysis as an
from wgopo import montecarlo as mc
from wgopo.config import RunConfig
from wgopo.errors import FitError

from test_montecarlo import ideal_config

SPAN = an.centered_range(20.0)


def synthetic_g2(n_peak, baseline_per_bin, linewidth_mhz=117.0, seed=0, bin_ps=263.0):
    rng = np.random.default_rng(seed)
    scale = 1e3 / (2 * math.pi * linewidth_mhz)
    lo, hi = an.centered_range(20.0, bin_ps)
    nbins = int(round((hi - lo) / (bin_ps / 1e3)))
    d = np.concatenate([rng.laplace(0, scale, n_peak), rng.uniform(lo, hi, rng.poisson(baseline_per_bin * nbins))])
    return an.histogram(d, bin_ps, (lo, hi))


@pytest.fixture(scope="module")
def franson_pair():
    """Full-scale Franson runs at the fringe maximum and minimum."""
    run = mc.fringe_runner(RunConfig.load().sim_config(franson=True))
    out = {}
    for k, ph in enumerate((0.0, math.pi)):
        out[ph] = an.histogram(run(ph, 2000.0, k).delays(28.0), 263, an.centered_range(28.0))
    return out


# ---------------------------------------------------------------- histograms

def test_single_delay_at_bin_center():
    h = an.histogram([0.0], 263, SPAN)
    k = int(np.argmin(np.abs(h.centers_ns)))
    assert h.counts[k] == 1 and h.total == 1
    assert abs(h.centers_ns[k]) < 1e-12


def test_out_of_range_counted():
    h = an.histogram([100.0, -100.0, 0.0], 263, SPAN)
    assert h.total == 1 and h.outside == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-19.0, 19.0), max_size=200), st.integers(1, 7))
def test_rebin_conserves_total(delays, factor):
    h = an.histogram(delays, 263, SPAN)
    assert an.rebin(h, factor).total == h.total


def expected_laplace_counts(n, scale, h):
    cdf = lambda x: np.where(x < 0, 0.5 * np.exp(x / scale), 1 - 0.5 * np.exp(-x / scale))
    e = h.edges_ns
    return n * (cdf(e[1:]) - cdf(e[:-1]))


def test_peak_fwhm_high_statistics():
    res = mc.simulate(ideal_config(pair_rate=1.2e5))
    d = res.delays(20.0)
    t_c, _ = an.coherence_times(117.0)
    scale = 1e3 / (2 * math.pi * 117.0)
    fine = an.histogram([], 25, an.centered_range(20.0, 25))
    fine = replace(fine, counts=expected_laplace_counts(1e6, scale, fine))
    assert an.peak_fwhm(fine) == pytest.approx(t_c, abs=0.01)
    # at 263 ps the bin average flattens the cusp; compare with the binned expectation
    h = an.histogram(d, 263, SPAN)
    oracle = replace(h, counts=expected_laplace_counts(d.size, scale, h))
    assert an.peak_fwhm(h) == pytest.approx(an.peak_fwhm(oracle), abs=0.05)


def test_full_scale_peak_width():
    res = mc.simulate(RunConfig.load().sim_config(duration_s=500.0, seed=5))
    fit = an.fit_g2(an.histogram(res.delays(20.0), 263, SPAN))
    t_c, _ = an.coherence_times(fit.linewidth_mhz)
    assert t_c == pytest.approx(1.9, abs=0.2)


# --------------------------------------------------------------------- g2 fit

def test_fit_recovers_linewidth():
    fit = an.fit_g2(synthetic_g2(100_000, 50.0, seed=1))
    assert fit.linewidth_mhz == pytest.approx(117.0, rel=0.05)
    assert fit.converged and fit.linewidth_err > 0


def test_fit_error_coverage():
    pulls = []
    for seed in range(30):
        fit = an.fit_g2(synthetic_g2(500, 1.7, seed=seed))
        pulls.append((fit.linewidth_mhz - 117.0) / fit.linewidth_err)
    assert np.mean(np.abs(pulls) < 3) >= 0.9


def test_baseline_only_has_no_peak():
    rng = np.random.default_rng(2)
    h = an.histogram(rng.uniform(*SPAN, 20000), 263, SPAN)
    with pytest.raises(FitError, match="no detectable peak"):
        an.fit_g2(h)


def test_fit_too_few_bins():
    with pytest.raises(FitError):
        an.fit_g2(an.histogram([0.0], 263, (-1.0, 1.0)))


# ------------------------------------------------------------ coherence times

def test_coherence_times_nominal():
    t_c, tau = an.coherence_times(117.0)
    assert t_c == pytest.approx(1.891, abs=5e-4)
    assert tau == pytest.approx(2.721, abs=5e-4)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 1e4))
def test_coherence_ratio_and_scaling(dnu):
    t_c, tau = an.coherence_times(dnu)
    assert tau / t_c == pytest.approx(2 / 1.39, rel=1e-12)
    t2, tau2 = an.coherence_times(2 * dnu)
    assert t2 == pytest.approx(t_c / 2, rel=1e-12) and tau2 == pytest.approx(tau / 2, rel=1e-12)


# ---------------------------------------------------------------------- peaks

def test_franson_peak_positions(franson_pair):
    p = an.find_peaks(franson_pair[0.0], 3)
    assert np.allclose(p.centers_ns, [-10.0, 0.0, 10.0], atol=0.263)


def test_single_peak_shortfall():
    p = an.find_peaks(synthetic_g2(20_000, 5.0), 3)
    assert p.centers_ns.size == 1 and p.shortfall == 2 and "1 of 3" in p.notice


def test_symmetric_input_symmetric_centers():
    h = an.histogram([], 263, an.centered_range(20.0))
    c = h.centers_ns
    counts = (100 * (np.exp(-np.abs(c - 8) / 1.36) + np.exp(-np.abs(c + 8) / 1.36))).astype(np.int64) + 2
    p = an.find_peaks(replace(h, counts=counts), 2)
    assert p.centers_ns[0] == pytest.approx(-p.centers_ns[1], abs=0.263)


# ---------------------------------------------------------------- windows

def test_window_covering_everything():
    h = synthetic_g2(1000, 2.0)
    assert an.central_window(h, 100.0) == pytest.approx(h.total)
    assert an.central_window(h, 0.0) == 0.0


def test_fringe_extremes_give_raw_visibility(franson_pair):
    cmax = an.central_window(franson_pair[0.0], 1.2)
    cmin = an.central_window(franson_pair[math.pi], 1.2)
    v = (cmax - cmin) / (cmax + cmin)
    err = 2 * math.sqrt(cmax * cmin * (cmax + cmin)) / (cmax + cmin) ** 2
    assert abs(v - 0.812) < 0.06 + 2 * err


def test_accidental_correction_at_operating_point(franson_pair):
    mean = sum(an.central_window(h, 1.2) for h in franson_pair.values()) / 2
    acc = sum(an.sideband_density(h, 18.0)[0] * 1.2 for h in franson_pair.values()) / 2
    assert an.subtract_accidentals(0.812, mean, acc).value == pytest.approx(0.944, abs=0.06)


# ---------------------------------------------------------------- fringe scans

def test_noiseless_scan_follows_cosine():
    # long delay keeps the side-peak tails out of the wide window
    base = ideal_config(pair_rate=5e4, franson=mc.FransonConfig(delay_ns=40.0, visibility=1.0))
    phases = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    scan = an.fringe_scan(mc.fringe_runner(base), phases, 1.0, window_ns=8.0, span_ns=60.0, sideband_ns=50.0)
    model = np.mean(scan.counts) * (1 + np.cos(phases))
    assert np.all(np.abs(scan.counts - model) < 3 * np.sqrt(np.maximum(model, 1.0)) + 1.0)


def test_constant_phase_constant_counts():
    base = ideal_config(pair_rate=5e4, franson=mc.FransonConfig(visibility=0.9))
    scan = an.fringe_scan(mc.fringe_runner(base), [1.0] * 10, 1.0, window_ns=1.2)
    chi2 = np.sum((scan.counts - scan.counts.mean()) ** 2 / scan.counts.mean())
    assert chi2 < 30  # 9 dof


def test_scan_empty_phase_list():
    with pytest.raises(ValueError):
        an.fringe_scan(lambda *a: [], [], 1.0)


def test_exact_sinusoid_visibility():
    phi = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    fit = an.fit_visibility(phi, 100 * (1 + 0.5 * np.cos(phi + 0.3)))
    assert fit.visibility == pytest.approx(0.5, abs=1e-9)
    assert fit.phase_offset == pytest.approx(0.3, abs=1e-9)


def test_flat_data_zero_visibility():
    rng = np.random.default_rng(4)
    phi = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    counts = rng.poisson(500, phi.size)
    fit = an.fit_visibility(phi, counts, np.sqrt(counts))
    assert fit.visibility < 3 * fit.visibility_err


def test_synthetic_scan_visibility():
    rng = np.random.default_rng(7)
    phi = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    counts = rng.poisson(300 * (1 + 0.812 * np.cos(phi)))
    fit = an.fit_visibility(phi, counts, np.sqrt(np.maximum(counts, 1)))
    assert abs(fit.visibility - 0.812) <= 0.055


def test_fit_needs_phase_coverage():
    with pytest.raises(FitError):
        an.fit_visibility([0, 0.1, 0.2, 0.3, 0.4], [1, 2, 3, 4, 5])


# ---------------------------------------------------------------- corrections

def test_no_accidentals_no_change():
    assert an.subtract_accidentals(0.7, 100.0, 0.0).value == 0.7
    assert an.subtract_accidentals(0.4669634902044356, 291229.0, 0.0).value == 0.4669634902044356


def test_unphysical_correction_warns():
    with pytest.warns(RuntimeWarning, match="exceeds 1"):
        out = an.subtract_accidentals(0.9, 100.0, 30.0)
    assert out.unphysical and out.value == pytest.approx(0.9 * 100 / 70)


def test_accidentals_above_mean_rejected():
    with pytest.raises(FitError):
        an.subtract_accidentals(0.5, 10.0, 10.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(1.0, 1e6), st.floats(0.0, 0.99))
def test_correction_never_decreases_visibility(v, mean, frac):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert an.subtract_accidentals(v, mean, frac * mean).value >= v * (1 - 1e-12)


def test_bell_verdicts():
    v = an.bell_check(0.812, 0.055)
    assert v.violates and v.significance == pytest.approx((0.812 - 1 / math.sqrt(2)) / 0.055, rel=1e-12)
    assert v.significance == pytest.approx(1.9, abs=0.05)
    edge = an.bell_check(an.BELL_BOUND, 0.05)
    assert not edge.violates and edge.significance == 0.0
    assert not an.bell_check(0.7071, 0.05).violates
    assert not an.bell_check(0.5, 0.05).violates
