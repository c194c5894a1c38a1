"""Quasi-phase-matched SPDC in the doubly resonant waveguide.

Covers the phase-matching envelope, the cluster emission spectrum, the
Giordmaine-Miller pairing of signal and idler combs, and the temperature
search for double resonance behind a narrow signal filter.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .cavity import ModeComb, ResonatorSpec, airy, band_frequencies, fsr, fwhm, mode_comb
from .dispersion import (
    C_LIGHT,
    REFERENCE_TEMPERATURE_C,
    WaveguideIndexModel,
    default_index_model,
    tuning_rate,
)
from .errors import ConfigError, DomainError, SearchError

NOMINAL_PUMP_NM = 780.027
NOMINAL_PERIOD_UM = 16.6
NOMINAL_QPM_TEMPERATURE_C = REFERENCE_TEMPERATURE_C
NOMINAL_SIGNAL_FILTER_NM = 1559.5
NOMINAL_IDLER_FILTER_NM = 1561.5
NOMINAL_FILTER_WIDTH_PM = 10.0


@dataclass(frozen=True)
class PumpSpec:
    wavelength_nm: float = NOMINAL_PUMP_NM
    power_mw: float = 1.6
    linewidth_hz: float = 1e6

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise ConfigError("pump wavelength must be positive")
        if not self.power_mw >= 0:
            raise ConfigError("pump power must be >= 0")

    @property
    def frequency(self) -> float:
        return C_LIGHT / (self.wavelength_nm * 1e-9)

    @property
    def degeneracy_nm(self) -> float:
        return 2 * self.wavelength_nm

    @property
    def coherence_time_ns(self) -> float:
        return 1e9 / (np.pi * self.linewidth_hz)


@dataclass(frozen=True)
class QpmSpec:
    """Type-0 (eee) quasi-phase matching with a constant calibration offset (rad/m)."""

    period_um: float = NOMINAL_PERIOD_UM
    temperature_c: float = NOMINAL_QPM_TEMPERATURE_C
    length_cm: float = 3.6
    mismatch_offset: float = 0.0
    index_model: WaveguideIndexModel = field(default_factory=default_index_model)
    interaction: str = "type-0 eee"

    def __post_init__(self):
        if not self.period_um > 0:
            raise ConfigError("poling period must be positive")
        if not self.length_cm > 0:
            raise ConfigError("crystal length must be positive")


@dataclass(frozen=True)
class FilterSpec:
    """Lorentzian band-pass filter."""

    center_nm: float = NOMINAL_SIGNAL_FILTER_NM
    width_pm: float = NOMINAL_FILTER_WIDTH_PM

    @property
    def center_hz(self) -> float:
        return C_LIGHT / (self.center_nm * 1e-9)

    @property
    def width_hz(self) -> float:
        return C_LIGHT * self.width_pm * 1e-12 / (self.center_nm * 1e-9) ** 2

    def response(self, frequency_hz):
        x = 2 * (np.asarray(frequency_hz) - self.center_hz) / self.width_hz
        return 1.0 / (1.0 + x * x)


def idler_wavelength(pump: PumpSpec, signal_nm):
    """Energy conservation: 1/lam_i = 1/lam_p - 1/lam_s."""
    lam_s = np.asarray(signal_nm, dtype=float)
    return 1.0 / (1.0 / pump.wavelength_nm - 1.0 / lam_s)


def _raw_mismatch(model, pump, signal_nm, temperature_c, period_um):
    lam_s = np.asarray(signal_nm, dtype=float)
    lam_i = idler_wavelength(pump, lam_s)
    lo, hi = model.wavelength_range_nm
    if np.any(lam_i < lo) or np.any(lam_i > hi) or np.any(lam_s < lo) or np.any(lam_s > hi):
        raise DomainError(f"signal or implied idler outside validity range [{lo:g}, {hi:g}] nm")
    n_p = model.n_eff(pump.wavelength_nm, temperature_c)
    n_s = model.n_eff(lam_s, temperature_c)
    n_i = model.n_eff(lam_i, temperature_c)
    k_p = n_p / pump.wavelength_nm
    k_si = n_s / lam_s + n_i / lam_i
    return 2 * np.pi * ((k_p - k_si) * 1e9 - 1e6 / period_um)


def calibrate_qpm(
    pump: PumpSpec | None = None,
    *,
    period_um: float = NOMINAL_PERIOD_UM,
    temperature_c: float = NOMINAL_QPM_TEMPERATURE_C,
    length_cm: float = 3.6,
    index_model: WaveguideIndexModel | None = None,
) -> QpmSpec:
    """Offset the mismatch so it vanishes at degeneracy at ``temperature_c``."""
    pump = pump or PumpSpec()
    model = index_model or default_index_model()
    raw = float(_raw_mismatch(model, pump, pump.degeneracy_nm, temperature_c, period_um))
    return QpmSpec(period_um, temperature_c, length_cm, -raw, model)


def phase_mismatch(qpm: QpmSpec, pump: PumpSpec, signal_nm, temperature_c):
    """beta_p - beta_s - beta_i - 2 pi / Lambda (+ calibration offset), rad/m."""
    out = _raw_mismatch(qpm.index_model, pump, signal_nm, temperature_c, qpm.period_um)
    out = out + qpm.mismatch_offset
    return float(out) if np.ndim(out) == 0 else out


def spdc_envelope(qpm: QpmSpec, pump: PumpSpec, signal_nm, temperature_c):
    """sinc^2(dbeta L / 2), unit peak at perfect phase matching."""
    dk = phase_mismatch(qpm, pump, signal_nm, temperature_c)
    x = np.asarray(dk) * qpm.length_cm * 1e-2 / 2
    out = np.sinc(x / np.pi) ** 2
    return float(out) if np.ndim(out) == 0 else out


def emission_weight(resonator: ResonatorSpec, qpm: QpmSpec, pump: PumpSpec, signal_hz, temperature_c):
    """Doubly resonant emission weight at signal frequency ``signal_hz``."""
    nu_s = np.asarray(signal_hz, dtype=float)
    nu_i = pump.frequency - nu_s
    env = spdc_envelope(qpm, pump, C_LIGHT / nu_s * 1e9, temperature_c)
    return env * airy(resonator, nu_s, temperature_c) * airy(resonator, nu_i, temperature_c)


@dataclass(frozen=True)
class ClusterSpectrum:
    frequencies: np.ndarray  # Hz
    weight: np.ndarray
    temperature: float
    clusters: list  # (nu_lo, nu_hi) in Hz
    mode_frequencies: np.ndarray
    mode_weights: np.ndarray
    threshold: float

    @property
    def wavelengths_nm(self):
        return C_LIGHT / self.frequencies * 1e9

    @property
    def cluster_wavelengths_nm(self):
        return [(C_LIGHT / hi * 1e9, C_LIGHT / lo * 1e9) for lo, hi in self.clusters]

    def cluster_containing(self, wavelength_nm: float):
        nu = C_LIGHT / (wavelength_nm * 1e-9)
        for lo, hi in self.clusters:
            if lo <= nu <= hi:
                return lo, hi
        return None

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_thz", "wavelength_nm", "weight"])
            for nu, wt in zip(self.frequencies, self.weight):
                w.writerow([f"{nu / 1e12:.9f}", f"{C_LIGHT / nu * 1e9:.6f}", f"{wt:.6e}"])


def _check_band(resonator, pump, band_nm):
    lo, hi = sorted(float(x) for x in band_nm)
    wl_lo, wl_hi = resonator.index_model.wavelength_range_nm
    mirrored = idler_wavelength(pump, np.array([lo, hi]))
    if lo < wl_lo or hi > wl_hi or np.any(mirrored < wl_lo) or np.any(mirrored > wl_hi) \
            or np.any(mirrored <= 0):
        raise DomainError(f"band or mirrored band outside validity range [{wl_lo:g}, {wl_hi:g}] nm")
    return lo, hi


def _mirrored_band(pump, lo, hi):
    a, b = idler_wavelength(pump, np.array([lo, hi]))
    return min(a, b), max(a, b)


def mode_pair_weights(resonator, qpm, pump, temperature_c, signal: ModeComb, idler: ModeComb):
    """Peak emission weight of each signal mode paired with its nearest idler mode."""
    if len(signal) == 0 or len(idler) == 0:
        return np.empty(0), np.empty(0, dtype=int), np.empty(0)
    target = pump.frequency - signal.frequencies
    j = np.searchsorted(idler.frequencies, target)
    j = np.clip(j, 1, len(idler) - 1) if len(idler) > 1 else np.zeros_like(j)
    if len(idler) > 1:
        left = idler.frequencies[j - 1]
        right = idler.frequencies[j]
        j = np.where(np.abs(target - left) <= np.abs(right - target), j - 1, j)
    detuning = signal.frequencies + idler.frequencies[j] - pump.frequency
    # for two equal Lorentzians the product peaks midway between the resonances
    nu_peak = signal.frequencies - detuning / 2
    w = emission_weight(resonator, qpm, pump, nu_peak, temperature_c)
    return np.asarray(w), j, detuning


def cluster_spectrum(
    resonator: ResonatorSpec,
    qpm: QpmSpec,
    pump: PumpSpec,
    temperature_c: float,
    band_nm,
    *,
    step_hz: float | None = None,
    threshold: float = 0.5,
) -> ClusterSpectrum:
    """Emission weight on a uniform signal-frequency grid plus cluster intervals.

    Clusters are maximal runs of consecutive signal modes whose pair weight is
    at least ``threshold`` times the largest in-band pair weight.
    """
    lo, hi = _check_band(resonator, pump, band_nm)
    width = fwhm(resonator, 0.5 * (lo + hi), temperature_c)
    step = step_hz or width / 10
    nu_lo, nu_hi = band_frequencies((lo, hi))
    grid = nu_lo + step * np.arange(int(np.floor((nu_hi - nu_lo) / step)) + 1)
    weight = emission_weight(resonator, qpm, pump, grid, temperature_c)

    sig = mode_comb(resonator, temperature_c, (lo, hi))
    ilo, ihi = _mirrored_band(pump, lo, hi)
    pad = 2 * fsr(resonator, 0.5 * (ilo + ihi), temperature_c) * (0.5 * (ilo + ihi)) ** 2 / C_LIGHT * 1e-9
    idl = mode_comb(resonator, temperature_c, (ilo - pad, ihi + pad))
    mw, _, _ = mode_pair_weights(resonator, qpm, pump, temperature_c, sig, idl)
    clusters = []
    if mw.size and mw.max() > 0:
        above = mw >= threshold * mw.max()
        half = width / 2
        start = None
        for k, flag in enumerate(np.append(above, False)):
            if flag and start is None:
                start = k
            elif not flag and start is not None:
                clusters.append((sig.frequencies[start] - half, sig.frequencies[k - 1] + half))
                start = None
    return ClusterSpectrum(grid, weight, temperature_c, clusters, sig.frequencies, mw, threshold)


@dataclass(frozen=True)
class GMDiagram:
    signal: ModeComb
    idler: ModeComb
    partner: np.ndarray  # index into idler comb for each signal mode
    detuning: np.ndarray  # Hz, nu_s + nu_i - nu_p for each signal mode
    fwhm: float

    @property
    def double_resonant(self):
        return np.abs(self.detuning) <= self.fwhm / 2

    def detuning_near(self, wavelength_nm: float) -> float:
        nu = C_LIGHT / (wavelength_nm * 1e-9)
        k = int(np.argmin(np.abs(self.signal.frequencies - nu)))
        return float(self.detuning[k])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode_index", "signal_thz", "idler_thz", "detuning_mhz", "double_resonant"])
            for k, (nu, j, d) in enumerate(zip(self.signal.frequencies, self.partner, self.detuning)):
                w.writerow([k, f"{nu / 1e12:.9f}", f"{self.idler.frequencies[j] / 1e12:.9f}",
                            f"{d / 1e6:.6f}", int(abs(d) <= self.fwhm / 2)])


def gm_diagram(resonator: ResonatorSpec, pump: PumpSpec, temperature_c: float, band_nm) -> GMDiagram:
    """Signal comb in ``band_nm`` paired against the idler comb on the mirrored axis."""
    lo, hi = _check_band(resonator, pump, band_nm)
    sig = mode_comb(resonator, temperature_c, (lo, hi))
    ilo, ihi = _mirrored_band(pump, lo, hi)
    pad = 2 * fsr(resonator, 0.5 * (ilo + ihi), temperature_c) * (0.5 * (ilo + ihi)) ** 2 / C_LIGHT * 1e-9
    idl = mode_comb(resonator, temperature_c, (ilo - pad, ihi + pad))
    if len(sig) == 0 or len(idl) == 0:
        return GMDiagram(sig, idl, np.empty(0, dtype=int), np.empty(0), sig.fwhm)
    target = pump.frequency - sig.frequencies
    j = np.searchsorted(idl.frequencies, target)
    j = np.clip(j, 1, len(idl) - 1)
    left = idl.frequencies[j - 1]
    right = idl.frequencies[j]
    j = np.where(np.abs(target - left) <= np.abs(right - target), j - 1, j)
    detuning = sig.frequencies + idl.frequencies[j] - pump.frequency
    return GMDiagram(sig, idl, j, detuning, sig.fwhm)


def frequency_tuning_rate(resonator: ResonatorSpec, wavelength_nm: float, temperature_c: float) -> float:
    """Resonance frequency drift in Hz/degC (negative: modes move red with heating)."""
    dl = tuning_rate(resonator.index_model, wavelength_nm, temperature_c) * 1e-12
    return -C_LIGHT * dl / (wavelength_nm * 1e-9) ** 2


def mode_hop_period(resonator: ResonatorSpec, wavelength_nm=1560.0, temperature_c=NOMINAL_QPM_TEMPERATURE_C):
    """Temperature change that moves the comb by one FSR (degC)."""
    return fsr(resonator, wavelength_nm, temperature_c) / abs(
        frequency_tuning_rate(resonator, wavelength_nm, temperature_c))


def filter_metric(
    resonator: ResonatorSpec,
    qpm: QpmSpec,
    pump: PumpSpec,
    temperature_c,
    filt: FilterSpec | None = None,
    *,
    span_fsr: float = 3.0,
    step_hz: float | None = None,
):
    """Emission weight integrated through the signal filter, in Hz.

    Vectorized over ``temperature_c``.
    """
    filt = filt or FilterSpec()
    temps = np.atleast_1d(np.asarray(temperature_c, dtype=float))
    f_sr = fsr(resonator, filt.center_nm, float(temps[0]))
    step = step_hz or fwhm(resonator, filt.center_nm, float(temps[0])) / 15
    half = span_fsr * f_sr
    grid = filt.center_hz + np.arange(-half, half + step / 2, step)
    resp = filt.response(grid)
    w = emission_weight(resonator, qpm, pump, grid[None, :], temps[:, None])
    out = (w * resp[None, :]).sum(axis=1) * step
    return float(out[0]) if np.ndim(temperature_c) == 0 else out


def ideal_filter_metric(resonator: ResonatorSpec, wavelength_nm=NOMINAL_SIGNAL_FILTER_NM) -> float:
    """Metric of a perfectly aligned, doubly resonant mode at filter centre (~ pi FWHM / 4)."""
    return np.pi * fwhm(resonator, wavelength_nm) / 4


@dataclass(frozen=True)
class DoubleResonance:
    temperature: float
    metric: float
    scan_temperatures: np.ndarray
    scan_metric: np.ndarray


def find_double_resonance(
    resonator: ResonatorSpec,
    qpm: QpmSpec,
    pump: PumpSpec,
    t0: float,
    span: float,
    filt: FilterSpec | None = None,
    *,
    grid_step: float = 0.0025,
    tolerance: float = 1e-5,
    min_relative_metric: float = 1e-3,
) -> DoubleResonance:
    """Temperature in [t0 - span/2, t0 + span/2] maximizing the filtered emission."""
    if span < 0:
        raise ConfigError("temperature range must be >= 0")
    if span == 0:
        m = filter_metric(resonator, qpm, pump, t0, filt)
        return DoubleResonance(t0, m, np.array([t0]), np.array([m]))
    n = int(np.ceil(span / grid_step)) + 1
    temps = np.linspace(t0 - span / 2, t0 + span / 2, n)
    metric = np.concatenate([filter_metric(resonator, qpm, pump, chunk, filt)
                             for chunk in np.array_split(temps, max(1, n // 32))])
    ref = ideal_filter_metric(resonator, (filt or FilterSpec()).center_nm)
    k = int(np.argmax(metric))
    if metric[k] < min_relative_metric * ref:
        raise SearchError(
            "no double resonance found in range",
            {"t_min": temps[0], "t_max": temps[-1], "best_metric": float(metric[k]),
             "reference_metric": ref},
        )
    h = temps[1] - temps[0]
    lo, hi = max(temps[0], temps[k] - h), min(temps[-1], temps[k] + h)
    res = minimize_scalar(lambda t: -filter_metric(resonator, qpm, pump, t, filt),
                          bounds=(lo, hi), method="bounded", options={"xatol": tolerance})
    t_best, m_best = float(res.x), float(-res.fun)
    if m_best < metric[k]:
        t_best, m_best = float(temps[k]), float(metric[k])
    return DoubleResonance(t_best, m_best, temps, metric)


def central_cluster_weight(resonator, qpm, pump, temperature_c, half_width_modes: int = 5) -> float:
    """Largest mode-pair weight within a few modes of degeneracy."""
    deg = pump.degeneracy_nm
    f = fsr(resonator, deg, temperature_c)
    dl = (half_width_modes + 1) * f * (deg * 1e-9) ** 2 / C_LIGHT * 1e9
    band = (deg - dl, deg + dl)
    sig = mode_comb(resonator, temperature_c, band)
    idl = mode_comb(resonator, temperature_c, (deg - 2 * dl, deg + 2 * dl))
    w, _, _ = mode_pair_weights(resonator, qpm, pump, temperature_c, sig, idl)
    return float(w.max()) if w.size else 0.0
