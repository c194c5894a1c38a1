"""Fabry-Perot model of the mirror-coated waveguide resonator.

Frequencies are in Hz, lengths in cm, temperatures in degC.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dispersion import (
    C_LIGHT,
    DEFAULT_LENGTH_CM,
    REFERENCE_WAVELENGTH_NM,
    WaveguideIndexModel,
    default_index_model,
    group_index,
)
from .errors import ConfigError, DomainError, InfeasibleError, ModelError

NOMINAL_FINESSE = 15.4
NOMINAL_REFLECTIVITY = 0.85
NOMINAL_LOSS_DB_PER_CM = 0.06


@dataclass(frozen=True)
class MirrorCurve:
    """Tabulated mirror transmittance versus wavelength, linearly interpolated."""

    wavelength_nm: np.ndarray
    transmittance: np.ndarray

    def reflectivity(self, wavelength_nm):
        return 1.0 - np.interp(wavelength_nm, self.wavelength_nm, self.transmittance)


def load_mirror_curve(path: str | Path) -> MirrorCurve:
    """Two-column text file: wavelength (nm), transmittance. ``#`` starts a comment."""
    try:
        data = np.loadtxt(path, comments="#", delimiter=None, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"cannot parse mirror curve {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ConfigError(f"mirror curve {path} must have two columns and >= 2 rows")
    order = np.argsort(data[:, 0])
    wl, tr = data[order, 0], data[order, 1]
    if np.any(tr < 0) or np.any(tr > 1):
        raise ConfigError("mirror transmittance must lie in [0, 1]")
    return MirrorCurve(wl, tr)


@dataclass(frozen=True)
class ResonatorSpec:
    length_cm: float = DEFAULT_LENGTH_CM
    r1: float = NOMINAL_REFLECTIVITY
    r2: float = NOMINAL_REFLECTIVITY
    loss_db_per_cm: float = 0.0
    index_model: WaveguideIndexModel = field(default_factory=default_index_model)
    mirror1: MirrorCurve | None = None
    mirror2: MirrorCurve | None = None

    def __post_init__(self):
        if not self.length_cm > 0:
            raise ConfigError("resonator length must be positive")
        if not (0 < self.r1 < 1 and 0 < self.r2 < 1):
            raise ConfigError("mirror reflectivities must lie in (0, 1)")
        if not self.loss_db_per_cm >= 0:
            raise ConfigError("propagation loss must be >= 0 dB/cm")

    @property
    def single_pass_transmission(self) -> float:
        return 10 ** (-self.loss_db_per_cm * self.length_cm / 10)

    def reflectivities(self, wavelength_nm=None):
        if wavelength_nm is None:
            return self.r1, self.r2
        r1 = self.mirror1.reflectivity(wavelength_nm) if self.mirror1 else self.r1
        r2 = self.mirror2.reflectivity(wavelength_nm) if self.mirror2 else self.r2
        return r1, r2


@dataclass(frozen=True)
class ModeComb:
    frequencies: np.ndarray  # Hz, strictly increasing
    fsr: np.ndarray  # Hz, adjacent spacing
    fwhm: float  # Hz
    temperature: float

    def __len__(self):
        return len(self.frequencies)

    @property
    def frequencies_thz(self):
        return self.frequencies / 1e12

    @property
    def fsr_ghz(self):
        return self.fsr / 1e9

    @property
    def fwhm_mhz(self):
        return self.fwhm / 1e6


def round_trip_coefficient(spec: ResonatorSpec, wavelength_nm=None):
    """Round-trip field amplitude factor rho = sqrt(R1 R2) * t_pass."""
    r1, r2 = spec.reflectivities(wavelength_nm)
    return np.sqrt(np.asarray(r1) * np.asarray(r2)) * spec.single_pass_transmission


def finesse(spec: ResonatorSpec) -> float:
    rho = float(round_trip_coefficient(spec))
    if rho >= 1:
        raise ModelError("round-trip factor >= 1: gain is not supported")
    return np.pi * np.sqrt(rho) / (1 - rho)


def loss_from_finesse(finesse_value: float, r1: float, r2: float, length_cm: float) -> float:
    """Propagation loss (dB/cm) that produces ``finesse_value`` with the given mirrors."""
    if finesse_value <= 0 or length_cm <= 0:
        raise InfeasibleError("finesse and length must be positive")
    f = float(finesse_value)
    x = (-np.pi + np.sqrt(np.pi ** 2 + 4 * f * f)) / (2 * f)
    rho = x * x
    t_pass = rho / np.sqrt(r1 * r2)
    if t_pass > 1 + 1e-12:
        raise InfeasibleError(
            f"finesse {f:g} exceeds the lossless finesse "
            f"{finesse(ResonatorSpec(length_cm, r1, r2, 0.0)):.4g} for these mirrors"
        )
    t_pass = min(t_pass, 1.0)
    return max(0.0, -10 * np.log10(t_pass) / length_cm)


def escape_probability_from(t_pass: float, reflectivity: float) -> float:
    """Probability that a resonant photon born mid-cavity leaves through one face.

    sqrt(t) (1 - R) / (1 - (t R)^2), with t the single-pass power transmission.
    """
    if not 0 < t_pass <= 1:
        raise ModelError("single-pass transmission must lie in (0, 1]")
    if not 0 <= reflectivity < 1:
        raise ModelError("reflectivity must lie in [0, 1)")
    tr = t_pass * reflectivity
    if tr >= 1:
        raise ModelError("t_pass * R >= 1")
    return np.sqrt(t_pass) * (1 - reflectivity) / (1 - tr * tr)


def escape_probability(spec: ResonatorSpec, face: int = 1) -> float:
    r = spec.r1 if face == 1 else spec.r2
    return escape_probability_from(spec.single_pass_transmission, r)


def round_trip_phase(spec: ResonatorSpec, frequency_hz, temperature_c):
    nu = np.asarray(frequency_hz, dtype=float)
    lam_nm = C_LIGHT / nu * 1e9
    n = spec.index_model.n_eff(lam_nm, temperature_c)
    return 4 * np.pi * nu * n * spec.length_cm * 1e-2 / C_LIGHT


def _airy_terms(spec, frequency_hz, temperature_c):
    nu = np.asarray(frequency_hz, dtype=float)
    lam_nm = C_LIGHT / nu * 1e9
    phi = round_trip_phase(spec, nu, temperature_c)
    if spec.mirror1 is None and spec.mirror2 is None:
        r1, r2 = spec.r1, spec.r2
    else:
        r1, r2 = spec.reflectivities(lam_nm)
    t = spec.single_pass_transmission
    rho = np.sqrt(r1 * r2) * t
    return phi, r1, r2, t, rho


def transmission(spec: ResonatorSpec, frequency_hz, temperature_c):
    """Airy power transmittance of the resonator."""
    phi, r1, r2, t, rho = _airy_terms(spec, frequency_hz, temperature_c)
    s = np.sin(phi / 2)
    out = (1 - r1) * (1 - r2) * t / ((1 - rho) ** 2 + 4 * rho * s * s)
    return float(out) if np.ndim(out) == 0 else out


def airy(spec: ResonatorSpec, frequency_hz, temperature_c):
    """Airy response normalized to unit peak (intracavity resonance enhancement shape)."""
    phi, _, _, _, rho = _airy_terms(spec, frequency_hz, temperature_c)
    s = np.sin(phi / 2)
    out = (1 - rho) ** 2 / ((1 - rho) ** 2 + 4 * rho * s * s)
    return float(out) if np.ndim(out) == 0 else out


def fsr(spec: ResonatorSpec, wavelength_nm=REFERENCE_WAVELENGTH_NM, temperature_c=None) -> float:
    """Local free spectral range c / (2 n_g L) in Hz."""
    if temperature_c is None:
        temperature_c = spec.index_model.reference_temperature_c
    ng = group_index(spec.index_model, wavelength_nm, temperature_c)
    return C_LIGHT / (2 * ng * spec.length_cm * 1e-2)


def fwhm(spec: ResonatorSpec, wavelength_nm=REFERENCE_WAVELENGTH_NM, temperature_c=None) -> float:
    """Resonance full width at half maximum in Hz (FSR / finesse)."""
    return fsr(spec, wavelength_nm, temperature_c) / finesse(spec)


def _golden_max(f, a, b, tol=1e-3):
    """Vectorized golden-section maximization over brackets [a, b]."""
    g = (np.sqrt(5) - 1) / 2
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    while np.any(b - a > tol):
        c = b - g * (b - a)
        d = a + g * (b - a)
        left = f(c) > f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return (a + b) / 2


def band_frequencies(band_nm) -> tuple[float, float]:
    lo_nm, hi_nm = sorted(float(x) for x in band_nm)
    return C_LIGHT / (hi_nm * 1e-9), C_LIGHT / (lo_nm * 1e-9)


def mode_comb(spec: ResonatorSpec, temperature_c: float, band_nm) -> ModeComb:
    """All transmission maxima inside ``band_nm`` (wavelength interval in nm)."""
    lo_nm, hi_nm = sorted(float(x) for x in band_nm)
    wl_lo, wl_hi = spec.index_model.wavelength_range_nm
    if lo_nm < wl_lo or hi_nm > wl_hi:
        raise DomainError(f"band outside validity range [{wl_lo:g}, {wl_hi:g}] nm")
    width_hz = fwhm(spec, 0.5 * (lo_nm + hi_nm), temperature_c)
    if hi_nm <= lo_nm:
        return ModeComb(np.empty(0), np.empty(0), width_hz, temperature_c)
    nu_lo, nu_hi = band_frequencies((lo_nm, hi_nm))
    step = fsr(spec, 0.5 * (lo_nm + hi_nm), temperature_c) / 20
    nu0 = nu_lo - step
    # work in offsets from nu0 so golden-section tolerances are absolute Hz
    x = np.arange(0.0, nu_hi - nu0 + 2 * step, step)
    vals = airy(spec, nu0 + x, temperature_c)
    interior = (vals[1:-1] >= vals[:-2]) & (vals[1:-1] > vals[2:])
    idx = np.nonzero(interior)[0] + 1
    if idx.size == 0:
        return ModeComb(np.empty(0), np.empty(0), width_hz, temperature_c)
    peaks = _golden_max(lambda off: airy(spec, nu0 + off, temperature_c), x[idx - 1], x[idx + 1])
    freqs = nu0 + peaks
    freqs = freqs[(freqs >= nu_lo) & (freqs <= nu_hi)]
    freqs.sort()
    return ModeComb(freqs, np.diff(freqs), width_hz, temperature_c)


def default_resonator(index_model: WaveguideIndexModel | None = None, **overrides) -> ResonatorSpec:
    """3.6 cm resonator, R = 0.85 both faces, loss set so the finesse is 15.4."""
    alpha = loss_from_finesse(NOMINAL_FINESSE, NOMINAL_REFLECTIVITY, NOMINAL_REFLECTIVITY, DEFAULT_LENGTH_CM)
    spec = ResonatorSpec(
        length_cm=DEFAULT_LENGTH_CM,
        r1=NOMINAL_REFLECTIVITY,
        r2=NOMINAL_REFLECTIVITY,
        loss_db_per_cm=alpha,
        index_model=index_model or default_index_model(),
    )
    return replace(spec, **overrides) if overrides else spec
