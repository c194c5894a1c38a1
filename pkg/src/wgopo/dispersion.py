"""Extraordinary-ray index model for the Ti:PPLN waveguide.

The bulk crystal is described by a temperature-dependent Sellmeier set. The
waveguide adds an additive effective-index correction and an effective
thermo-optic scale; both are fitted so that the cavity free spectral range
and the resonance tuning rate at the reference wavelength hit prescribed
values. Wavelengths are in nm, temperatures in degC, unless stated.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import ConfigError, DomainError

C_LIGHT = 299_792_458.0  # m/s

REFERENCE_WAVELENGTH_NM = 1560.0
REFERENCE_TEMPERATURE_C = 128.6
DEFAULT_LENGTH_CM = 3.6
DEFAULT_FSR_GHZ = 1.8
DEFAULT_TUNING_PM_PER_C = 44.5

_FD_REL_STEP = 1e-4
_FD_TEMP_STEP = 0.05


@dataclass(frozen=True)
class SellmeierModel:
    """Jundt-form temperature-dependent Sellmeier equation.

    ``coefficients`` is ``[a1..a6, b1..b4]``; wavelength in micrometres.
    """

    name: str
    coefficients: tuple[float, ...]
    wavelength_range_um: tuple[float, float]
    temperature_range_c: tuple[float, float]

    def __post_init__(self):
        if len(self.coefficients) != 10:
            raise ConfigError(f"{self.name}: expected 10 coefficients, got {len(self.coefficients)}")
        lo, hi = self.wavelength_range_um
        tlo, thi = self.temperature_range_c
        if not (0 < lo < hi) or not (tlo < thi):
            raise ConfigError(f"{self.name}: invalid validity ranges")

    def check(self, wavelength_um, temperature_c):
        lam = np.asarray(wavelength_um, dtype=float)
        temp = np.asarray(temperature_c, dtype=float)
        lo, hi = self.wavelength_range_um
        if np.any(~np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
            raise DomainError(
                f"wavelength outside validity range [{lo * 1e3:g}, {hi * 1e3:g}] nm "
                f"of Sellmeier set {self.name!r}"
            )
        tlo, thi = self.temperature_range_c
        if np.any(~np.isfinite(temp)) or np.any(temp < tlo) or np.any(temp > thi):
            raise DomainError(
                f"temperature outside validity range [{tlo:g}, {thi:g}] degC "
                f"of Sellmeier set {self.name!r}"
            )

    def index(self, wavelength_um, temperature_c):
        self.check(wavelength_um, temperature_c)
        return self._index(np.asarray(wavelength_um, float), np.asarray(temperature_c, float))

    def _index(self, lam, temp):
        a1, a2, a3, a4, a5, a6, b1, b2, b3, b4 = self.coefficients
        f = (temp - 24.5) * (temp + 570.82)
        l2 = lam * lam
        n2 = (
            a1
            + b1 * f
            + (a2 + b2 * f) / (l2 - (a3 + b3 * f) ** 2)
            + (a4 + b4 * f) / (l2 - a5 * a5)
            - a6 * l2
        )
        return np.sqrt(n2)


def load_sellmeier(path: str | Path) -> SellmeierModel:
    """Read a Sellmeier set from a YAML file (see ``data/*.yaml`` for the schema)."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    try:
        if raw.get("form", "jundt") != "jundt":
            raise ConfigError(f"unsupported Sellmeier form {raw['form']!r}")
        return SellmeierModel(
            name=str(raw["name"]),
            coefficients=tuple(float(c) for c in raw["coefficients"]),
            wavelength_range_um=tuple(float(v) for v in raw["wavelength_range_um"]),
            temperature_range_c=tuple(float(v) for v in raw["temperature_range_c"]),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed Sellmeier file {path}: {exc}") from exc


def default_sellmeier() -> SellmeierModel:
    ref = resources.files("wgopo") / "data" / "jundt_congruent_ln_e.yaml"
    with resources.as_file(ref) as p:
        return load_sellmeier(p)


@dataclass(frozen=True)
class WaveguideIndexModel:
    """Bulk Sellmeier plus waveguide corrections.

    n_eff(lam, T) = n_b(lam, T_ref) + thermo_scale * (n_b(lam, T) - n_b(lam, T_ref))
                    + offset + offset_slope * (lam - lam_ref)

    ``offset_slope`` is per micrometre.
    """

    bulk: SellmeierModel
    offset: float = 0.0
    offset_slope: float = 0.0
    thermo_scale: float = 1.0
    reference_wavelength_nm: float = REFERENCE_WAVELENGTH_NM
    reference_temperature_c: float = REFERENCE_TEMPERATURE_C
    group_index_target: float | None = None
    tuning_target_pm_per_c: float | None = None

    def n_eff(self, wavelength_nm, temperature_c):
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        temp = np.asarray(temperature_c, dtype=float)
        self.bulk.check(lam, temp)
        return self._n_eff_um(lam, temp)

    def _n_eff_um(self, lam_um, temp):
        t_ref = self.reference_temperature_c
        n_ref = self.bulk._index(lam_um, t_ref)
        n = n_ref + self.thermo_scale * (self.bulk._index(lam_um, temp) - n_ref)
        n = n + self.offset + self.offset_slope * (lam_um - self.reference_wavelength_nm * 1e-3)
        return n

    @property
    def wavelength_range_nm(self) -> tuple[float, float]:
        lo, hi = self.bulk.wavelength_range_um
        return lo * 1e3, hi * 1e3

    @property
    def temperature_range_c(self) -> tuple[float, float]:
        return self.bulk.temperature_range_c


def index(model: WaveguideIndexModel, wavelength_nm, temperature_c):
    """Effective index; scalar in, scalar out (arrays broadcast)."""
    n = model.n_eff(wavelength_nm, temperature_c)
    return float(n) if np.ndim(n) == 0 else n


def _richardson(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def group_index(model: WaveguideIndexModel, wavelength_nm, temperature_c):
    """n_g = n - lam dn/dlam, central difference with Richardson extrapolation."""
    lam = np.asarray(wavelength_nm, dtype=float)
    temp = np.asarray(temperature_c, dtype=float)
    h = lam * _FD_REL_STEP
    lo, hi = model.wavelength_range_nm
    if np.any(lam - h < lo) or np.any(lam + h > hi):
        raise DomainError(
            f"wavelength too close to validity range [{lo:g}, {hi:g}] nm for group index"
        )
    model.bulk.check(lam * 1e-3, temp)
    dn = _richardson(lambda x: model._n_eff_um(x * 1e-3, temp), lam, h)
    ng = model._n_eff_um(lam * 1e-3, temp) - lam * dn
    return float(ng) if np.ndim(ng) == 0 else ng


def dn_dT(model: WaveguideIndexModel, wavelength_nm, temperature_c):
    lam = np.asarray(wavelength_nm, dtype=float)
    temp = float(temperature_c)
    tlo, thi = model.temperature_range_c
    h = _FD_TEMP_STEP
    if temp - h < tlo or temp + h > thi:
        raise DomainError(f"temperature too close to validity range [{tlo:g}, {thi:g}] degC")
    model.bulk.check(lam * 1e-3, temp)
    d = _richardson(lambda t: model._n_eff_um(lam * 1e-3, t), temp, h)
    return float(d) if np.ndim(d) == 0 else d


def tuning_rate(model: WaveguideIndexModel, wavelength_nm, temperature_c) -> float:
    """Resonance wavelength drift d(lam_res)/dT in pm/degC at fixed mode order.

    The cavity length is held fixed; the thermo-optic scale absorbs expansion.
    """
    ng = group_index(model, wavelength_nm, temperature_c)
    return float(wavelength_nm) * dn_dT(model, wavelength_nm, temperature_c) / ng * 1e3


def bandwidth_convert(width_pm, wavelength_nm):
    """Wavelength width (pm) to frequency width (MHz): dnu = c dlam / lam^2."""
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("wavelength must be positive")
    out = C_LIGHT * np.asarray(width_pm, float) * 1e-12 / (lam * 1e-9) ** 2 / 1e6
    return float(out) if np.ndim(out) == 0 else out


def bandwidth_convert_inverse(width_mhz, wavelength_nm):
    """Frequency width (MHz) to wavelength width (pm)."""
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("wavelength must be positive")
    out = np.asarray(width_mhz, float) * 1e6 * (lam * 1e-9) ** 2 / C_LIGHT * 1e12
    return float(out) if np.ndim(out) == 0 else out


def calibrate(
    bulk: SellmeierModel | None = None,
    *,
    length_cm: float = DEFAULT_LENGTH_CM,
    fsr_ghz: float = DEFAULT_FSR_GHZ,
    tuning_pm_per_c: float = DEFAULT_TUNING_PM_PER_C,
    wavelength_nm: float = REFERENCE_WAVELENGTH_NM,
    temperature_c: float = REFERENCE_TEMPERATURE_C,
    offset_slope: float = 0.0,
) -> WaveguideIndexModel:
    """Fit the constant index offset and thermo-optic scale.

    Both unknowns enter linearly at the reference temperature, so the fit is
    closed form: the offset fixes the group index, then the scale fixes the
    tuning rate.
    """
    bulk = bulk or default_sellmeier()
    target_ng = C_LIGHT / (2 * length_cm * 1e-2 * fsr_ghz * 1e9)
    base = WaveguideIndexModel(
        bulk,
        offset=0.0,
        offset_slope=offset_slope,
        thermo_scale=1.0,
        reference_wavelength_nm=wavelength_nm,
        reference_temperature_c=temperature_c,
    )
    ng0 = group_index(base, wavelength_nm, temperature_c)
    offset = target_ng - ng0
    model = replace(base, offset=offset)
    rate = tuning_rate(model, wavelength_nm, temperature_c)
    model = replace(
        model,
        thermo_scale=tuning_pm_per_c / rate,
        group_index_target=target_ng,
        tuning_target_pm_per_c=tuning_pm_per_c,
    )
    return model


_DEFAULT_MODEL: WaveguideIndexModel | None = None


def default_index_model() -> WaveguideIndexModel:
    """Calibrated model for the 3.6 cm resonator (cached)."""
    global _DEFAULT_MODEL
    if _DEFAULT_MODEL is None:
        _DEFAULT_MODEL = calibrate()
    return _DEFAULT_MODEL


def sellmeier_from_coefficients(name: str, coefficients: Sequence[float],
                                wavelength_range_um=(0.4, 5.0),
                                temperature_range_c=(20.0, 250.0)) -> SellmeierModel:
    return SellmeierModel(name, tuple(float(c) for c in coefficients),
                          tuple(wavelength_range_um), tuple(temperature_range_c))
