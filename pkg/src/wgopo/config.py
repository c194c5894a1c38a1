"""Run configuration: YAML file with built-in defaults, dotted-key overrides, builders."""
from __future__ import annotations

import copy
import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from . import cavity, dispersion, montecarlo, spdc
from .budget import LossBudget
from .errors import ConfigError, WgopoError

CONFIG_ENV = "WGOPO_CONFIG"


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponents without a dot or sign (1e6, 1.0e6) as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _yaml_load(text):
    return yaml.load(text, Loader=_Loader)  # noqa: S506 - SafeLoader subclass

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "index": {
        "sellmeier_file": None,
        "fsr_ghz": 1.8,
        "tuning_pm_per_c": 44.5,
        "reference_wavelength_nm": 1560.0,
        "reference_temperature_c": 128.6,
        "offset_slope_per_um": 0.0,
    },
    "resonator": {
        "length_cm": 3.6,
        "reflectivity1": 0.85,
        "reflectivity2": 0.85,
        "finesse": 15.4,  # used to set the loss when loss_db_per_cm is null
        "loss_db_per_cm": None,
        "mirror1_file": None,
        "mirror2_file": None,
    },
    "pump": {"wavelength_nm": 780.027, "power_mw": 1.6, "linewidth_hz": 1.0e6},
    "qpm": {"period_um": 16.6, "temperature_c": 128.6, "length_cm": 3.6},
    "filters": {"signal_nm": 1559.5, "idler_nm": 1561.5, "width_pm": 10.0},
    "spectrum": {"band_nm": [1540.0, 1580.0], "threshold": 0.5, "temperature_c": None},
    "search": {"start_c": 128.6, "range_c": 0.35, "grid_step_c": 0.0025},
    "lock": {
        "kp": 0.02, "ki": 0.02, "kd": 0.0,
        "duration_s": 900.0, "dt_s": 0.1, "settle_s": 300.0,
        "drift_c_per_min": 0.01, "time_constant_s": 5.0,
        "peak_rate": None,  # counts/s at the fringe top; null -> predicted detector-1 signal
    },
    "simulation": {
        "pair_rate": 6.6e6,
        "linewidth_mhz": 117.0,
        "duration_s": 100.0,
        "escape_db": 5.2,
        "slab_s": 10.0,
        "arm1": [["silicon filter", 0.4], ["fibre coupling", 5.2], ["filter arm", 2.8], ["lock penalty", 2.4]],
        "arm2": [["silicon filter", 0.4], ["fibre coupling", 5.2], ["filter arm", 3.8], ["lock penalty", 2.4]],
    },
    "detector1": {
        "efficiency": 0.021, "dark": 600.0, "dead_time_us": 30.0,
        "afterpulse_probability": 0.015, "afterpulse_decay_us": 10.0, "jitter_ps": 0.0,
    },
    "detector2": {
        "efficiency": 0.078, "dark": 8.0e-6, "dead_time_us": 10.0,
        "gate_width_ns": 60.0, "gate_offset_ns": 0.0, "jitter_ps": 0.0,
    },
    "franson": {"enabled": False, "delay_ns": 10.0, "visibility": 0.93, "phase": 0.0, "split": 0.5},
    "analysis": {
        "bin_ps": 263.0, "span_ns": 20.0, "window_ns": 1.2,
        "franson_span_ns": 28.0, "sideband_ns": 18.0,
        "fringe_points": 24, "fringe_integration_s": 1000.0,
    },
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {key!r} must be a mapping")
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = v
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = _yaml_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
    return key.strip().split("."), value


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: list[str] | None = None,
             seed: int | None = None) -> RunConfig:
        """Defaults, then the file (or $WGOPO_CONFIG), then overrides, then ``seed``."""
        data = copy.deepcopy(DEFAULTS)
        path = path or os.environ.get(CONFIG_ENV) or None
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    raw = _yaml_load(fh) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(f"malformed config {path}: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError(f"config {path} must be a mapping")
            data = _merge(data, raw)
        for item in overrides or []:
            keys, value = parse_override(item)
            nested: Any = value
            for k in reversed(keys):
                nested = {k: nested}
            data = _merge(data, nested)
        if seed is not None:
            data["seed"] = int(seed)
        cfg = cls(data)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    def validate(self) -> None:
        try:
            int(self.data["seed"])
            self.resonator()
            self.qpm()
            self.sim_config()
            self.signal_filter()
        except WgopoError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    # ---------------------------------------------------------------- builders

    def index_model(self) -> dispersion.WaveguideIndexModel:
        ix = self.data["index"]
        bulk = dispersion.load_sellmeier(ix["sellmeier_file"]) if ix["sellmeier_file"] else None
        default = (bulk is None and ix == DEFAULTS["index"]
                   and self.data["resonator"]["length_cm"] == DEFAULTS["resonator"]["length_cm"])
        if default:
            return dispersion.default_index_model()
        return dispersion.calibrate(
            bulk, length_cm=float(self.data["resonator"]["length_cm"]), fsr_ghz=float(ix["fsr_ghz"]),
            tuning_pm_per_c=float(ix["tuning_pm_per_c"]),
            wavelength_nm=float(ix["reference_wavelength_nm"]),
            temperature_c=float(ix["reference_temperature_c"]),
            offset_slope=float(ix["offset_slope_per_um"]))

    def resonator(self) -> cavity.ResonatorSpec:
        r = self.data["resonator"]
        r1, r2, length = float(r["reflectivity1"]), float(r["reflectivity2"]), float(r["length_cm"])
        if r["loss_db_per_cm"] is None:
            loss = cavity.loss_from_finesse(float(r["finesse"]), r1, r2, length)
        else:
            loss = float(r["loss_db_per_cm"])
        m1 = cavity.load_mirror_curve(r["mirror1_file"]) if r["mirror1_file"] else None
        m2 = cavity.load_mirror_curve(r["mirror2_file"]) if r["mirror2_file"] else None
        return cavity.ResonatorSpec(length, r1, r2, loss, self.index_model(), m1, m2)

    def pump(self) -> spdc.PumpSpec:
        p = self.data["pump"]
        return spdc.PumpSpec(float(p["wavelength_nm"]), float(p["power_mw"]), float(p["linewidth_hz"]))

    def qpm(self) -> spdc.QpmSpec:
        q = self.data["qpm"]
        return spdc.calibrate_qpm(self.pump(), period_um=float(q["period_um"]),
                                  temperature_c=float(q["temperature_c"]),
                                  length_cm=float(q["length_cm"]), index_model=self.index_model())

    def signal_filter(self) -> spdc.FilterSpec:
        f = self.data["filters"]
        if not float(f["width_pm"]) > 0:
            raise ConfigError("filter width must be positive")
        return spdc.FilterSpec(float(f["signal_nm"]), float(f["width_pm"]))

    def chain(self) -> montecarlo.OpticalChain:
        s = self.data["simulation"]
        try:
            arms = [tuple((str(lab), float(db)) for lab, db in s[k]) for k in ("arm1", "arm2")]
        except (TypeError, ValueError) as exc:
            raise ConfigError("arm stages must be [label, dB] pairs") from exc
        return montecarlo.OpticalChain(*arms)

    def detector1(self) -> montecarlo.DetectorSpec:
        d = self.data["detector1"]
        return montecarlo.DetectorSpec("free-running", float(d["efficiency"]), float(d["dark"]),
                                       float(d["dead_time_us"]), float(d["afterpulse_probability"]),
                                       float(d["afterpulse_decay_us"]), jitter_ps=float(d["jitter_ps"]))

    def detector2(self) -> montecarlo.DetectorSpec:
        d = self.data["detector2"]
        return montecarlo.DetectorSpec("gated", float(d["efficiency"]), float(d["dark"]),
                                       float(d["dead_time_us"]), 0.0, 10.0, float(d["gate_width_ns"]),
                                       float(d["gate_offset_ns"]), float(d["jitter_ps"]))

    def franson(self, force: bool = False) -> montecarlo.FransonConfig | None:
        f = self.data["franson"]
        if not (f["enabled"] or force):
            return None
        return montecarlo.FransonConfig(float(f["delay_ns"]), float(f["visibility"]),
                                        float(f["phase"]), float(f["split"]))

    def sim_config(self, *, duration_s: float | None = None, franson: bool | None = None,
                   seed: int | None = None) -> montecarlo.SimConfig:
        s = self.data["simulation"]
        use_franson = self.data["franson"]["enabled"] if franson is None else franson
        return montecarlo.SimConfig(
            pair_rate=float(s["pair_rate"]),
            linewidth_mhz=float(s["linewidth_mhz"]),
            duration_s=float(s["duration_s"] if duration_s is None else duration_s),
            seed=int(self.data["seed"] if seed is None else seed),
            chain=self.chain(),
            escape_probability=10 ** (-float(s["escape_db"]) / 10),
            detector1=self.detector1(),
            detector2=self.detector2(),
            franson=self.franson(force=True) if use_franson else None,
            slab_s=float(s["slab_s"]),
        )

    def loss_budget(self) -> LossBudget:
        return LossBudget.from_config(self.sim_config(franson=False))
