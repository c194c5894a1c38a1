"""Closed-form loss, rate and accidental-coincidence bookkeeping.

Conventions: arm 1 feeds the free-running detector (the trigger), arm 2 the
gated one. Rates are per second; accidental densities are Hz/ns, i.e.
coincidences per second per ns of delay window.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from scipy.optimize import brentq

from .analysis import coherence_times
from .dispersion import REFERENCE_WAVELENGTH_NM, bandwidth_convert_inverse
from .errors import ConfigError, ModelError
from .montecarlo import (
    NOMINAL_ESCAPE_DB,
    DetectorSpec,
    OpticalChain,
    SimConfig,
    default_detector1,
    default_detector2,
)

NOMINAL_PAIR_RATE = 6.6e6
NOMINAL_LINEWIDTH_MHZ = 117.0
NOMINAL_PUMP_MW = 1.6


@dataclass(frozen=True)
class LossBudget:
    chain: OpticalChain = field(default_factory=OpticalChain)
    escape_probability: float = 10 ** (-NOMINAL_ESCAPE_DB / 10)
    efficiency1: float = 0.021
    efficiency2: float = 0.078
    port_transmission: float = 1.0  # interferometer output-port factor per photon

    def __post_init__(self):
        for name in ("escape_probability", "efficiency1", "efficiency2", "port_transmission"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_config(cls, cfg: SimConfig) -> LossBudget:
        port = cfg.franson.split if cfg.franson is not None else 1.0
        return cls(cfg.chain, cfg.escape_probability, cfg.detector1.efficiency,
                   cfg.detector2.efficiency, port)


def arm_losses(b: LossBudget) -> tuple[float, float, float, float]:
    """(dB arm 1, dB arm 2, survival arm 1, survival arm 2), survival excluding detectors."""
    db1, db2 = b.chain.total_db(1), b.chain.total_db(2)
    s1 = b.escape_probability * 10 ** (-db1 / 10) * b.port_transmission
    s2 = b.escape_probability * 10 ** (-db2 / 10) * b.port_transmission
    return db1, db2, s1, s2


def free_running_rate(input_rate: float, det: DetectorSpec) -> float:
    """Click rate of a free-running detector fed by a Poisson flux of ``input_rate``.

    Renewal argument: after each click the detector is dead for tau; with
    probability p an after-pulse competes with the next photon at rate
    1/tau_ap. Reduces to the non-paralyzable lambda/(1 + lambda tau) for p = 0.
    """
    tau = det.dead_time_us * 1e-6
    p = det.afterpulse_probability
    r_ap = 1 / (det.afterpulse_decay_us * 1e-6)
    if input_rate <= 0:
        return 0.0
    mean_gap = tau + (1 - p) / input_rate + p / (input_rate + r_ap)
    return 1 / mean_gap


def afterpulse_fraction(input_rate: float, det: DetectorSpec) -> float:
    """Fraction of clicks that are after-pulses."""
    r_ap = 1 / (det.afterpulse_decay_us * 1e-6)
    return det.afterpulse_probability * r_ap / (input_rate + r_ap) if input_rate > 0 else 0.0


@dataclass(frozen=True)
class RatePrediction:
    generated: float  # pairs/s in the filter window
    singles1: float  # clicks/s on the free-running detector, dead time and after-pulses included
    singles1_ideal: float  # R s1 eta1 + dark1, no dead time
    singles2: float  # clicks/s on the gated detector
    flux2_per_ns: float  # detected-photon probability density at detector 2 (ungated), 1/ns
    coincidences: float  # R (s1 eta1)(s2 eta2)
    coincidences_detected: float  # same, times the detector-1 live fraction
    live_fraction: float
    afterpulse_rate: float
    real1: float  # photon clicks/s on detector 1
    dark1: float  # dark clicks/s on detector 1 (after dead time)
    brightness: float  # pairs/(s MHz mW)
    brightness_per_pm: float  # pairs/(s pm mW)
    mu: float  # pairs per coherence time

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def predict_rates(pair_rate: float, b: LossBudget | None = None, *,
                  detector1: DetectorSpec | None = None, detector2: DetectorSpec | None = None,
                  linewidth_mhz: float = NOMINAL_LINEWIDTH_MHZ, pump_mw: float = NOMINAL_PUMP_MW,
                  wavelength_nm: float = REFERENCE_WAVELENGTH_NM) -> RatePrediction:
    if pair_rate < 0:
        raise ConfigError("pair rate must be >= 0")
    if linewidth_mhz <= 0 or pump_mw <= 0:
        raise ConfigError("linewidth and pump power must be positive")
    b = b or LossBudget()
    d1 = detector1 or default_detector1()
    d2 = detector2 or default_detector2()
    _, _, s1, s2 = arm_losses(b)
    a1, a2 = s1 * b.efficiency1, s2 * b.efficiency2
    photon1 = pair_rate * a1
    lam = photon1 + d1.dark
    clicks1 = free_running_rate(lam, d1)
    live = 1 - clicks1 * d1.dead_time_us * 1e-6
    ap = clicks1 * afterpulse_fraction(lam, d1)
    non_ap = clicks1 - ap
    real1 = non_ap * photon1 / lam if lam > 0 else 0.0
    dark1 = non_ap - real1
    coinc = pair_rate * a1 * a2
    coinc_det = coinc * live
    flux2 = pair_rate * a2 / 1e9
    if d2.gated:
        per_gate = 1 - math.exp(-(flux2 + d2.dark) * d2.gate_width_ns)
        singles2 = clicks1 * per_gate + coinc_det
    else:
        singles2 = free_running_rate(pair_rate * a2 + d2.dark, d2)
    eta = b.efficiency1 * b.efficiency2
    brightness = coinc / (eta * linewidth_mhz * pump_mw) if eta > 0 else 0.0
    width_pm = bandwidth_convert_inverse(linewidth_mhz, wavelength_nm)
    brightness_pm = coinc / (eta * width_pm * pump_mw) if eta > 0 else 0.0
    tau_coh_s = coherence_times(linewidth_mhz)[1] * 1e-9
    return RatePrediction(pair_rate, clicks1, photon1 + d1.dark, singles2, flux2, coinc, coinc_det,
                          live, ap, real1, dark1, brightness, brightness_pm, pair_rate * tau_coh_s)


def infer_generated(singles1: float, dark1: float, b: LossBudget | None = None,
                    detector1: DetectorSpec | None = None) -> float:
    """Generated pair rate from the detector-1 click rate.

    Without ``detector1`` this is the plain (S - dark)/(eta1 survival1). With a
    detector the dead-time/after-pulse model is inverted first, so it is the
    exact inverse of ``predict_rates(...).singles1``.
    """
    b = b or LossBudget()
    if not singles1 > dark1:
        raise ModelError("singles rate does not exceed the dark rate: no signal to infer from")
    _, _, s1, _ = arm_losses(b)
    a1 = s1 * b.efficiency1
    if a1 <= 0:
        raise ModelError("zero detection probability in arm 1")
    if detector1 is None:
        return (singles1 - dark1) / a1
    ceiling = 1 / (detector1.dead_time_us * 1e-6) if detector1.dead_time_us > 0 else math.inf
    if singles1 >= ceiling:
        raise ModelError(f"singles rate {singles1:g}/s exceeds the dead-time ceiling {ceiling:g}/s")
    f = lambda lam: free_running_rate(lam, detector1) - singles1
    hi = max(singles1, dark1) * 2 + 1
    while f(hi) < 0:
        hi *= 4
    lam = brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-15, maxiter=500)
    if lam <= dark1:
        raise ModelError("dead-time corrected rate does not exceed the dark rate")
    return (lam - dark1) / a1


@dataclass(frozen=True)
class AccidentalBreakdown:
    detector_noise: float  # Hz/ns
    afterpulse: float
    independent_pairs: float
    total: float

    def as_dict(self) -> dict:
        return asdict(self)


def accidental_budget(rates: RatePrediction, detector2: DetectorSpec | None = None) -> AccidentalBreakdown:
    """Accidental coincidence density split by origin.

    Each detector-1 click (photon, dark, after-pulse) meets detector-2 events
    with density s2 (photons) + d2 (dark) per ns.
    """
    d2 = detector2 or default_detector2()
    d2_ns = d2.dark if d2.gated else d2.dark / 1e9
    s2 = rates.flux2_per_ns
    noise = rates.dark1 * s2 + rates.real1 * d2_ns + rates.dark1 * d2_ns
    ap = rates.afterpulse_rate * (s2 + d2_ns)
    indep = rates.real1 * s2
    return AccidentalBreakdown(noise, ap, indep, noise + ap + indep)


def inference_report(singles1: float, dark1: float, b: LossBudget | None = None,
                     detector1: DetectorSpec | None = None) -> dict:
    """Both readings of the generated-rate inference."""
    d1 = detector1 or default_detector1()
    return {
        "strict_chain": infer_generated(singles1, dark1, b),
        "dead_time_corrected": infer_generated(singles1, dark1, b, d1),
    }


def budget_table(b: LossBudget, rates: RatePrediction, acc: AccidentalBreakdown) -> str:
    db1, db2, s1, s2 = arm_losses(b)
    rows = [("stage", "arm 1 [dB]", "arm 2 [dB]")]
    labels = [lab for lab, _ in b.chain.arm1]
    for lab, _ in b.chain.arm2:
        if lab not in labels:
            labels.append(lab)
    get = lambda arm, lab: sum(v for k, v in arm if k == lab)
    for lab in labels:
        rows.append((lab, f"{get(b.chain.arm1, lab):.2f}", f"{get(b.chain.arm2, lab):.2f}"))
    rows.append(("total", f"{db1:.2f}", f"{db2:.2f}"))
    w = max(len(r[0]) for r in rows)
    out = [f"{r[0]:<{w}}  {r[1]:>10}  {r[2]:>10}" for r in rows]
    out.append("")
    items = [
        ("cavity escape probability", f"{b.escape_probability:.4f}"),
        ("end-to-end survival arm 1", f"{s1:.5f}"),
        ("end-to-end survival arm 2", f"{s2:.5f}"),
        ("generated pairs [1/s]", f"{rates.generated:.4g}"),
        ("singles detector 1 [1/s]", f"{rates.singles1:.1f}"),
        ("singles detector 2 (gated) [1/s]", f"{rates.singles2:.2f}"),
        ("coincidences [1/s]", f"{rates.coincidences:.3f}"),
        ("coincidences with dead time [1/s]", f"{rates.coincidences_detected:.3f}"),
        ("brightness [1/(s MHz mW)]", f"{rates.brightness:.2f}"),
        ("brightness [1/(s pm mW)]", f"{rates.brightness_per_pm:.4g}"),
        ("pairs per coherence time", f"{rates.mu:.4f}"),
        ("accidentals, detector noise [Hz/ns]", f"{acc.detector_noise:.3e}"),
        ("accidentals, after-pulses [Hz/ns]", f"{acc.afterpulse:.3e}"),
        ("accidentals, independent pairs [Hz/ns]", f"{acc.independent_pairs:.3e}"),
        ("accidentals, total [Hz/ns]", f"{acc.total:.3e}"),
    ]
    w = max(len(k) for k, _ in items)
    out += [f"{k:<{w}}  {v:>12}" for k, v in items]
    return "\n".join(out) + "\n"


def budget_json(b: LossBudget, rates: RatePrediction, acc: AccidentalBreakdown) -> str:
    db1, db2, s1, s2 = arm_losses(b)
    doc = {
        "arms": {"1": {"stages": [list(s) for s in b.chain.arm1], "total_db": db1, "survival": s1},
                 "2": {"stages": [list(s) for s in b.chain.arm2], "total_db": db2, "survival": s2}},
        "escape_probability": b.escape_probability,
        "rates": rates.as_dict(),
        "accidentals_hz_per_ns": acc.as_dict(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
