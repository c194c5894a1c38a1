"""Event-level simulation of the pair source, loss chain, interferometer and detectors.

Timestamps are integer picoseconds. Two routes produce the same statistics:

* the explicit pipeline ``generate_pairs -> franson_transform -> apply_chain
  -> detect`` materializes every generated pair and is meant for small runs;
* ``simulate`` splits the pair process into independent Poisson components
  (both photons detectable, only one detectable) and never draws photons that
  cannot be detected, which makes full-scale rates cheap.

Randomness is drawn from Philox generators keyed by (seed, stream index), so
time slabs are independent and runs are bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .errors import ConfigError
from .events import TAG_AFTERPULSE, TAG_DARK, TAG_PHOTON, EventStream

PS_PER_S = 10**12
PS_PER_NS = 1000
_NEVER = np.iinfo(np.int64).max

# stream keys for seed derivation
_KEY_PAIRS = 0
_KEY_DETECTOR = 1 << 20


def rng_for(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), key])))


# --------------------------------------------------------------------------- types


NOMINAL_ARM1_STAGES = (("silicon filter", 0.4), ("fibre coupling", 5.2),
                     ("filter arm", 2.8), ("lock penalty", 2.4))
NOMINAL_ARM2_STAGES = (("silicon filter", 0.4), ("fibre coupling", 5.2),
                     ("filter arm", 3.8), ("lock penalty", 2.4))
NOMINAL_ESCAPE_DB = 5.2


@dataclass(frozen=True)
class OpticalChain:
    arm1: tuple[tuple[str, float], ...] = NOMINAL_ARM1_STAGES
    arm2: tuple[tuple[str, float], ...] = NOMINAL_ARM2_STAGES

    def __post_init__(self):
        for arm in (self.arm1, self.arm2):
            for label, db in arm:
                if not (math.isfinite(db) and db >= 0):
                    raise ConfigError(f"stage {label!r}: loss must be a finite value >= 0 dB")
        object.__setattr__(self, "arm1", tuple((str(a), float(b)) for a, b in self.arm1))
        object.__setattr__(self, "arm2", tuple((str(a), float(b)) for a, b in self.arm2))

    def stages(self, arm: int):
        return self.arm1 if arm == 1 else self.arm2

    def total_db(self, arm: int) -> float:
        return float(math.fsum(db for _, db in self.stages(arm)))

    def transmission(self, arm: int) -> float:
        return 10 ** (-self.total_db(arm) / 10)

    @classmethod
    def lossless(cls) -> OpticalChain:
        return cls((), ())


@dataclass(frozen=True)
class DetectorSpec:
    """Single-photon detector.

    ``dark`` is counts/s for a free-running detector and a probability per ns
    of open gate for a gated one. Gates open on each trigger event and are
    centred at ``gate_offset_ns`` after it.
    """

    mode: str = "free-running"
    efficiency: float = 0.021
    dark: float = 600.0
    dead_time_us: float = 30.0
    afterpulse_probability: float = 0.0
    afterpulse_decay_us: float = 10.0
    gate_width_ns: float = 60.0
    gate_offset_ns: float = 0.0
    jitter_ps: float = 0.0

    def __post_init__(self):
        if self.mode not in ("free-running", "gated"):
            raise ConfigError(f"unknown detector mode {self.mode!r}")
        for name in ("efficiency", "afterpulse_probability"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"detector {name} must lie in [0, 1]")
        if self.dark < 0 or self.dead_time_us < 0 or self.afterpulse_decay_us <= 0 or self.jitter_ps < 0:
            raise ConfigError("detector dark level, dead time, jitter must be >= 0 and decay > 0")
        if self.gated:
            if self.gate_width_ns <= 0:
                raise ConfigError("gate width must be positive")
            if self.dark * self.gate_width_ns > 1:
                raise ConfigError("dark probability per gate exceeds 1")
            if self.afterpulse_probability > 0:
                raise ConfigError("after-pulsing is only modelled for free-running detectors")

    @property
    def gated(self) -> bool:
        return self.mode == "gated"

    @property
    def dead_time_ps(self) -> int:
        return int(round(self.dead_time_us * 1e6))


def default_detector1(afterpulse_probability: float = 0.015) -> DetectorSpec:
    return DetectorSpec("free-running", 0.021, 600.0, 30.0, afterpulse_probability, 10.0)


def default_detector2(gate_width_ns: float = 60.0) -> DetectorSpec:
    return DetectorSpec("gated", 0.078, 8.0e-6, 10.0, 0.0, 10.0, gate_width_ns)


@dataclass(frozen=True)
class FransonConfig:
    delay_ns: float = 10.0
    visibility: float = 0.93
    phase: float = 0.0
    split: float = 0.5

    def __post_init__(self):
        if self.delay_ns <= 0:
            raise ConfigError("interferometer delay must be positive")
        if not 0 <= self.visibility <= 1 or not 0 < self.split < 1:
            raise ConfigError("visibility must lie in [0, 1] and split in (0, 1)")

    def validate(self, photon_coherence_ns: float, pump_coherence_ns: float) -> None:
        """Require delay >> photon coherence and << pump coherence (factor 3 each way)."""
        if self.delay_ns < 3 * photon_coherence_ns:
            raise ConfigError(f"delay {self.delay_ns} ns is not long against the photon "
                              f"coherence time {photon_coherence_ns:.3g} ns; single-photon "
                              "interference would not be negligible")
        if self.delay_ns > pump_coherence_ns / 3:
            raise ConfigError(f"delay {self.delay_ns} ns is not short against the pump "
                              f"coherence time {pump_coherence_ns:.3g} ns")

    def class_table(self):
        """Rows (probability, shift_signal_ps, shift_idler_ps, P(in,in), P(in,.), P(.,in)).

        Classes are SS, LL, SL, LS. Port outcomes of equal-path pairs are
        correlated through the two-photon phase; mixed-path pairs choose ports
        independently.
        """
        d = int(round(self.delay_ns * PS_PER_NS))
        s = self.split
        cos = self.visibility * math.cos(self.phase)
        pin_eq = s * s * (1 + cos)
        rows = []
        for cls, (ls, li) in enumerate(((0, 0), (1, 1), (0, 1), (1, 0)), start=1):
            if ls == li:
                both = pin_eq
            else:
                both = s * s
            rows.append((cls, 0.25, ls * d, li * d, min(both, s), s, s))
        return rows


@dataclass(frozen=True)
class SimConfig:
    pair_rate: float = 6.6e6
    linewidth_mhz: float = 117.0
    duration_s: float = 100.0
    seed: int = 0
    chain: OpticalChain = field(default_factory=OpticalChain)
    escape_probability: float = 10 ** (-NOMINAL_ESCAPE_DB / 10)
    detector1: DetectorSpec = field(default_factory=default_detector1)
    detector2: DetectorSpec = field(default_factory=default_detector2)
    franson: FransonConfig | None = None
    slab_s: float = 10.0

    def __post_init__(self):
        if not (self.pair_rate >= 0 and self.duration_s >= 0):
            raise ConfigError("pair rate and duration must be >= 0")
        if not self.linewidth_mhz > 0:
            raise ConfigError("linewidth must be positive")
        if not 0 <= self.escape_probability <= 1:
            raise ConfigError("escape probability must lie in [0, 1]")
        if self.slab_s <= 0:
            raise ConfigError("slab length must be positive")
        if self.detector1.gated:
            raise ConfigError("detector 1 provides the trigger and must be free-running")

    @property
    def delay_scale_ps(self) -> float:
        """Laplace scale of the signal-idler delay, 1/(2 pi dnu), in ps."""
        return PS_PER_S / (2 * math.pi * self.linewidth_mhz * 1e6)

    def arm_detection_probability(self, arm: int) -> float:
        det = self.detector1 if arm == 1 else self.detector2
        return self.escape_probability * self.chain.transmission(arm) * det.efficiency

    def slabs(self):
        """(index, start_ps, length_ps) covering [0, duration)."""
        total = int(round(self.duration_s * PS_PER_S))
        step = int(round(self.slab_s * PS_PER_S))
        return [(k, start, min(step, total - start)) for k, start in enumerate(range(0, total, step))]


@dataclass(frozen=True)
class PairBatch:
    """Pairs with per-photon arrival times and survival flags."""

    signal: np.ndarray  # int64 ps
    idler: np.ndarray
    keep_signal: np.ndarray  # bool
    keep_idler: np.ndarray
    path_class: np.ndarray  # int8: 0 no interferometer, 1 SS, 2 LL, 3 SL, 4 LS

    def __len__(self):
        return self.signal.size

    @classmethod
    def from_times(cls, signal, idler) -> PairBatch:
        n = len(signal)
        return cls(np.asarray(signal, np.int64), np.asarray(idler, np.int64),
                   np.ones(n, bool), np.ones(n, bool), np.zeros(n, np.int8))

    def delays_ns(self) -> np.ndarray:
        return (self.idler - self.signal) / PS_PER_NS

    def arm(self, k: int) -> np.ndarray:
        """Sorted arrival times of surviving photons in arm ``k``."""
        t, keep = (self.signal, self.keep_signal) if k == 1 else (self.idler, self.keep_idler)
        return np.sort(t[keep])


# ---------------------------------------------------------------------- pair source


def _laplace_ps(rng, scale_ps, n):
    return np.rint(rng.laplace(0.0, scale_ps, n)).astype(np.int64)


def generate_pairs(cfg: SimConfig) -> PairBatch:
    """Poisson pair births over [0, duration) with Laplace signal-idler delays."""
    sig, idl = [], []
    for k, start, length in cfg.slabs():
        rng = rng_for(cfg.seed, _KEY_PAIRS + k)
        n = rng.poisson(cfg.pair_rate * length / PS_PER_S)
        birth = np.sort(rng.integers(start, start + length, n, dtype=np.int64))
        sig.append(birth)
        idl.append(birth + _laplace_ps(rng, cfg.delay_scale_ps, n))
    if not sig:
        return PairBatch.from_times(np.empty(0, np.int64), np.empty(0, np.int64))
    return PairBatch.from_times(np.concatenate(sig), np.concatenate(idl))


def apply_chain(pairs: PairBatch, chain: OpticalChain, escape_probability: float, seed: int,
                efficiencies: tuple[float, float] = (1.0, 1.0)) -> PairBatch:
    """Independent Bernoulli thinning of each photon.

    Survival in arm k is p_out * 10^(-dB_k/10), times an optional detector
    efficiency so the thinning can be folded into one draw.
    """
    rng = rng_for(seed, 1 << 21)
    n = len(pairs)
    p1 = escape_probability * chain.transmission(1) * efficiencies[0]
    p2 = escape_probability * chain.transmission(2) * efficiencies[1]
    if not (0 <= p1 <= 1 and 0 <= p2 <= 1):
        raise ConfigError("survival probability outside [0, 1]")
    return replace(pairs,
                   keep_signal=pairs.keep_signal & (rng.random(n) < p1),
                   keep_idler=pairs.keep_idler & (rng.random(n) < p2))


def franson_transform(pairs: PairBatch, fc: FransonConfig, seed: int) -> PairBatch:
    """Route each photon through the short or long arm and choose its output port.

    Photons leaving by the undetected port are dropped. Equal-path pairs
    exit the detected port together with probability split^2 (1 + V cos phi);
    the single-photon port probability stays at ``split``.
    """
    rng = rng_for(seed, 1 << 22)
    n = len(pairs)
    d = int(round(fc.delay_ns * PS_PER_NS))
    long_s = rng.random(n) < 0.5
    long_i = rng.random(n) < 0.5
    s = fc.split
    p_both_eq = s * s * (1 + fc.visibility * math.cos(fc.phase))
    equal = long_s == long_i
    # joint port draw: (in,in), (in,out), (out,in), (out,out)
    u = rng.random(n)
    p_both = np.where(equal, p_both_eq, s * s)
    p_in_out = s - p_both
    in_s = u < s
    in_i = (u < p_both) | ((u >= s) & (u < s + p_in_out))
    cls = np.select([equal & ~long_s, equal & long_s, ~long_s & long_i], [1, 2, 3], 4).astype(np.int8)
    return PairBatch(pairs.signal + d * long_s, pairs.idler + d * long_i,
                     pairs.keep_signal & in_s, pairs.keep_idler & in_i, cls)


# ------------------------------------------------------------------------ detectors


@numba.njit(cache=True)
def _free_running_kernel(times, tags, dead, p_ap, u, ap_delay, out_t, out_tag):
    n = times.size
    i = 0
    k = 0
    m = 0
    dead_end = -(2**62)
    pending = _NEVER
    while True:
        nxt = times[i] if i < n else _NEVER
        if nxt < dead_end:
            i += 1
            continue
        if pending <= nxt:
            if pending == _NEVER:
                break
            ev = pending
            tag = TAG_AFTERPULSE
            pending = _NEVER
        else:
            ev = nxt
            tag = tags[i]
            i += 1
            pending = _NEVER
        if m == out_t.size or k == u.size:
            return m, k, False
        out_t[m] = ev
        out_tag[m] = tag
        m += 1
        dead_end = ev + dead
        if u[k] < p_ap:
            pending = dead_end + ap_delay[k]
        k += 1
    return m, k, True


@numba.njit(cache=True)
def _gated_kernel(triggers, photons, half_lo, half_hi, dead, bg_rate, dark_rate, expo, u, out_t, out_tag):
    j = 0
    m = 0
    n = photons.size
    prev_end = -(2**62)
    dead_end = -(2**62)
    total = bg_rate + dark_rate
    for g in range(triggers.size):
        gs = triggers[g] + half_lo
        ge = triggers[g] + half_hi
        if gs < prev_end:
            gs = prev_end
        if gs < dead_end:
            gs = dead_end
        prev_end = ge
        if gs >= ge:
            continue
        while j < n and photons[j] < gs:
            j += 1
        tp = photons[j] if (j < n and photons[j] < ge) else _NEVER
        tb = _NEVER
        tag_b = TAG_PHOTON
        if total > 0:
            dt = expo[g] / total
            if dt < ge - gs:
                tb = gs + np.int64(dt)
                tag_b = TAG_DARK if u[g] * total < dark_rate else TAG_PHOTON
        if tp == _NEVER and tb == _NEVER:
            continue
        if tp <= tb:
            out_t[m] = tp
            out_tag[m] = TAG_PHOTON
        else:
            out_t[m] = tb
            out_tag[m] = tag_b
        dead_end = out_t[m] + dead
        m += 1
    return m


def _jitter(times, spec: DetectorSpec, rng):
    if spec.jitter_ps > 0 and times.size:
        times = np.sort(times + np.rint(rng.normal(0, spec.jitter_ps, times.size)).astype(np.int64))
    return times


def _run_free(photons, spec: DetectorSpec, rng, span_ps, apply_efficiency=True) -> EventStream:
    photons = np.asarray(photons, np.int64)
    if apply_efficiency and spec.efficiency < 1:
        photons = photons[rng.random(photons.size) < spec.efficiency]
    photons = _jitter(photons, spec, rng)
    t0, t1 = span_ps
    n_dark = rng.poisson(spec.dark * max(t1 - t0, 0) / PS_PER_S)
    dark = rng.integers(t0, max(t1, t0 + 1), n_dark, dtype=np.int64)
    times = np.concatenate([photons, dark])
    tags = np.concatenate([np.full(photons.size, TAG_PHOTON, np.uint8), np.full(n_dark, TAG_DARK, np.uint8)])
    order = np.argsort(times, kind="stable")
    times, tags = times[order], tags[order]
    # drop exact coincidences so the output is strictly increasing
    if times.size > 1:
        keep = np.concatenate([[True], np.diff(times) > 0])
        times, tags = times[keep], tags[keep]
    tau_ap = spec.afterpulse_decay_us * 1e6
    size = times.size + 16
    while True:
        u = rng.random(size)
        ap = np.rint(rng.exponential(tau_ap, size)).astype(np.int64) + 1
        out_t = np.empty(size, np.int64)
        out_tag = np.empty(size, np.uint8)
        m, _, done = _free_running_kernel(times, tags, max(spec.dead_time_ps, 1),
                                          spec.afterpulse_probability, u, ap, out_t, out_tag)
        if done:
            break
        size *= 2
    keep = out_t[:m] < t1 if t1 > t0 else np.ones(m, bool)
    return EventStream(0, out_t[:m][keep], out_tag[:m][keep])


def _run_gated(photons, spec: DetectorSpec, trigger: EventStream, rng, background_per_ns=0.0,
               apply_efficiency=True) -> EventStream:
    photons = np.asarray(photons, np.int64)
    if apply_efficiency and spec.efficiency < 1:
        photons = photons[rng.random(photons.size) < spec.efficiency]
    photons = _jitter(photons, spec, rng)
    trig = trigger.timestamps
    half = spec.gate_width_ns * PS_PER_NS / 2
    off = spec.gate_offset_ns * PS_PER_NS
    expo = rng.exponential(1.0, trig.size)
    u = rng.random(trig.size)
    out_t = np.empty(trig.size, np.int64)
    out_tag = np.empty(trig.size, np.uint8)
    m = _gated_kernel(trig, photons, int(round(off - half)), int(round(off + half)),
                      max(spec.dead_time_ps, 1), background_per_ns / PS_PER_NS,
                      spec.dark / PS_PER_NS, expo, u, out_t, out_tag)
    return EventStream(1, out_t[:m], out_tag[:m])


def detect(photons, spec: DetectorSpec, trigger: EventStream | None = None, seed: int = 0,
           span_ps: tuple[int, int] | None = None, *, channel: int | None = None,
           background_per_ns: float = 0.0, apply_efficiency: bool = True) -> EventStream:
    """Turn photon arrival times (ps, sorted) into detector clicks.

    Free-running: efficiency thinning, Poisson dark counts over ``span_ps``,
    non-paralyzable dead time, after-pulses at dead time + Exp(decay). A new
    detection cancels a pending after-pulse.

    Gated: each trigger event opens a gate; at most one click per gate (the
    earliest photon or dark/background arrival), and gates falling in the dead
    time are shortened or skipped. ``background_per_ns`` adds an independent
    Poisson photon flux that is sampled only inside gates.
    """
    rng = rng_for(seed, _KEY_DETECTOR + (1 if spec.gated else 0))
    photons = np.asarray(photons, np.int64)
    if spec.gated:
        if trigger is None:
            raise ConfigError("a gated detector needs a trigger stream")
        out = _run_gated(photons, spec, trigger, rng, background_per_ns, apply_efficiency)
    else:
        if span_ps is None:
            span_ps = (0, int(photons.max()) + 1 if photons.size else 0)
        out = _run_free(photons, spec, rng, span_ps, apply_efficiency)
    ch = channel if channel is not None else (2 if spec.gated else 1)
    return EventStream(ch, out.timestamps, out.tags)


def tdc_coincidences(start: EventStream | np.ndarray, stop: EventStream | np.ndarray,
                     span_ns: float) -> np.ndarray:
    """All stop-minus-start delays within +-span (ns), multi-stop."""
    a = start.timestamps if isinstance(start, EventStream) else np.asarray(start, np.int64)
    b = stop.timestamps if isinstance(stop, EventStream) else np.asarray(stop, np.int64)
    span = int(round(span_ns * PS_PER_NS))
    lo = np.searchsorted(b, a - span, side="left")
    hi = np.searchsorted(b, a + span, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    starts = np.repeat(a, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    idx = np.repeat(lo, counts) + offsets
    return (b[idx] - starts) / PS_PER_NS


# ------------------------------------------------------------------------- drivers


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    channel1: EventStream
    channel2: EventStream
    true_pairs: int  # pairs with both photons reaching their detectors' inputs

    @property
    def duration_s(self) -> float:
        return self.config.duration_s

    def delays(self, span_ns: float = 20.0) -> np.ndarray:
        return tdc_coincidences(self.channel1, self.channel2, span_ns)

    def rates(self) -> dict[str, float]:
        d = self.duration_s or 1.0
        return {"singles1": len(self.channel1) / d, "singles2": len(self.channel2) / d}


def _components(cfg: SimConfig):
    """Split the pair process into detectable-photon classes.

    Returns (joint rows, rate of arm-1-only photons, rate of arm-2-only photons);
    joint rows are (class, rate, shift_signal_ps, shift_idler_ps).
    """
    a1 = cfg.arm_detection_probability(1)
    a2 = cfg.arm_detection_probability(2)
    if cfg.franson is None:
        rows = [(0, 1.0, 0, 0, 1.0, 1.0, 1.0)]
    else:
        rows = cfg.franson.class_table()
    joint, only1, only2 = [], 0.0, 0.0
    for cls, w, sh_s, sh_i, p11, p1, p2 in rows:
        both = a1 * a2 * p11
        joint.append((cls, cfg.pair_rate * w * both, sh_s, sh_i))
        only1 += cfg.pair_rate * w * (a1 * p1 - both)
        only2 += cfg.pair_rate * w * (a2 * p2 - both)
    return joint, only1, only2


def simulate(cfg: SimConfig) -> SimResult:
    """Fast full-scale simulation (see module docstring)."""
    joint, only1, only2 = _components(cfg)
    rates = np.array([r for _, r, _, _ in joint])
    total_joint = rates.sum()
    t1_parts, t2_parts = [], []
    n_true = 0
    for k, start, length in cfg.slabs():
        rng = rng_for(cfg.seed, _KEY_PAIRS + k)
        sec = length / PS_PER_S
        n = rng.poisson(total_joint * sec)
        n_true += n
        birth = rng.integers(start, start + length, n, dtype=np.int64)
        cls = rng.choice(len(joint), n, p=rates / total_joint) if total_joint > 0 else np.zeros(0, int)
        sh_s = np.array([s for _, _, s, _ in joint], np.int64)[cls]
        sh_i = np.array([s for _, _, _, s in joint], np.int64)[cls]
        delay = _laplace_ps(rng, cfg.delay_scale_ps, n)
        t1_parts.append(birth + sh_s)
        t2_parts.append(birth + delay + sh_i)
        m1 = rng.poisson(only1 * sec)
        t1_parts.append(rng.integers(start, start + length, m1, dtype=np.int64))
        if not cfg.detector2.gated:
            m2 = rng.poisson(only2 * sec)
            t2_parts.append(rng.integers(start, start + length, m2, dtype=np.int64))
    cat = lambda parts: np.sort(np.concatenate(parts)) if parts else np.empty(0, np.int64)
    ph1, ph2 = cat(t1_parts), cat(t2_parts)
    span = (0, int(round(cfg.duration_s * PS_PER_S)))
    d1 = cfg.detector1
    ch1 = detect(ph1, d1, seed=cfg.seed, span_ps=span, apply_efficiency=False)
    if cfg.detector2.gated:
        ch2 = detect(ph2, cfg.detector2, trigger=ch1, seed=cfg.seed,
                     background_per_ns=only2 / 1e9, apply_efficiency=False)
    else:
        ch2 = detect(ph2, cfg.detector2, seed=cfg.seed, span_ps=span, apply_efficiency=False)
    return SimResult(cfg, ch1, ch2, int(n_true))


def simulate_explicit(cfg: SimConfig) -> SimResult:
    """Materialize every pair; same statistics as ``simulate`` at a higher cost."""
    pairs = generate_pairs(cfg)
    if cfg.franson is not None:
        pairs = franson_transform(pairs, cfg.franson, cfg.seed)
    pairs = apply_chain(pairs, cfg.chain, cfg.escape_probability, cfg.seed)
    span = (0, int(round(cfg.duration_s * PS_PER_S)))
    ch1 = detect(pairs.arm(1), cfg.detector1, seed=cfg.seed, span_ps=span)
    if cfg.detector2.gated:
        ch2 = detect(pairs.arm(2), cfg.detector2, trigger=ch1, seed=cfg.seed)
    else:
        ch2 = detect(pairs.arm(2), cfg.detector2, seed=cfg.seed, span_ps=span)
    both = int(np.count_nonzero(pairs.keep_signal & pairs.keep_idler))
    return SimResult(cfg, ch1, ch2, both)


def fringe_runner(base: SimConfig):
    """Return ``run(phase, integration_s, seed_offset)`` producing a Franson SimResult."""
    if base.franson is None:
        raise ConfigError("fringe runner needs a Franson configuration")

    def run(phase: float, integration_s: float, index: int = 0) -> SimResult:
        cfg = replace(base, franson=replace(base.franson, phase=float(phase)),
                      duration_s=float(integration_s), seed=base.seed * 1009 + index)
        return simulate(cfg)

    return run


def merge(streams: Sequence[EventStream], channel: int) -> EventStream:
    t = np.concatenate([s.timestamps for s in streams])
    g = np.concatenate([s.tags for s in streams])
    o = np.argsort(t, kind="stable")
    return EventStream(channel, t[o], g[o])
