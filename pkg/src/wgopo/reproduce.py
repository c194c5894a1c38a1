"""End-to-end reproduction harness: one function per headline result, each returning rows."""
from __future__ import annotations

import hashlib
import json
import math
import tempfile
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import __version__, analysis, budget, cavity, dispersion, lock, montecarlo, spdc
from .config import RunConfig
from .events import write_binary


@dataclass(frozen=True)
class Row:
    criterion: int
    name: str
    reference: str
    computed: float
    target: str
    passed: bool

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion:>2}  {self.name}: computed {self.computed:.6g} ; reference {self.reference} ; target {self.target}"


def _rel(criterion, name, reference_text, value, target, rel_tol):
    ok = abs(value - target) <= rel_tol * abs(target)
    return Row(criterion, name, reference_text, float(value), f"{target:g} ± {rel_tol * 100:g}%", bool(ok))


def _abs(criterion, name, reference_text, value, target, tol):
    ok = abs(value - target) <= tol
    return Row(criterion, name, reference_text, float(value), f"{target:g} ± {tol:g}", bool(ok))


def _bound(criterion, name, reference_text, value, limit, above: bool):
    ok = value > limit if above else value < limit
    return Row(criterion, name, reference_text, float(value), f"{'>' if above else '<'} {limit:g}", bool(ok))


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    quick: bool = False

    def __post_init__(self):
        self.resonator = self.cfg.resonator()
        self.pump = self.cfg.pump()
        self.qpm = self.cfg.qpm()
        self.filter = self.cfg.signal_filter()
        self.seed = int(self.cfg["seed"])
        self._dr = None

    @property
    def double_resonance(self) -> spdc.DoubleResonance:
        if self._dr is None:
            s = self.cfg["search"]
            self._dr = spdc.find_double_resonance(self.resonator, self.qpm, self.pump, float(s["start_c"]),
                                                  float(s["range_c"]), self.filter,
                                                  grid_step=float(s["grid_step_c"]))
        return self._dr


# ------------------------------------------------------------------ criteria


def numeric_finesse(res: cavity.ResonatorSpec, wavelength_nm=1560.0, temperature_c=None):
    """(FSR, FWHM) in Hz measured on the Airy curve around the mode nearest ``wavelength_nm``."""
    t = res.index_model.reference_temperature_c if temperature_c is None else temperature_c
    comb = cavity.mode_comb(res, t, (wavelength_nm - 0.05, wavelength_nm + 0.05))
    nu0 = comb.frequencies[0]
    f_an = cavity.fsr(res, wavelength_nm, t)
    nxt = cavity.mode_comb(res, t, (dispersion.C_LIGHT / (nu0 + 1.5 * f_an) * 1e9,
                                    dispersion.C_LIGHT / (nu0 + 0.5 * f_an) * 1e9)).frequencies[0]
    peak = minimize_scalar(lambda x: -cavity.airy(res, nu0 + x, t), bounds=(-1e6, 1e6),
                           method="bounded", options={"xatol": 1.0}).x + nu0
    half_hi = brentq(lambda x: cavity.airy(res, peak + x, t) - 0.5, 0, f_an / 2, xtol=1.0)
    half_lo = brentq(lambda x: cavity.airy(res, peak - x, t) - 0.5, 0, f_an / 2, xtol=1.0)
    return nxt - nu0, half_hi + half_lo


def criterion_1(ctx: Context):
    res = ctx.resonator
    f = cavity.finesse(res)
    fsr_num, fwhm_num = numeric_finesse(res)
    return [
        _abs(1, "finesse (R=0.85, calibrated loss)", "15.4", f, 15.4, 0.1),
        _rel(1, "numeric FSR/FWHM vs analytic finesse", "15.4", fsr_num / fwhm_num, f, 0.005),
        _rel(1, "propagation loss [dB/cm] (model reading)", "0.06", res.loss_db_per_cm, 0.06, 0.30),
    ]


def criterion_2(ctx: Context):
    p = cavity.escape_probability_from(0.9515, 0.85)
    return [_abs(2, "escape probability t=0.9515, R=0.85", "0.43", p, 0.43, 0.005)]


def restore_offset(ctx: Context) -> tuple[float, float, float]:
    """(temperature offset restoring the central cluster, weight at +0.07 degC, weight at DR)."""
    r, q, p = ctx.resonator, ctx.qpm, ctx.pump
    t_dr = ctx.double_resonance.temperature
    w0 = spdc.central_cluster_weight(r, q, p, t_dr)
    period = spdc.mode_hop_period(r)
    offs = np.arange(0.3 * period, 0.75 * period, 0.002)
    w = np.array([spdc.central_cluster_weight(r, q, p, t_dr + o) for o in offs])
    k = int(np.argmax(w))
    fine = minimize_scalar(lambda o: -spdc.central_cluster_weight(r, q, p, t_dr + o),
                           bounds=(offs[max(k - 1, 0)], offs[min(k + 1, offs.size - 1)]),
                           method="bounded", options={"xatol": 1e-5})
    w07 = spdc.central_cluster_weight(r, q, p, t_dr + 0.07)
    return float(fine.x), w07, w0


def criterion_3(ctx: Context):
    res = ctx.resonator
    t_ref = res.index_model.reference_temperature_c
    offset, w07, w0 = restore_offset(ctx)
    return [
        _rel(3, "FSR at 1560 nm [GHz]", "1.8", cavity.fsr(res) / 1e9, 1.8, 0.005),
        _rel(3, "resonance tuning [pm/degC]", "44.5", dispersion.tuning_rate(res.index_model, 1560.0, t_ref),
             44.5, 0.02),
        _rel(3, "mode-hop period [degC]", "0.3", spdc.mode_hop_period(res), 0.3, 0.10),
        _rel(3, "central-cluster restore offset [degC]", "0.15", offset, 0.15, 0.15),
        _bound(3, "central-cluster weight at +0.07 degC / at resonance", "lost", w07 / w0, 0.5, above=False),
    ]


def criterion_4(ctx: Context):
    tc, tcoh = analysis.coherence_times(117.0)
    return [
        _abs(4, "T_c at 117 MHz [ns]", "1.9", tc, 1.891, 5e-4),
        _abs(4, "tau_coh at 117 MHz [ns]", "2.7", tcoh, 2.721, 5e-4),
    ]


def g2_coverage(base: montecarlo.SimConfig, seeds, truth=117.0, bin_ps=263.0, span_ns=20.0):
    """Fraction of seeds whose fitted linewidth lies within 3 standard errors of ``truth``."""
    hits, values = 0, []
    rng = analysis.centered_range(span_ns, bin_ps)
    for s in seeds:
        r = montecarlo.simulate(replace(base, seed=int(s)))
        h = analysis.histogram(r.delays(span_ns), bin_ps, rng)
        try:
            fit = analysis.fit_g2(h)
        except Exception:  # a failed fit counts as a miss
            continue
        values.append(fit.linewidth_mhz)
        hits += abs(fit.linewidth_mhz - truth) <= 3 * fit.linewidth_err
    return hits / len(seeds), (float(np.mean(values)) if values else math.nan)


def criterion_5(ctx: Context):
    n = 20 if ctx.quick else 100
    base = ctx.cfg.sim_config(duration_s=100.0, franson=False)
    seeds = [ctx.seed * 1000 + k for k in range(n)]
    frac1, _ = g2_coverage(base, seeds)
    frac10, _ = g2_coverage(replace(base, pair_rate=10 * base.pair_rate), seeds)
    return [
        _bound(5, "g2 fit within 3 s.e. of 117 MHz, nominal rate [fraction]", "117±7 MHz", frac1, 0.95 - 1e-12, True),
        _bound(5, "g2 fit within 3 s.e. of 117 MHz, 10x rate [fraction]", "117±7 MHz", frac10, 0.95 - 1e-12, True),
    ]


def criterion_6(ctx: Context):
    cfg = ctx.cfg
    b = cfg.loss_budget()
    sim = cfg.sim_config(franson=False)
    db1, db2, _, s2 = budget.arm_losses(b)
    pred = budget.predict_rates(sim.pair_rate, b, detector1=sim.detector1, detector2=sim.detector2,
                                linewidth_mhz=sim.linewidth_mhz, pump_mw=ctx.pump.power_mw)
    inf = budget.inference_report(3400.0, sim.detector1.dark, b, sim.detector1)
    return [
        _abs(6, "arm 1 loss [dB]", "10.8", db1, 10.8, 1e-12),
        _abs(6, "arm 2 loss [dB]", "11.8", db2, 11.8, 1e-12),
        _rel(6, "arm 2 end-to-end survival", "2%", s2, 0.02, 0.05),
        _rel(6, "coincidences [1/s]", "5.2", pred.coincidences, 5.2, 0.15),
        _rel(6, "singles detector 1 [1/s]", "3400", pred.singles1, 3400.0, 0.10),
        _rel(6, "pairs per coherence time", "0.02", pred.mu, 0.02, 0.25),
        _rel(6, "brightness [1/(s MHz mW)]", "17", pred.brightness, 17.0, 0.10),
        _rel(6, "inferred generation rate, strict chain [1/s]", "6.6e6", inf["strict_chain"], 6.6e6, 0.25),
        _rel(6, "inferred generation rate, dead-time corrected [1/s]", "6.6e6", inf["dead_time_corrected"],
             6.6e6, 0.25),
    ]


def criterion_7(ctx: Context):
    cfg = ctx.cfg
    sim = cfg.sim_config(franson=False, duration_s=200.0 if ctx.quick else 1000.0)
    b = cfg.loss_budget()
    pred = budget.predict_rates(sim.pair_rate, b, detector1=sim.detector1, detector2=sim.detector2)
    acc = budget.accidental_budget(pred, sim.detector2)
    run = montecarlo.simulate(sim)
    an = cfg["analysis"]
    span = float(an["span_ns"])
    rng = analysis.centered_range(span, float(an["bin_ps"]))
    h = analysis.histogram(run.delays(span), float(an["bin_ps"]), rng)
    fit = analysis.fit_g2(h)
    base, base_err = fit.baseline_density(sim.duration_s)
    net = fit.peak_area() / sim.duration_s
    analysis_plot = ctx.out / "g2_histogram.svg"
    from .plotting import plot_g2
    plot_g2(h, fit, analysis_plot)
    (ctx.out / "g2_histogram.csv").write_text(h.to_csv())
    return [
        _bound(7, "detector-noise accidentals / 4.7e-2 Hz/ns, factor", "4.7e-2", max(acc.detector_noise / 4.7e-2,
               4.7e-2 / acc.detector_noise), 1.5, above=False),
        _bound(7, "independent-pair accidentals / 3.4e-2 Hz/ns, factor", "3.4e-2", max(acc.independent_pairs / 3.4e-2,
               3.4e-2 / acc.independent_pairs), 1.3, above=False),
        _bound(7, "simulated baseline vs closed-form total [sigma]", "baseline agreement",
               abs(base - acc.total) / base_err, 2.0, above=False),
        _rel(7, "simulated net coincidences [1/s]", "5.2", net, 5.2, 0.15),
    ]


def criterion_8(ctx: Context):
    cfg = ctx.cfg
    an = cfg["analysis"]
    bin_ps = float(an["bin_ps"])
    span = float(an["franson_span_ns"])
    rng = analysis.centered_range(span, bin_ps)
    long_run = 400.0 if ctx.quick else 2000.0
    sim = cfg.sim_config(franson=True, duration_s=long_run)
    delay = sim.franson.delay_ns

    h = analysis.histogram(montecarlo.simulate(sim).delays(span), bin_ps, rng)
    peaks = analysis.find_peaks(h, 3)
    expected = np.array([-delay, 0.0, delay])
    if peaks.centers_ns.size == 3:
        worst = float(np.max(np.abs(peaks.centers_ns - expected)))
    else:
        worst = math.inf
    rows = [_bound(8, "Franson peak positions, worst offset from 0, +-10 ns [ns]", "~10 ns",
                   worst, bin_ps / 1e3 + 1e-12, above=False)]

    zero = replace(sim, franson=replace(sim.franson, visibility=0.0), seed=sim.seed + 1)
    hz = analysis.histogram(montecarlo.simulate(zero).delays(span), bin_ps, rng)
    dens, _ = analysis.sideband_density(hz, float(an["sideband_ns"]))
    w = 6.0
    areas = [analysis.central_window(hz, w, c) - dens * w for c in expected]
    left, centre, right = areas
    sigma = math.sqrt(sum(analysis.central_window(hz, w, c) for c in expected) + 3 * (dens * w))
    rows.append(_bound(8, "V=0 path balance |centre - (left+right)| [sigma]", "2:1:1",
                       abs(centre - left - right) / sigma, 3.0, above=False))

    points = 12 if ctx.quick else int(an["fringe_points"])
    integ = 300.0 if ctx.quick else float(an["fringe_integration_s"])
    phases = np.linspace(0, 2 * np.pi, points, endpoint=False)
    runner = montecarlo.fringe_runner(replace(sim, seed=sim.seed + 2))
    scan = analysis.fringe_scan(runner, phases, integ, float(an["window_ns"]), span, float(an["sideband_ns"]),
                                bin_ps)
    fit = analysis.fit_visibility(scan.phases, scan.counts, scan.errors)
    acc = float(np.mean(scan.accidentals))
    acc_err = math.sqrt(acc / points)
    corr = analysis.subtract_accidentals(fit.visibility, fit.mean, acc, fit.visibility_err, fit.mean_err, acc_err)
    bell = analysis.bell_check(fit.visibility, fit.visibility_err)
    from .plotting import plot_fringe
    plot_fringe(scan, fit, ctx.out / "franson_fringe.svg")
    rows += [
        _abs(8, "raw fringe visibility", "0.812±0.055", fit.visibility, 0.81, 0.06),
        _bound(8, "accidental-subtracted visibility", "0.944±0.058", corr.value, 0.88, above=True),
        _bound(8, "Bell bound margin V_raw - 1/sqrt2", "violated", fit.visibility - analysis.BELL_BOUND
               if bell.violates else -1.0, 0.0, above=True),
    ]
    return rows


def lock_peak_rate(cfg: RunConfig) -> float:
    """Fringe-top count rate: detector-1 photon rate without the side-of-fringe penalty."""
    peak = cfg["lock"]["peak_rate"]
    if peak is not None:
        return float(peak)
    sim = cfg.sim_config(franson=False)
    return sim.pair_rate * sim.arm_detection_probability(1) / lock.SETPOINT_FRACTION


def run_lock(ctx: Context) -> lock.LockTrace:
    lk = ctx.cfg["lock"]
    fringe = lock.model_fringe(ctx.resonator, ctx.qpm, ctx.pump, ctx.double_resonance.temperature,
                               lock_peak_rate(ctx.cfg), ctx.filter)
    return lock.simulate_lock(fringe, duration=float(lk["duration_s"]), dt=float(lk["dt_s"]),
                              drift_c_per_min=float(lk["drift_c_per_min"]),
                              time_constant=float(lk["time_constant_s"]),
                              gains=(float(lk["kp"]), float(lk["ki"]), float(lk["kd"])), seed=ctx.seed)


def criterion_9(ctx: Context):
    trace = run_lock(ctx)
    settle = float(ctx.cfg["lock"]["settle_s"])
    from .plotting import plot_lock
    plot_lock(trace, ctx.out / "lock_trace.svg")
    return [
        _bound(9, "locked |dT| after settling [degC]", "< 1e-3", trace.max_excursion(settle), 1e-3, above=False),
        _rel(9, "locked throughput / peak", "0.575", trace.mean_rate(settle) / trace.peak_rate,
             lock.SETPOINT_FRACTION, 0.02),
    ]


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def criterion_10(ctx: Context):
    """Repeat a short simulation and a spectrum export; both must be byte-identical."""
    sim = ctx.cfg.sim_config(franson=False, duration_s=10.0)
    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            r = montecarlo.simulate(sim)
            p = Path(tmp) / f"events{k}.bin"
            write_binary(p, r.channel1, r.channel2)
            cs = spdc.cluster_spectrum(ctx.resonator, ctx.qpm, ctx.pump, ctx.double_resonance.temperature,
                                       (1555.0, 1565.0))
            q = Path(tmp) / f"spectrum{k}.csv"
            cs.to_csv(q)
            digests.append(_file_digest(p) + _file_digest(q))
    same = digests[0] == digests[1]
    return [Row(10, "repeated run byte-identical", "deterministic", float(same), "1", same)]


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10]


def spectrum_outputs(ctx: Context) -> None:
    from .plotting import plot_spectrum
    t = ctx.double_resonance.temperature
    band = tuple(ctx.cfg["spectrum"]["band_nm"])
    cs = spdc.cluster_spectrum(ctx.resonator, ctx.qpm, ctx.pump, t, band,
                               threshold=float(ctx.cfg["spectrum"]["threshold"]))
    cs.to_csv(ctx.out / "cluster_spectrum.csv")
    env = spdc.spdc_envelope(ctx.qpm, ctx.pump, cs.wavelengths_nm, t)
    plot_spectrum(cs, ctx.out / "cluster_spectrum.svg", envelope=env)


def run_all(cfg: RunConfig, out_dir: str | Path, quick: bool = False, criteria=None) -> list[Row]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, out, quick)
    rows: list[Row] = []
    for fn in criteria or CRITERIA:
        rows.extend(fn(ctx))
    spectrum_outputs(ctx)
    write_summary(rows, out, cfg, quick)
    return rows


def write_summary(rows, out: Path, cfg: RunConfig, quick: bool) -> None:
    lines = [r.line() for r in rows]
    n_pass = sum(r.passed for r in rows)
    lines.append(f"{n_pass}/{len(rows)} rows pass")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    doc = {"rows": [asdict(r) for r in rows], "seed": int(cfg["seed"]), "quick": quick}
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest = {"command": "reproduce-paper", "config_sha256": cfg.sha256(), "seed": int(cfg["seed"]),
                "version": __version__, "config": cfg.data, "quick": quick}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
