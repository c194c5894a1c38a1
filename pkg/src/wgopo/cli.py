"""Command-line front end.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime or fit failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, budget, events, montecarlo, reproduce, spdc
from .config import CONFIG_ENV, RunConfig
from .errors import ConfigError, DomainError, InfeasibleError, ModelError, WgopoError

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


def write_manifest(out: Path, command: str, cfg: RunConfig, **extra) -> None:
    doc = {"command": command, "version": __version__, "seed": int(cfg["seed"]),
           "config_sha256": cfg.sha256(), "config": cfg.data}
    doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n",
                                       encoding="utf-8")


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _temperature(ctx: reproduce.Context, given) -> float:
    if given is not None:
        return float(given)
    t = ctx.cfg["spectrum"]["temperature_c"]
    return float(t) if t is not None else ctx.double_resonance.temperature


def cmd_spectrum(args, cfg: RunConfig) -> int:
    from .plotting import plot_spectrum

    out = _out(args)
    ctx = reproduce.Context(cfg, out)
    band = tuple(args.band) if args.band else tuple(cfg["spectrum"]["band_nm"])
    t = _temperature(ctx, args.temperature)
    cs = spdc.cluster_spectrum(ctx.resonator, ctx.qpm, ctx.pump, t, band,
                               threshold=float(cfg["spectrum"]["threshold"]))
    cs.to_csv(out / "cluster_spectrum.csv")
    env = spdc.spdc_envelope(ctx.qpm, ctx.pump, cs.wavelengths_nm, t)
    plot_spectrum(cs, out / "cluster_spectrum.svg", envelope=env)
    clusters = [[round(a, 6), round(b, 6)] for a, b in cs.cluster_wavelengths_nm]
    for a, b in clusters:
        print(f"cluster {a:.4f} - {b:.4f} nm")
    write_manifest(out, "spectrum", cfg, temperature_c=t, band_nm=list(band), clusters_nm=clusters)
    return EXIT_OK


def cmd_clusters(args, cfg: RunConfig) -> int:
    from .plotting import plot_gm

    out = _out(args)
    ctx = reproduce.Context(cfg, out)
    band = tuple(args.band) if args.band else tuple(cfg["spectrum"]["band_nm"])
    t = _temperature(ctx, args.temperature)
    gm = spdc.gm_diagram(ctx.resonator, ctx.pump, t, band)
    gm.to_csv(out / "gm_diagram.csv")
    plot_gm(gm, out / "gm_diagram.svg")
    n = int(np.count_nonzero(gm.double_resonant))
    near = gm.detuning_near(ctx.pump.degeneracy_nm)
    print(f"temperature {t:.5f} degC: {n} doubly resonant mode pairs of {len(gm.signal)}")
    print(f"detuning nearest degeneracy: {near / 1e6:.2f} MHz (half width {gm.fwhm / 2e6:.2f} MHz)")
    write_manifest(out, "clusters", cfg, temperature_c=t, double_resonant_pairs=n,
                   detuning_near_degeneracy_mhz=near / 1e6)
    return EXIT_OK


def cmd_tune(args, cfg: RunConfig) -> int:
    from .plotting import plot_tuning

    out = _out(args)
    ctx = reproduce.Context(cfg, out)
    s = cfg["search"]
    start = float(args.start if args.start is not None else s["start_c"])
    span = float(args.range if args.range is not None else s["range_c"])
    dr = spdc.find_double_resonance(ctx.resonator, ctx.qpm, ctx.pump, start, span, ctx.filter,
                                    grid_step=float(s["grid_step_c"]))
    with open(out / "tuning_scan.csv", "w", encoding="utf-8") as fh:
        fh.write("temperature_c,filtered_emission_hz\n")
        for t, m in zip(dr.scan_temperatures, dr.scan_metric):
            fh.write(f"{t:.6f},{m:.6e}\n")
    plot_tuning(dr, out / "tuning_scan.svg")
    period = spdc.mode_hop_period(ctx.resonator)
    print(f"double resonance at {dr.temperature:.5f} degC (mode-hop period {period:.4f} degC)")
    write_manifest(out, "tune", cfg, temperature_c=dr.temperature, metric_hz=dr.metric,
                   mode_hop_period_c=period)
    return EXIT_OK


def cmd_lock(args, cfg: RunConfig) -> int:
    from .plotting import plot_lock

    out = _out(args)
    if args.duration is not None:
        cfg = RunConfig({**cfg.data, "lock": {**cfg["lock"], "duration_s": float(args.duration)}})
    ctx = reproduce.Context(cfg, out)
    trace = reproduce.run_lock(ctx)
    settle = min(float(cfg["lock"]["settle_s"]), float(trace.time[-1]) if trace.time.size else 0.0)
    with open(out / "lock_trace.csv", "w", encoding="utf-8") as fh:
        fh.write("time_s,cavity_temperature_c,heater_command_c,counts_per_s\n")
        for row in zip(trace.time, trace.cavity_temperature, trace.heater_command, trace.counts):
            fh.write("{:.3f},{:.7f},{:.7f},{:.1f}\n".format(*row))
    plot_lock(trace, out / "lock_trace.svg")
    exc = trace.max_excursion(settle)
    ratio = trace.mean_rate(settle) / trace.peak_rate
    print(f"lock point {trace.lock_temperature:.5f} degC; max |dT| after {settle:g} s: {exc:.2e} degC; "
          f"throughput {ratio:.4f} of peak")
    write_manifest(out, "lock", cfg, max_excursion_c=exc, throughput_fraction=ratio)
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out(args)
    duration = float(args.duration if args.duration is not None else cfg["simulation"]["duration_s"])
    if duration < 0:
        raise ConfigError("duration must be >= 0")
    ext = ".csv" if args.format == "csv" else ".bin"
    sim = cfg.sim_config(duration_s=duration)
    if sim.franson is None:
        res = montecarlo.simulate(sim)
        events.write_events(out / f"channel1{ext}", res.channel1)
        events.write_events(out / f"channel2{ext}", res.channel2)
        counts = {"channel1": len(res.channel1), "channel2": len(res.channel2)}
        print(f"channel 1: {counts['channel1']} events, channel 2: {counts['channel2']} events "
              f"in {duration:g} s")
        write_manifest(out, "simulate", cfg, duration_s=duration, counts=counts)
        return EXIT_OK
    points = int(cfg["analysis"]["fringe_points"])
    phases = np.linspace(0, 2 * np.pi, points, endpoint=False)
    run = montecarlo.fringe_runner(sim)
    files = {}
    for k, ph in enumerate(phases):
        res = run(ph, duration, k)
        name = f"phase_{k:02d}{ext}"
        events.write_events(out / name, res.channel1, res.channel2)
        files[name] = float(ph)
    (out / "phases.json").write_text(json.dumps(files, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {points} interferometer phase points of {duration:g} s each")
    write_manifest(out, "simulate", cfg, duration_s=duration, phases=files)
    return EXIT_OK


def _load_pair(paths: list[str]):
    chans: dict[int, events.EventStream] = {}
    for p in paths:
        for ch, st in events.read_events(p).items():
            chans[ch] = st if ch not in chans else montecarlo.merge([chans[ch], st], ch)
    if 1 not in chans or 2 not in chans:
        raise ConfigError(f"need events on channels 1 and 2, found {sorted(chans)}")
    return chans[1], chans[2]


def _duration_hint(start, stop) -> float:
    ts = [s.timestamps for s in (start, stop) if len(s)]
    if not ts:
        return 0.0
    return (max(t[-1] for t in ts) - min(t[0] for t in ts)) / 1e12


def cmd_analyze(args, cfg: RunConfig) -> int:
    from .plotting import plot_fringe, plot_g2

    out = _out(args)
    an = cfg["analysis"]
    bin_ps = float(an["bin_ps"])
    if args.mode == "g2":
        ch1, ch2 = _load_pair(args.files)
        span = float(an["span_ns"])
        h = analysis.histogram(montecarlo.tdc_coincidences(ch1, ch2, span), bin_ps,
                               analysis.centered_range(span, bin_ps))
        fit = analysis.fit_g2(h)
        duration = float(args.duration) if args.duration else _duration_hint(ch1, ch2)
        tc, tcoh = analysis.coherence_times(fit.linewidth_mhz)
        report = {"mode": "g2", "fit": fit.as_dict(), "T_c_ns": tc, "tau_coh_ns": tcoh,
                  "coincidences_in_peak": fit.peak_area(), "duration_s": duration}
        if duration > 0:
            b, be = fit.baseline_density(duration)
            report["baseline_hz_per_ns"] = b
            report["baseline_err_hz_per_ns"] = be
        (out / "g2_histogram.csv").write_text(h.to_csv(), encoding="utf-8")
        plot_g2(h, fit, out / "g2_fit.svg")
        print(f"linewidth {fit.linewidth_mhz:.1f} ± {fit.linewidth_err:.1f} MHz; T_c {tc:.3f} ns; "
              f"tau_coh {tcoh:.3f} ns")
    else:
        span = float(an["franson_span_ns"])
        files, phases = [], []
        for p in args.files:
            p = Path(p)
            table_path = p.parent / "phases.json"
            if not table_path.exists():
                raise ConfigError(f"{p}: no phases.json next to the event file")
            table = json.loads(table_path.read_text(encoding="utf-8"))
            if p.name not in table:
                raise ConfigError(f"{p}: not listed in {table_path}")
            files.append(p)
            phases.append(float(table[p.name]))
        order = np.argsort(phases)
        cache = {}

        def runner(phase, _integration, index):
            f = files[order[index]]
            ch1, ch2 = _load_pair([str(f)])
            cache[index] = _duration_hint(ch1, ch2)
            return montecarlo.tdc_coincidences(ch1, ch2, span)

        scan = analysis.fringe_scan(runner, np.asarray(phases)[order], 0.0, float(an["window_ns"]), span,
                                    float(an["sideband_ns"]), bin_ps)
        fit = analysis.fit_visibility(scan.phases, scan.counts, scan.errors)
        acc = float(np.mean(scan.accidentals))
        corr = analysis.subtract_accidentals(fit.visibility, fit.mean, acc, fit.visibility_err, fit.mean_err,
                                             float(np.sqrt(acc / len(files))))
        bell = analysis.bell_check(fit.visibility, fit.visibility_err)
        report = {"mode": "franson", "visibility": fit.visibility, "visibility_err": fit.visibility_err,
                  "visibility_err_scatter": fit.visibility_err_scatter, "phase_offset": fit.phase_offset,
                  "mean_counts": fit.mean, "accidentals_in_window": acc,
                  "visibility_corrected": corr.value, "visibility_corrected_err": corr.error,
                  "bell_violation": bell.violates, "bell_significance_sigma": bell.significance,
                  "points": len(files)}
        plot_fringe(scan, fit, out / "fringe_fit.svg")
        verdict = "violates" if bell.violates else "does not violate"
        print(f"raw visibility {fit.visibility:.3f} ± {fit.visibility_err:.3f} "
              f"(scatter {fit.visibility_err_scatter:.3f}); corrected {corr.value:.3f} ± {corr.error:.3f}; "
              f"{verdict} the 1/sqrt(2) bound ({bell.significance:.1f} sigma)")
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n",
                                     encoding="utf-8")
    write_manifest(out, "analyze", cfg, mode=args.mode, inputs=[str(f) for f in args.files])
    return EXIT_OK


def cmd_budget(args, cfg: RunConfig) -> int:
    out = _out(args)
    b = cfg.loss_budget()
    sim = cfg.sim_config(franson=False)
    pred = budget.predict_rates(sim.pair_rate, b, detector1=sim.detector1, detector2=sim.detector2,
                                linewidth_mhz=sim.linewidth_mhz, pump_mw=float(cfg["pump"]["power_mw"]))
    acc = budget.accidental_budget(pred, sim.detector2)
    table = budget.budget_table(b, pred, acc)
    inf = budget.inference_report(3400.0, sim.detector1.dark, b, sim.detector1)
    table += (f"\ngeneration rate inferred from 3400 counts/s: {inf['strict_chain']:.4g} /s (strict chain), "
              f"{inf['dead_time_corrected']:.4g} /s (dead time inverted)\n")
    print(table, end="")
    (out / "budget.txt").write_text(table, encoding="utf-8")
    (out / "budget.json").write_text(budget.budget_json(b, pred, acc), encoding="utf-8")
    write_manifest(out, "budget", cfg)
    return EXIT_OK


def cmd_reproduce(args, cfg: RunConfig) -> int:
    out = _out(args)
    rows = reproduce.run_all(cfg, out, quick=args.quick)
    for r in rows:
        print(r.line())
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} rows pass")
    return EXIT_OK if not failed else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML config file (default: ${CONFIG_ENV} if set)")
    common.add_argument("--seed", type=int, help="master RNG seed")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. --set simulation.pair_rate=1e7")
    common.add_argument("--out", default="wgopo_out", help="output directory")
    common.add_argument("--duration", type=float, help="simulated duration in s")

    p = argparse.ArgumentParser(prog="wgopo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wgopo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    band = argparse.ArgumentParser(add_help=False)
    band.add_argument("--band", type=float, nargs=2, metavar=("LO_NM", "HI_NM"))
    band.add_argument("--temperature", type=float, help="crystal temperature in degC "
                      "(default: located double resonance)")

    s = sub.add_parser("spectrum", parents=[common, band], help="cluster emission spectrum")
    s.set_defaults(func=cmd_spectrum)
    s = sub.add_parser("clusters", parents=[common, band], help="Giordmaine-Miller mode pairing")
    s.set_defaults(func=cmd_clusters)
    s = sub.add_parser("tune", parents=[common], help="locate the double-resonance temperature")
    s.add_argument("--start", type=float)
    s.add_argument("--range", type=float)
    s.set_defaults(func=cmd_tune)
    s = sub.add_parser("lock", parents=[common], help="simulate the side-of-fringe temperature lock")
    s.set_defaults(func=cmd_lock)
    s = sub.add_parser("simulate", parents=[common], help="Monte-Carlo detector event streams")
    s.add_argument("--format", choices=("bin", "csv"), default="bin")
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("analyze", parents=[common], help="fit event files")
    s.add_argument("files", nargs="+")
    s.add_argument("--mode", choices=("g2", "franson"), default="g2")
    s.set_defaults(func=cmd_analyze)
    s = sub.add_parser("budget", parents=[common], help="closed-form loss and rate budget")
    s.set_defaults(func=cmd_budget)
    s = sub.add_parser("reproduce-paper", parents=[common], help="run every headline check")
    s.add_argument("--quick", action="store_true", help="reduced statistics for a fast smoke run")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.overrides, args.seed)
        return args.func(args, cfg)
    except (ConfigError, DomainError, ModelError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except WgopoError as exc:
        diag = getattr(exc, "diagnostics", None)
        print(f"failed: {exc}" + (f" {diag}" if diag else ""), file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level guard for the exit-code contract
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
