"""Byte-reproducible SVG figures."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dispersion import C_LIGHT  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "wgopo"
matplotlib.rcParams["svg.fonttype"] = "path"


def _save(fig, path: str | Path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_spectrum(spec, path, envelope=None) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    lam = C_LIGHT / spec.frequencies * 1e9
    ax.plot(lam, spec.weight, lw=0.6)
    if envelope is not None:
        ax.plot(lam, envelope, "k--", lw=0.8, label="phase-matching envelope")
        ax.legend(loc="upper right")
    for lo, hi in spec.cluster_wavelengths_nm:
        ax.axvspan(lo, hi, color="tab:orange", alpha=0.2)
    ax.set_xlabel("signal wavelength [nm]")
    ax.set_ylabel("emission weight")
    ax.set_title(f"cluster spectrum at {spec.temperature:.4f} °C")
    _save(fig, path)


def plot_gm(gm, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    lam = C_LIGHT / gm.signal.frequencies * 1e9
    ax.plot(lam, gm.detuning / 1e9, ".", ms=3)
    ax.axhspan(-gm.fwhm / 2e9, gm.fwhm / 2e9, color="tab:green", alpha=0.2)
    ax.set_xlabel("signal mode wavelength [nm]")
    ax.set_ylabel("pair detuning [GHz]")
    _save(fig, path)


def plot_tuning(result, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(result.scan_temperatures, result.scan_metric, lw=0.8)
    ax.axvline(result.temperature, color="k", ls=":")
    ax.set_xlabel("temperature [°C]")
    ax.set_ylabel("filtered emission [Hz]")
    _save(fig, path)


def plot_lock(trace, path) -> None:
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    a1.plot(trace.time, (trace.cavity_temperature - trace.lock_temperature) * 1e3, lw=0.5)
    a1.set_ylabel("ΔT [m°C]")
    a2.plot(trace.time, trace.counts, lw=0.3)
    a2.axhline(trace.setpoint, color="k", ls=":")
    a2.set_ylabel("counts/s")
    a2.set_xlabel("time [s]")
    _save(fig, path)


def plot_g2(h, fit, path) -> None:
    from .analysis import _g2_model

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.step(h.centers_ns, h.counts, where="mid", lw=0.7)
    if fit is not None:
        theta = np.array([np.log(fit.amplitude), np.log(max(fit.baseline, 1e-12)),
                          np.log(fit.decay_ns), fit.center_ns])
        ax.plot(h.centers_ns, _g2_model(theta, h.edges_ns), "r-", lw=1)
        ax.axhline(fit.baseline, color="r", ls=":")
    ax.set_xlabel("delay [ns]")
    ax.set_ylabel("coincidences per bin")
    _save(fig, path)


def plot_fringe(scan, fit, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.errorbar(scan.phases, scan.counts, yerr=scan.errors, fmt="o", ms=3)
    phi = np.linspace(scan.phases.min(), scan.phases.max(), 400)
    ax.plot(phi, fit.model(phi), "r-", lw=1)
    ax.set_xlabel("two-photon phase [rad]")
    ax.set_ylabel(f"coincidences in {scan.window_ns:g} ns")
    ax.set_title(f"V = {fit.visibility:.3f} ± {fit.visibility_err:.3f}")
    _save(fig, path)
