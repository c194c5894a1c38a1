"""Coincidence histograms, cross-correlation fits, Franson windows and fringe fits."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, signal

from .errors import FitError

DEFAULT_BIN_PS = 263.0
BELL_BOUND = 1 / math.sqrt(2)
FWHM_FACTOR = 1.39  # T_c * 2 pi dnu for the two-sided exponential


# ------------------------------------------------------------------ histograms


@dataclass(frozen=True)
class Histogram:
    bin_width_ps: float
    origin_ns: float  # left edge of bin 0
    counts: np.ndarray  # int64
    outside: int = 0  # delays that fell outside the range

    def __post_init__(self):
        if not self.bin_width_ps > 0:
            raise ValueError("bin width must be positive")
        c = np.asarray(self.counts, dtype=np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_width_ns(self) -> float:
        return self.bin_width_ps / 1e3

    @property
    def edges_ns(self) -> np.ndarray:
        return self.origin_ns + self.bin_width_ns * np.arange(self.counts.size + 1)

    @property
    def centers_ns(self) -> np.ndarray:
        return self.origin_ns + self.bin_width_ns * (np.arange(self.counts.size) + 0.5)

    def to_csv(self) -> str:
        lines = ["bin_center_ns,counts"]
        lines += [f"{c:.6f},{n}" for c, n in zip(self.centers_ns, self.counts)]
        return "\n".join(lines) + "\n"


def centered_range(span_ns: float, bin_width_ps: float = DEFAULT_BIN_PS) -> tuple[float, float]:
    """Largest symmetric range within +-span with one bin centred on zero."""
    w = bin_width_ps / 1e3
    half = math.floor(span_ns / w - 0.5)
    return -(half + 0.5) * w, (half + 0.5) * w


def histogram(delays_ns, bin_width_ps: float = DEFAULT_BIN_PS, range_ns=None) -> Histogram:
    """Half-open binning [edge_k, edge_k+1); out-of-range delays are counted in ``outside``."""
    if not bin_width_ps > 0:
        raise ValueError("bin width must be positive")
    d = np.asarray(delays_ns, dtype=float)
    lo, hi = centered_range(20.0, bin_width_ps) if range_ns is None else map(float, range_ns)
    w = bin_width_ps / 1e3
    n = int(round((hi - lo) / w))
    if n <= 0:
        raise ValueError("empty histogram range")
    idx = np.floor((d - lo) / w).astype(np.int64)
    ok = (idx >= 0) & (idx < n)
    counts = np.bincount(idx[ok], minlength=n)
    return Histogram(bin_width_ps, lo, counts, int(d.size - ok.sum()))


def rebin(h: Histogram, factor: int) -> Histogram:
    """Merge ``factor`` adjacent bins; a trailing partial group is padded with zeros."""
    if factor < 1:
        raise ValueError("rebin factor must be >= 1")
    pad = (-h.counts.size) % factor
    c = np.concatenate([h.counts, np.zeros(pad, np.int64)]).reshape(-1, factor).sum(axis=1)
    return Histogram(h.bin_width_ps * factor, h.origin_ns, c, h.outside)


def central_window(h: Histogram, width_ns: float, center_ns: float = 0.0) -> float:
    """Counts in [center - w/2, center + w/2], edge bins prorated by overlap."""
    if width_ns < 0:
        raise ValueError("window width must be >= 0")
    if width_ns == 0:
        return 0.0
    edges = h.edges_ns
    a, b = center_ns - width_ns / 2, center_ns + width_ns / 2
    overlap = np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0, None)
    return float(np.sum(h.counts * overlap / h.bin_width_ns))


def sideband_density(h: Histogram, inner_ns: float, outer_ns: float | None = None) -> tuple[float, float]:
    """Mean counts per ns (and its Poisson error) over bins with inner <= |t| <= outer."""
    edges = h.edges_ns
    outer = outer_ns if outer_ns is not None else max(abs(edges[0]), abs(edges[-1]))
    lo, hi = edges[:-1], edges[1:]
    sel = ((lo >= inner_ns) & (hi <= outer)) | ((hi <= -inner_ns) & (lo >= -outer))
    nbins = int(sel.sum())
    if nbins == 0:
        raise FitError("no histogram bins in the sideband region",
                       {"inner_ns": inner_ns, "outer_ns": outer})
    total = h.counts[sel].sum()
    span = nbins * h.bin_width_ns
    return total / span, math.sqrt(max(total, 1)) / span


def peak_fwhm(h: Histogram, baseline: float = 0.0) -> float:
    """Full width at half maximum (ns) of the tallest peak, by linear interpolation."""
    c = h.counts - baseline
    k = int(np.argmax(c))
    half = c[k] / 2
    x = h.centers_ns
    i = k
    while i > 0 and c[i] > half:
        i -= 1
    j = k
    while j < c.size - 1 and c[j] > half:
        j += 1
    left = np.interp(half, [c[i], c[i + 1]], [x[i], x[i + 1]])
    right = np.interp(half, [c[j], c[j - 1]], [x[j], x[j - 1]])
    return float(right - left)


# ------------------------------------------------------------- g2 fitting


@dataclass(frozen=True)
class G2Fit:
    linewidth_mhz: float
    linewidth_err: float
    amplitude: float  # counts per bin at the peak
    amplitude_err: float
    baseline: float  # counts per bin
    baseline_err: float
    center_ns: float
    center_err: float
    reduced_chi2: float
    converged: bool
    bin_width_ps: float

    @property
    def decay_ns(self) -> float:
        return 1e3 / (2 * math.pi * self.linewidth_mhz)

    def peak_area(self) -> float:
        """Counts in the exponential peak above baseline."""
        return self.amplitude * 2 * self.decay_ns / (self.bin_width_ps / 1e3)

    def baseline_density(self, duration_s: float) -> tuple[float, float]:
        """Baseline as a coincidence-rate density in Hz/ns."""
        scale = 1 / ((self.bin_width_ps / 1e3) * duration_s)
        return self.baseline * scale, self.baseline_err * scale

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _laplace_bin_average(edges, center, scale):
    """Average of exp(-|t - center| / scale) over each bin."""
    def cum(x):
        return np.where(x < 0, scale * np.exp(np.minimum(x, 0) / scale),
                        2 * scale - scale * np.exp(-np.maximum(x, 0) / scale))
    g = cum(edges - center)
    return (g[1:] - g[:-1]) / np.diff(edges)


def _g2_model(theta, edges):
    amp, base, scale, center = np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[2]), theta[3]
    return base + amp * _laplace_bin_average(edges, center, scale)


def _poisson_nll(theta, edges, y):
    mu = _g2_model(theta, edges)
    return float(np.sum(mu - y * np.log(mu)))


def _hessian(f, x, steps):
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / steps[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = steps[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4 * steps[i] * steps[j])
    return H


def _tail_level(counts, frac=0.2):
    k = max(1, int(counts.size * frac))
    return float(np.mean(np.concatenate([counts[:k], counts[-k:]])))


def fit_g2(h: Histogram, max_iterations: int = 500) -> G2Fit:
    """Poisson maximum-likelihood fit of A exp(-2 pi dnu |t - t0|) + B, integrated over bins."""
    y = h.counts.astype(float)
    if y.size < 20:
        raise FitError("histogram needs at least 20 bins", {"bins": int(y.size)})
    base = _tail_level(y)
    s3 = np.convolve(y, np.ones(3), mode="same")
    k = int(np.argmax(s3))
    peak3 = s3[k]
    base3 = 3 * base
    if not (peak3 > 3 * base3 and peak3 - base3 > 5 * math.sqrt(max(base3, 1.0))):
        raise FitError("no detectable peak", {"peak_3bin": float(peak3), "baseline_3bin": base3,
                                              "total": int(y.sum())})
    edges = h.edges_ns
    w = h.bin_width_ns
    x = h.centers_ns
    amp0 = max(y[k] - base, 1.0)
    excess = np.clip(y - base, 0, None)
    scale0 = float(np.clip(excess.sum() * w / (2 * amp0), w / 4, (edges[-1] - edges[0]) / 4))
    theta0 = np.array([math.log(amp0), math.log(max(base, 1e-3)), math.log(scale0), x[k]])
    bounds = [(None, None), (math.log(1e-9), None),
              (math.log(w / 50), math.log(edges[-1] - edges[0])), (edges[0], edges[-1])]
    res = optimize.minimize(_poisson_nll, theta0, args=(edges, y), method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": max_iterations, "ftol": 1e-13, "gtol": 1e-9})
    if not res.success and "ABNORMAL" not in str(res.message):
        raise FitError(f"g2 fit did not converge: {res.message}", {"iterations": int(res.nit)})
    # polish with Nelder-Mead for robustness against the |t| kink
    res2 = optimize.minimize(_poisson_nll, res.x, args=(edges, y), method="Nelder-Mead",
                             options={"maxiter": 4000, "xatol": 1e-9, "fatol": 1e-10})
    theta = res2.x if res2.fun <= res.fun else res.x
    nll = lambda t: _poisson_nll(t, edges, y)
    H = _hessian(nll, theta, np.array([1e-4, 1e-4, 1e-4, 1e-4 * w]))
    try:
        cov_t = np.linalg.inv(H)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular information matrix", {"theta": theta.tolist()}) from exc
    if np.any(np.diag(cov_t) < 0):
        raise FitError("information matrix not positive definite", {"theta": theta.tolist()})
    amp, basev, scale, center = np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[2]), theta[3]
    dnu = 1e3 / (2 * math.pi * scale)  # MHz for scale in ns
    jac = np.diag([amp, basev, -dnu, 1.0])
    cov = jac @ cov_t @ jac.T
    err = np.sqrt(np.diag(cov))
    mu = _g2_model(theta, edges)
    chi2 = float(np.sum((y - mu) ** 2 / mu) / max(y.size - 4, 1))
    vals = [float(v) for v in (dnu, err[2], amp, err[0], basev, err[1], center, err[3], chi2)]
    return G2Fit(*vals, True, float(h.bin_width_ps))


def coherence_times(linewidth_mhz: float) -> tuple[float, float]:
    """(cross-correlation FWHM T_c, coherence time tau_coh), both in ns."""
    if not linewidth_mhz > 0:
        raise ValueError("linewidth must be positive")
    two_pi_nu = 2 * math.pi * linewidth_mhz * 1e6
    return FWHM_FACTOR / two_pi_nu * 1e9, 2 / two_pi_nu * 1e9


# ---------------------------------------------------------------- peak finding


@dataclass(frozen=True)
class Peaks:
    centers_ns: np.ndarray
    areas: np.ndarray
    requested: int
    notice: str = ""

    @property
    def shortfall(self) -> int:
        return self.requested - self.centers_ns.size


def find_peaks(h: Histogram, count: int, min_separation_ns: float = 4.0,
               area_half_width_ns: float = 3.0) -> Peaks:
    """The ``count`` tallest significant maxima after 3-bin smoothing, sorted by position."""
    if count < 1:
        raise ValueError("count must be >= 1")
    y = h.counts.astype(float)
    x = h.centers_ns
    s3 = np.convolve(y, np.ones(3), mode="same")
    base = float(np.median(y))
    base3 = 3 * base
    height = base3 + 5 * math.sqrt(max(base3, 1.0))
    dist = max(1, int(round(min_separation_ns / h.bin_width_ns)))
    idx, props = signal.find_peaks(s3, height=height, distance=dist, prominence=0)
    # a real peak stands out from its surroundings by more than the Poisson noise at its top
    real = props["prominences"] >= 5 * np.sqrt(props["peak_heights"])
    idx, heights = idx[real], props["peak_heights"][real]
    order = np.argsort(heights)[::-1][:count]
    idx = np.sort(idx[order])
    centers, areas = [], []
    half = int(round(area_half_width_ns / h.bin_width_ns))
    for i in idx:
        lo, hi = max(0, i - 3), min(y.size, i + 4)
        wts = np.clip(y[lo:hi] - base, 0, None)
        centers.append(float(np.sum(wts * x[lo:hi]) / wts.sum()) if wts.sum() > 0 else float(x[i]))
        a, b = max(0, i - half), min(y.size, i + half + 1)
        areas.append(float(np.sum(y[a:b] - base)))
    notice = ""
    if len(idx) < count:
        notice = f"found {len(idx)} of {count} requested peaks"
    return Peaks(np.array(centers), np.array(areas), count, notice)


# --------------------------------------------------------------- fringes


@dataclass(frozen=True)
class FringeScan:
    phases: np.ndarray
    counts: np.ndarray  # central-window coincidences per point
    errors: np.ndarray
    accidentals: np.ndarray  # sideband estimate of accidentals in the window, per point
    integration_s: float
    window_ns: float


def fringe_scan(runner: Callable, phases: Sequence[float], integration_s: float,
                window_ns: float = 1.2, span_ns: float = 28.0, sideband_ns: float = 18.0,
                bin_width_ps: float = DEFAULT_BIN_PS) -> FringeScan:
    """Run ``runner(phase, integration_s, index)`` per phase and count the central window.

    The runner returns either delays (ns) or an object with ``delays(span_ns)``.
    """
    phases = np.asarray(list(phases), dtype=float)
    if phases.size == 0:
        raise ValueError("phase list is empty")
    rng = centered_range(span_ns, bin_width_ps)
    counts, acc = [], []
    for i, ph in enumerate(phases):
        out = runner(ph, integration_s, i)
        d = out.delays(span_ns) if hasattr(out, "delays") else np.asarray(out)
        h = histogram(d, bin_width_ps, rng)
        counts.append(central_window(h, window_ns))
        acc.append(sideband_density(h, sideband_ns)[0] * window_ns)
    counts = np.array(counts)
    return FringeScan(phases, counts, np.sqrt(np.maximum(counts, 1.0)), np.array(acc),
                      float(integration_s), float(window_ns))


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    visibility_err: float  # from the fit covariance (Poisson weights)
    visibility_err_scatter: float  # covariance rescaled by the residual scatter
    phase_offset: float
    mean: float
    mean_err: float
    clipped: bool = False

    def model(self, phases):
        return self.mean * (1 + self.visibility * np.cos(np.asarray(phases) + self.phase_offset))


def fit_visibility(phases, counts, errors=None) -> FringeFit:
    """Least squares of M (1 + V cos(phi + phi0)) via the linear form a + b cos + c sin."""
    phi = np.asarray(phases, dtype=float)
    y = np.asarray(counts, dtype=float)
    if phi.size < 5 or phi.size != y.size:
        raise FitError("need at least 5 phase points", {"points": int(phi.size)})
    if np.ptp(phi) < math.pi - 1e-12:
        raise FitError("phase points must span at least pi", {"span": float(np.ptp(phi))})
    sig = np.ones_like(y) if errors is None else np.asarray(errors, dtype=float)
    X = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    Xw = X / sig[:, None]
    yw = y / sig
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    try:
        cov = np.linalg.inv(Xw.T @ Xw)
    except np.linalg.LinAlgError as exc:
        raise FitError("degenerate phase sampling", {}) from exc
    a, b, c = coef
    if not a > 0:
        raise FitError("non-positive fringe mean", {"mean": float(a)})
    amp = math.hypot(b, c)
    vis = amp / a
    g = np.array([-vis / a, b / (amp * a) if amp else 0.0, c / (amp * a) if amp else 0.0])
    var_v = float(g @ cov @ g)
    dof = max(y.size - 3, 1)
    resid = yw - Xw @ coef
    chi2_red = float(resid @ resid) / dof
    if errors is None:
        # unit weights carry no scale; both errors come from the residuals
        err_cov = math.sqrt(var_v * chi2_red)
    else:
        err_cov = math.sqrt(var_v)
    err_scatter = math.sqrt(var_v * chi2_red)
    clipped = vis > 1
    return FringeFit(float(min(vis, 1.0)), float(err_cov), float(err_scatter), float(math.atan2(-c, b)),
                     float(a), float(math.sqrt(cov[0, 0] * (chi2_red if errors is None else 1.0))), bool(clipped))


@dataclass(frozen=True)
class CorrectedVisibility:
    value: float
    error: float
    unphysical: bool


def subtract_accidentals(v_raw: float, mean: float, accidental: float, v_err: float = 0.0,
                         mean_err: float = 0.0, accidental_err: float = 0.0) -> CorrectedVisibility:
    """V_net = V_raw C/(C - A), with first-order error propagation."""
    if not accidental < mean:
        raise FitError("accidental level must be below the fringe mean",
                       {"mean": mean, "accidental": accidental})
    net = mean - accidental
    value = v_raw if accidental == 0 else v_raw * mean / net
    d_v = mean / net
    d_c = -v_raw * accidental / net ** 2
    d_a = v_raw * mean / net ** 2
    err = math.sqrt((d_v * v_err) ** 2 + (d_c * mean_err) ** 2 + (d_a * accidental_err) ** 2)
    unphysical = value > 1
    if unphysical:
        warnings.warn(f"accidental-corrected visibility {value:.3f} exceeds 1", RuntimeWarning,
                      stacklevel=2)
    return CorrectedVisibility(value, err, unphysical)


@dataclass(frozen=True)
class BellVerdict:
    violates: bool
    significance: float  # sigma above the bound, 0 if not above


def bell_check(visibility: float, error: float = 0.0) -> BellVerdict:
    excess = visibility - BELL_BOUND
    if excess <= 0:
        return BellVerdict(False, 0.0)
    return BellVerdict(True, excess / error if error > 0 else math.inf)
