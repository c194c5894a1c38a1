"""Side-of-fringe PID temperature lock on the free-running detector count rate."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import interp1d
from scipy.optimize import brentq

from .spdc import FilterSpec, filter_metric

LOCK_PENALTY_DB = 2.4
SETPOINT_FRACTION = 10 ** (-LOCK_PENALTY_DB / 10)


@dataclass(frozen=True)
class LockState:
    """PID controller state. Gains act on the error normalized to the setpoint.

    ``heater`` is the absolute heater command in degC; ``sign`` selects the
    fringe side (+1 when the rate rises with temperature at the lock point).
    """

    setpoint: float
    kp: float
    ki: float
    kd: float
    heater: float
    base_temperature: float
    integrator: float = 0.0
    last_error: float | None = None
    integrator_limit: float = 50.0
    stability_bound: float = 1e-3
    sign: int = 1


def lock_step(state: LockState, measured: float, dt: float) -> tuple[LockState, float]:
    """One PID update. Returns the new state and the heater command offset (degC)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not math.isfinite(measured):
        return state, state.heater - state.base_temperature
    error = (state.setpoint - measured) / state.setpoint
    integ = state.integrator + error * dt
    integ = min(max(integ, -state.integrator_limit), state.integrator_limit)
    deriv = 0.0 if state.last_error is None else (error - state.last_error) / dt
    offset = state.sign * (state.kp * error + state.ki * integ + state.kd * deriv)
    new = replace(state, integrator=integ, last_error=error,
                  heater=state.base_temperature + offset)
    return new, offset


@dataclass(frozen=True)
class Fringe:
    """Count rate versus cavity temperature around one double resonance."""

    temperatures: np.ndarray
    relative: np.ndarray
    peak_rate: float
    peak_temperature: float

    def __post_init__(self):
        object.__setattr__(self, "_interp", interp1d(
            self.temperatures, self.relative, kind="cubic", bounds_error=False, fill_value=0.0))

    def rate(self, temperature):
        return self.peak_rate * np.clip(self._interp(temperature), 0.0, None)

    def lock_point(self, fraction: float = SETPOINT_FRACTION, side: int = -1) -> float:
        """Temperature where the rate equals ``fraction`` of peak on the chosen side."""
        if side < 0:
            lo, hi = self.temperatures[0], self.peak_temperature
        else:
            lo, hi = self.peak_temperature, self.temperatures[-1]
        return brentq(lambda t: float(self._interp(t)) - fraction, lo, hi, xtol=1e-9)


def model_fringe(resonator, qpm, pump, peak_temperature: float, peak_rate: float,
                 filt: FilterSpec | None = None, half_range: float = 0.04, points: int = 321) -> Fringe:
    temps = np.linspace(peak_temperature - half_range, peak_temperature + half_range, points)
    m = filter_metric(resonator, qpm, pump, temps, filt)
    peak = float(filter_metric(resonator, qpm, pump, peak_temperature, filt))
    return Fringe(temps, m / peak, peak_rate, peak_temperature)


def lorentzian_fringe(peak_temperature: float, peak_rate: float, width_c: float = 0.0213,
                      half_range: float = 0.06, points: int = 601) -> Fringe:
    temps = np.linspace(peak_temperature - half_range, peak_temperature + half_range, points)
    x = 2 * (temps - peak_temperature) / width_c
    return Fringe(temps, 1 / (1 + x * x), peak_rate, peak_temperature)


@dataclass(frozen=True)
class LockTrace:
    time: np.ndarray
    cavity_temperature: np.ndarray
    heater_command: np.ndarray
    counts: np.ndarray  # measured rate per step, counts/s
    lock_temperature: float
    setpoint: float
    peak_rate: float

    def settled(self, after: float):
        return self.time >= after

    def max_excursion(self, after: float) -> float:
        sel = self.settled(after)
        return float(np.max(np.abs(self.cavity_temperature[sel] - self.lock_temperature)))

    def mean_rate(self, after: float) -> float:
        return float(np.mean(self.counts[self.settled(after)]))


DEFAULT_GAINS = (0.02, 0.02, 0.0)


def simulate_lock(
    fringe: Fringe,
    *,
    duration: float = 900.0,
    dt: float = 0.1,
    drift_c_per_min: float = 0.01,
    time_constant: float = 5.0,
    gains: tuple[float, float, float] = DEFAULT_GAINS,
    fraction: float = SETPOINT_FRACTION,
    side: int = -1,
    initial_offset: float = 0.0,
    seed: int = 0,
) -> LockTrace:
    """Closed-loop hold against a linear thermal drift.

    Plant: first-order heater lag plus additive drift; the measurement is a
    Poisson count over each step.
    """
    rng = np.random.default_rng(seed)
    t_lock = fringe.lock_point(fraction, side)
    setpoint = fraction * fringe.peak_rate
    kp, ki, kd = gains
    state = LockState(setpoint, kp, ki, kd, heater=t_lock, base_temperature=t_lock,
                      sign=1 if side < 0 else -1)
    n = int(round(duration / dt))
    decay = math.exp(-dt / time_constant)
    heater_out = t_lock + initial_offset
    drift = drift_c_per_min / 60.0
    times = np.arange(n) * dt
    cav = np.empty(n)
    cmd = np.empty(n)
    counts = np.empty(n)
    for k in range(n):
        temp = heater_out + drift * times[k]
        rate = float(fringe.rate(temp))
        measured = rng.poisson(rate * dt) / dt
        state, _ = lock_step(state, measured, dt)
        heater_out = state.heater + (heater_out - state.heater) * decay
        cav[k], cmd[k], counts[k] = temp, state.heater, measured
    return LockTrace(times, cav, cmd, counts, t_lock, setpoint, fringe.peak_rate)
