"""Feedback loops holding the twin-field interferometer.

A fast loop (100 kHz) locks the reference-band interference at
mid-fringe through a phase modulator; the residual signal-band drift,
already suppressed by the band ratio, is removed by a slow loop (1 kHz)
driving a fiber stretcher.  Laser frequency drift is pre-compensated
feed-forward, and a 1 Hz timing loop keeps the two users' pulses on a
common arrival grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .optics import NoiseModel, velocity_step_coeffs

TWO_PI = 2.0 * math.pi

#: Drift-rate statistics use non-overlapping windows of this length.
RATE_WINDOW_S = 1e-3

STAGES = ("none", "fastOnly", "full")


@dataclass(frozen=True)
class LoopConfig:
    """Timing and gains of the stabilization loops.

    ``dc_target_counts_hz`` is the mid-fringe set-point rate on the
    reference detector (half the fringe maximum).  Gains are (kp, ki,
    kd) triples.  The phase modulator wraps modulo ``pm_range_rad``;
    the fiber stretcher resets toward center by whole fringes when
    exceeding ``fs_range_rad``, blanking 1 ms of data.
    """

    fast_interval_us: float = 10.0
    fast_rate_hz: float = 1e5
    slow_rate_hz: float = 1e3
    dc_target_counts_hz: float = 6e6
    fast_gains: tuple[float, float, float] = (0.8, 0.05, 0.0)
    slow_gains: tuple[float, float, float] = (0.8, 0.3, 0.0)
    pm_range_rad: float = TWO_PI
    fs_range_rad: float = 60.0
    d0_reference_rate_hz: float = 1e5

    def __post_init__(self) -> None:
        if self.fast_interval_us <= 0 or self.fast_rate_hz <= 0 or self.slow_rate_hz <= 0:
            raise ValueError("loop intervals must be positive")
        for g in (*self.fast_gains, *self.slow_gains):
            if not math.isfinite(g):
                raise ValueError("gains must be finite")
        if self.pm_range_rad <= 0 or self.fs_range_rad <= 0:
            raise ValueError("actuator ranges must be positive")

    @property
    def fast_dt_s(self) -> float:
        return self.fast_interval_us * 1e-6

    @property
    def dc_setpoint_counts(self) -> float:
        """Mid-fringe mean counts per fast-loop bin."""
        return self.dc_target_counts_hz * self.fast_dt_s

    @property
    def d0_setpoint_counts(self) -> float:
        """Mid-fringe mean reference counts per slow-loop bin."""
        return self.d0_reference_rate_hz / self.slow_rate_hz


@dataclass
class PIDState:
    """Mutable controller state: actuator value plus PID memory.

    ``unwrapped`` accumulates the correction without actuator wrapping
    (the quantity used for frequency readout); ``output`` is the
    physical actuator value after range handling.
    """

    output: float = 0.0
    unwrapped: float = 0.0
    integral: float = 0.0
    last_error: float = 0.0
    saturated: bool = False


def _pid_update(error: float, gains: tuple[float, float, float],
                state: PIDState) -> float:
    kp, ki, kd = gains
    state.integral += error
    derivative = error - state.last_error
    state.last_error = error
    return -(kp * error + ki * state.integral + kd * derivative)


def _fringe_error(counts: float, setpoint: float) -> float:
    """Invert the mid-fringe count model to a phase-error estimate."""
    if setpoint <= 0:
        raise ValueError("set point must be positive")
    return math.asin(max(-1.0, min(1.0, counts / setpoint - 1.0)))


def fast_loop_step(dc_counts_in_bin: float, loop: LoopConfig,
                   state: PIDState) -> float:
    """One fast-loop iteration; returns the new phase-modulator value.

    The bin count is compared to the mid-fringe set point, converted to
    a phase error, and fed to the PI(D) controller.  The physical
    output wraps modulo the actuator range; the unwrapped value keeps
    accumulating for frequency readout.
    """
    if dc_counts_in_bin < 0:
        raise ValueError("bin counts must be nonnegative")
    err = _fringe_error(dc_counts_in_bin, loop.dc_setpoint_counts)
    state.unwrapped += _pid_update(err, loop.fast_gains, state)
    state.output = math.remainder(state.unwrapped, loop.pm_range_rad)
    return state.output


def slow_loop_step(d0_reference_rate_hz: float, loop: LoopConfig,
                   state: PIDState) -> float:
    """One slow-loop iteration; returns the new fiber-stretcher value.

    Takes the reference-slot detection rate, extracts the mid-fringe
    phase error, and integrates it onto the stretcher.  When the
    stretcher leaves its range it is rewound toward center by a whole
    number of fringes (phase-invariant) and flagged saturated so the
    caller can blank the affected interval.
    """
    if d0_reference_rate_hz < 0:
        raise ValueError("reference rate must be nonnegative")
    counts = d0_reference_rate_hz / loop.slow_rate_hz
    err = _fringe_error(counts, loop.d0_setpoint_counts)
    state.unwrapped += _pid_update(err, loop.slow_gains, state)
    state.saturated = abs(state.unwrapped) > loop.fs_range_rad
    if state.saturated:
        state.unwrapped -= TWO_PI * round(state.unwrapped / TWO_PI)
    state.output = state.unwrapped
    return state.output


def frequency_readout(pm_history_rad: np.ndarray, window_s: float) -> float:
    """Frequency offset (Hz) from the phase-modulator correction ramp.

    Linear-regression slope of the unwrapped correction history,
    assumed uniformly sampled over ``window_s``, divided by 2*pi.
    """
    pm = np.asarray(pm_history_rad, dtype=float)
    if pm.size < 2:
        raise ValueError("need at least two correction samples")
    if window_s <= 0:
        raise ValueError("window must be positive")
    t = np.linspace(0.0, window_s, pm.size)
    slope = np.polyfit(t, pm, 1)[0]
    return slope / TWO_PI


def aom_precompensation(t_s: float, noise: NoiseModel) -> float:
    """Feed-forward frequency shift (Hz) cancelling the linear laser drift."""
    return -noise.laser_drift_hz_per_hour * t_s / 3600.0


def timing_loop_step(arrivals_a_ps: np.ndarray, arrivals_b_ps: np.ndarray,
                     delay_a_ps: float, delay_b_ps: float
                     ) -> tuple[float, float, bool]:
    """Recenter both users' pulse arrivals on the common grid.

    Each user's delay absorbs the centroid of that user's measured
    arrival offsets.  An empty arrival list leaves both delays
    unchanged and raises the gap flag.
    """
    arrivals_a = np.asarray(arrivals_a_ps, dtype=float)
    arrivals_b = np.asarray(arrivals_b_ps, dtype=float)
    if arrivals_a.size == 0 or arrivals_b.size == 0:
        return delay_a_ps, delay_b_ps, True
    return (delay_a_ps - float(arrivals_a.mean()),
            delay_b_ps - float(arrivals_b.mean()), False)


@dataclass(frozen=True)
class StabilizationSummary:
    """Headline statistics of one stabilization run.

    Drift-rate statistics are RMS values of the phase change per
    non-overlapping 1 ms window divided by the window length; the
    reduction factor compares the free-running and fast-locked
    signal-band drift rates.
    """

    free_drift_std_rad_per_s: float
    fast_locked_drift_std_rad_per_s: float
    residual_phase_std_c_rad: float
    residual_phase_std_q_rad: float
    reduction_factor: float
    freq_readout_hz: float


def drift_rate_rms(phase_rad: np.ndarray, dt_s: float,
                   window_s: float = RATE_WINDOW_S) -> float:
    """RMS drift rate over non-overlapping windows of ``window_s``."""
    phase = np.asarray(phase_rad, dtype=float)
    step = max(1, int(round(window_s / dt_s)))
    sampled = phase[::step]
    if sampled.size < 2:
        raise ValueError("series too short for the requested window")
    rates = np.diff(sampled) / (step * dt_s)
    return float(np.sqrt(np.mean(rates * rates)))


def run_stabilization(duration_s: float, noise: NoiseModel,
                      loop: LoopConfig, stages: str = "full",
                      seed: int = 0
                      ) -> tuple[StabilizationSummary, dict[str, np.ndarray]]:
    """Time-stepped simulation of the stabilization chain.

    Returns the summary plus a time-series dict with keys ``t_s``,
    ``phiC_rad``, ``phiQ_rad``, ``pm_rad``, ``fs_rad``, ``dc_counts``
    (one sample per fast-loop interval).

    The fast loop locks the reference band; the signal band then sees
    only the band-ratio-scaled residual: the clock-accuracy floor, the
    scaled laser-frequency term, and the fringe-quantized fiber
    correction (the modulator transfers whole reference fringes to the
    signal band, so shot-noise chatter of the fringe number leaks in at
    2*pi times the band offset fraction per flip).  The slow loop
    removes what is left.  Fiber-stretcher resets blank 1 ms of data.
    """
    if stages not in STAGES:
        raise ValueError(f"stages must be one of {STAGES}")
    dt = loop.fast_dt_s
    n = int(round(duration_s / dt))
    if n < 10_000:
        raise ValueError("duration must cover at least 1e4 fast-loop cycles")
    rng = np.random.default_rng(seed)

    # Fiber drift velocity: AR(1) recursion, vectorized.
    a, s = velocity_step_coeffs(noise, dt)
    v = lfilter([s], [1.0, -a], rng.standard_normal(n))
    fiber_phase = np.cumsum(v) * dt                       # reference band
    t = np.arange(1, n + 1) * dt
    f0 = noise.laser_drift_hz_per_hour / 3600.0
    laser_phase = TWO_PI * (0.5 * f0 * t * t)             # ramping offset
    phi_c = fiber_phase + laser_phase
    ratio = noise.band_ratio
    floor = noise.clock_drift_floor()
    phi_q_free = ratio * fiber_phase + laser_phase + floor * t

    pm = np.zeros(n)
    dc_counts = np.zeros(n)
    fs = np.zeros(n)
    resid_q = phi_q_free.copy()

    if stages != "none":
        fast = PIDState()
        slow = PIDState()
        delta = 1.0 - ratio
        setpoint = loop.dc_setpoint_counts
        vis = noise.visibility
        slow_every = max(1, int(round(loop.fast_rate_hz / loop.slow_rate_hz)))
        blank_steps = max(1, int(round(1e-3 / dt)))
        blank_until = -1
        blanked = np.zeros(n, dtype=bool)
        d0_set = loop.d0_setpoint_counts
        fs_val = 0.0
        for i in range(n):
            err_c = phi_c[i] + fast.output
            counts = rng.poisson(setpoint * (1.0 + vis * math.sin(err_c)))
            dc_counts[i] = counts
            fast_loop_step(counts, loop, fast)
            pm[i] = fast.unwrapped
            fringe = round(fast.unwrapped / TWO_PI)
            resid_q[i] = (floor * t[i] + delta * laser_phase[i]
                          - delta * TWO_PI * fringe)
            if stages == "full" and (i + 1) % slow_every == 0:
                d0_rate = rng.poisson(
                    d0_set * (1.0 + vis * math.sin(resid_q[i] + fs_val))
                ) * loop.slow_rate_hz
                fs_val = slow_loop_step(d0_rate, loop, slow)
                if slow.saturated:
                    blank_until = i + blank_steps
            fs[i] = fs_val
            if i <= blank_until:
                blanked[i] = True
    else:
        blanked = np.zeros(n, dtype=bool)

    warm = min(n // 5, int(round(0.2 / dt)))
    valid = ~blanked
    valid[:warm] = False

    free_rate = drift_rate_rms(phi_q_free, dt)
    if stages == "none":
        locked_rate = free_rate
        resid_c = phi_c
        resid_total = phi_q_free
        freq = -frequency_readout(phi_c, duration_s)
    else:
        locked_rate = drift_rate_rms(resid_q[warm:], dt)
        resid_c = phi_c + pm  # unwrapped pm tracks -phi_c when locked
        resid_total = resid_q + fs
        freq = -frequency_readout(pm[warm:], (n - warm) * dt)

    # Interference only sees the phase modulo one fringe.
    wrap = np.vectorize(math.remainder)
    summary = StabilizationSummary(
        free_drift_std_rad_per_s=free_rate,
        fast_locked_drift_std_rad_per_s=locked_rate,
        residual_phase_std_c_rad=float(np.std(wrap(resid_c[valid], TWO_PI))),
        residual_phase_std_q_rad=float(np.std(wrap(resid_total[valid], TWO_PI))),
        reduction_factor=free_rate / locked_rate if locked_rate > 0 else math.inf,
        freq_readout_hz=freq,
    )
    series = {
        "t_s": t,
        "phiC_rad": phi_c,
        "phiQ_rad": phi_q_free,
        "pm_rad": pm,
        "fs_rad": fs,
        "dc_counts": dc_counts,
    }
    return summary, series
