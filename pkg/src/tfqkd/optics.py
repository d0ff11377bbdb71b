"""Fiber link, single-photon detectors and phase-noise physics.

The interference node sits between the two users; each arm has its own
measured loss.  Phase evolution is modeled as a velocity-correlated
random walk so that short-horizon drift-rate statistics and longer-term
wander are both reproduced by one parameter set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Speed of light (m/s), used for wavelength <-> frequency conversion.
_C = 299_792_458.0


@dataclass(frozen=True)
class LinkConfig:
    """Two fiber arms meeting at the measurement node.

    If a measured loss (dB) is given for an arm it overrides the
    length * attenuation product.  ``extra_loss_a_db``/``extra_loss_b_db``
    model per-arm insertion loss of the measurement node, before the
    detectors.
    """

    length_a_km: float
    length_b_km: float
    attenuation_db_per_km: float = 0.183
    measured_loss_a_db: float | None = None
    measured_loss_b_db: float | None = None
    extra_loss_a_db: float = 0.0
    extra_loss_b_db: float = 0.0

    def __post_init__(self) -> None:
        if self.length_a_km < 0 or self.length_b_km < 0:
            raise ValueError("arm lengths must be nonnegative")
        if self.attenuation_db_per_km < 0:
            raise ValueError("attenuation must be nonnegative")

    def arm_loss_db(self, arm: str) -> float:
        """Total loss (dB) of one arm, source to interference node."""
        if arm == "a":
            base = self.measured_loss_a_db
            if base is None:
                base = self.length_a_km * self.attenuation_db_per_km
            extra = self.extra_loss_a_db
        elif arm == "b":
            base = self.measured_loss_b_db
            if base is None:
                base = self.length_b_km * self.attenuation_db_per_km
            extra = self.extra_loss_b_db
        else:
            raise ValueError("arm must be 'a' or 'b'")
        return base + extra

    def arm_transmittance(self, arm: str) -> float:
        """Linear transmittance of one arm (detector efficiency excluded)."""
        return 10.0 ** (-self.arm_loss_db(arm) / 10.0)

    @property
    def total_length_km(self) -> float:
        return self.length_a_km + self.length_b_km


def arm_transmittance(link: LinkConfig, arm: str, det: "DetectorModel",
                      detector: str) -> float:
    """End-to-end transmittance of one arm into one detector.

    Fiber plus measurement-node insertion loss, times the detection
    efficiency of the chosen output detector (``"d0"`` or ``"d1"``).
    """
    if detector == "d0":
        eff = det.efficiency_d0
    elif detector == "d1":
        eff = det.efficiency_d1
    else:
        raise ValueError("detector must be 'd0' or 'd1'")
    return link.arm_transmittance(arm) * eff


@dataclass(frozen=True)
class DetectorModel:
    """Two detectors at the interference node outputs."""

    efficiency_d0: float
    efficiency_d1: float
    dark_rate_d0_hz: float
    dark_rate_d1_hz: float
    window_s: float = 2.0e-9

    def __post_init__(self) -> None:
        for name in ("efficiency_d0", "efficiency_d1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.dark_rate_d0_hz < 0 or self.dark_rate_d1_hz < 0:
            raise ValueError("dark rates must be nonnegative")
        if self.window_s <= 0:
            raise ValueError("gate window must be positive")
        if max(self.dark_rate_d0_hz, self.dark_rate_d1_hz) * self.window_s >= 1e-3:
            raise ValueError("dark probability per window must stay below 1e-3")

    @property
    def dark_prob_d0(self) -> float:
        """Dark-click probability per gate window."""
        return 1.0 - math.exp(-self.dark_rate_d0_hz * self.window_s)

    @property
    def dark_prob_d1(self) -> float:
        return 1.0 - math.exp(-self.dark_rate_d1_hz * self.window_s)


@dataclass(frozen=True)
class NoiseModel:
    """Phase/frequency noise of the twin-field link.

    ``free_drift_rate_std`` is the standard deviation of the phase
    drift rate measured over 1 ms intervals with all loops open.
    ``drift_corr_time_s`` sets how long the drift velocity stays
    correlated; together they fix the velocity-process parameters.
    """

    free_drift_rate_std: float = 1.65e4
    drift_corr_time_s: float = 0.03
    laser_drift_hz_per_hour: float = 1777.0
    clock_accuracy: float = 5e-11
    comb_span_hz: float = 1e11
    lambda_q_nm: float = 1550.495
    lambda_c_nm: float = 1549.694
    visibility: float = 0.9795
    timing_jitter_ps: float = 8.4
    diurnal_delay_ns: float = 20.0

    def __post_init__(self) -> None:
        if self.free_drift_rate_std < 0:
            raise ValueError("drift rate std must be nonnegative")
        if self.drift_corr_time_s <= 0:
            raise ValueError("drift correlation time must be positive")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if self.lambda_q_nm <= 0 or self.lambda_c_nm <= 0:
            raise ValueError("wavelengths must be positive")
        if self.lambda_q_nm == self.lambda_c_nm:
            raise ValueError("reference and signal wavelengths must differ")

    @property
    def band_ratio(self) -> float:
        """Frequency ratio nu_q / nu_c = lambda_c / lambda_q."""
        return self.lambda_c_nm / self.lambda_q_nm

    def dual_band_reduction_factor(self) -> float:
        """Residual-noise suppression from locking at a nearby wavelength.

        lambda_c / |lambda_c - lambda_q|: the factor by which signal-band
        phase noise is reduced when the reference band is held.
        """
        return self.lambda_c_nm / abs(self.lambda_c_nm - self.lambda_q_nm)

    def clock_drift_floor(self) -> float:
        """Irreducible phase drift rate (rad/s) from the two clock offsets."""
        return 2.0 * math.pi * math.sqrt(2.0) * self.clock_accuracy * self.comb_span_hz

    def timing_overlap_visibility(self, pulse_width_ps: float) -> float:
        """Overlap factor for this model's arrival-time jitter."""
        return timing_overlap_visibility(self.timing_jitter_ps, pulse_width_ps)


def timing_overlap_visibility(offset_ps: float, pulse_width_ps: float) -> float:
    """Gaussian-pulse overlap factor exp(-offset^2 / (2 width^2)).

    Multiplies the interference visibility when the two users' pulses
    arrive ``offset_ps`` apart.
    """
    if pulse_width_ps <= 0:
        raise ValueError("pulse width must be positive")
    r = offset_ps / pulse_width_ps
    return math.exp(-0.5 * r * r)


@dataclass
class ChannelPhaseState:
    """Evolving differential phase of both bands plus laser frequency offset.

    ``phi_c``: reference-band differential phase (rad); ``phi_q``:
    signal-band phase; ``velocity``: common fiber drift velocity
    (rad/s, reference band); ``freq_offset_hz``: slowly ramping
    frequency difference between the two users' lasers.
    """

    phi_c: float = 0.0
    phi_q: float = 0.0
    velocity: float = 0.0
    freq_offset_hz: float = 0.0
    elapsed_s: float = 0.0
    time_offsets_ps: tuple[float, float] = (0.0, 0.0)


def velocity_step_coeffs(noise: NoiseModel, dt: float) -> tuple[float, float]:
    """AR(1) update coefficients (a, s) with v' = a v + s * N(0,1).

    The stationary velocity variance is chosen so that the std of the
    1 ms average drift rate equals ``free_drift_rate_std``.  For the
    discrete AR(1) velocity, the phase change over m steps has variance
    sigma_v^2 dt^2 [m + 2 a (m - 1 - m a + a^m) / (1 - a)^2], which the
    calibration inverts exactly.
    """
    tau = noise.drift_corr_time_s
    a = math.exp(-dt / tau)
    t_win = 1e-3
    m = max(1, round(t_win / dt))
    if a < 1.0:
        cross = 2.0 * a * (m - 1 - m * a + a ** m) / (1.0 - a) ** 2
    else:
        cross = float(m * (m - 1))
    var_shape = (m + cross) * dt * dt / (t_win * t_win)
    sigma_v = noise.free_drift_rate_std / math.sqrt(var_shape)
    s = sigma_v * math.sqrt(1.0 - a * a)
    return a, s


def phase_step(state: ChannelPhaseState, dt: float, noise: NoiseModel,
               rng: np.random.Generator) -> ChannelPhaseState:
    """Advance the channel phase state by ``dt`` seconds (in place).

    The fiber drift velocity applies to the reference band directly and
    to the signal band scaled by the frequency ratio.  The laser
    frequency offset (ramping at the specified drift rate) enters both
    bands; the clock-accuracy floor affects only the signal band, whose
    phase is reconstructed from a reference measured against an
    imperfect timebase.
    """
    a, s = velocity_step_coeffs(noise, dt)
    state.velocity = a * state.velocity + s * rng.standard_normal()
    two_pi_f = 2.0 * math.pi * state.freq_offset_hz
    state.phi_c += state.velocity * dt + two_pi_f * dt
    state.phi_q += (noise.band_ratio * state.velocity * dt
                    + two_pi_f * dt
                    + noise.clock_drift_floor() * dt)
    state.freq_offset_hz += noise.laser_drift_hz_per_hour / 3600.0 * dt
    state.elapsed_s += dt
    return state


def click_probabilities(mu_a: float, mu_b: float, delta: float,
                        visibility: float, pd0: float, pd1: float
                        ) -> tuple[float, float]:
    """Per-window click probabilities (p_d0, p_d1) for one pulse pair.

    ``mu_a``/``mu_b`` are arriving mean photon numbers at the
    interference node.  Output-port means follow the two-mode
    beamsplitter expression n = (mu_a+mu_b)/2 +- V sqrt(mu_a mu_b)
    cos(delta); threshold detectors with dark probability pd click with
    1 - (1-pd) exp(-n).
    """
    if mu_a < 0 or mu_b < 0:
        raise ValueError("mean photon numbers must be nonnegative")
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    cross = visibility * math.sqrt(mu_a * mu_b) * math.cos(delta)
    mean = 0.5 * (mu_a + mu_b)
    p0 = 1.0 - (1.0 - pd0) * math.exp(-(mean + cross))
    p1 = 1.0 - (1.0 - pd1) * math.exp(-(mean - cross))
    return p0, p1


def click_probability_arrays(mu_a: np.ndarray, mu_b: np.ndarray,
                             delta_phi: np.ndarray, link: LinkConfig,
                             det: DetectorModel, noise: NoiseModel
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized form of :func:`click_probabilities`."""
    ma = np.asarray(mu_a, dtype=float) * link.arm_transmittance("a")
    mb = np.asarray(mu_b, dtype=float) * link.arm_transmittance("b")
    cross = noise.visibility * np.sqrt(ma * mb) * np.cos(delta_phi)
    mean = 0.5 * (ma + mb)
    n0 = det.efficiency_d0 * (mean + cross)
    n1 = det.efficiency_d1 * (mean - cross)
    p0 = 1.0 - (1.0 - det.dark_prob_d0) * np.exp(-n0)
    p1 = 1.0 - (1.0 - det.dark_prob_d1) * np.exp(-n1)
    return p0, p1
