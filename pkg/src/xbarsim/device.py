"""Behavioral model of a single metal-oxide memristor crosspoint.

One device is a handful of sampled parameters: switching thresholds, analog
switching kinetics, conductance bounds, and optional defect state.  Voltage
pulses above threshold move the conductance gradually; everything below
threshold is read-only.  Conductance is in siemens, voltages in volts,
currents in amperes, times in seconds throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError

# Reference pulse width: switching-rate parameters are quoted per pulse of
# this width, and scale linearly with actual width.
PULSE_WIDTH_REF = 500e-6

# Largest voltage magnitude current() accepts before flagging a domain error.
SAFE_READ_VOLTAGE = 2.5

# Thresholds are clamped away from zero so a degenerate spec cannot produce
# a device that switches at 0 V.
_MIN_THRESHOLD = 0.05

_MIN_FORMING_CURRENT = 1e-6


@dataclass
class DeviceVariationSpec:
    """Population statistics for sampling devices.

    Threshold voltages are normal; initial/stuck conductances and switching
    rates are uniform over the given ranges.  The forming-related fields
    describe the latent pristine state used by the electroforming procedure:
    a pristine device conducts only through its pristine resistance until a
    current sweep with ceiling >= its sampled forming current activates it.
    """

    set_mu: float = 1.0
    set_sigma: float = 0.13
    reset_mu: float = -1.2
    reset_sigma: float = 0.15
    stuck_probability: float = 0.02
    stuck_conductance_range: tuple = (10e-6, 100e-6)
    g_init_range: tuple = (10e-6, 100e-6)
    g_min: float = 2e-6
    g_max: float = 150e-6
    nonlinearity_alpha: float = 0.0
    kinetics_rate_range: tuple = (0.02e-6, 0.06e-6)
    kinetics_voltage_scale: float = 0.3
    # Latent pristine/forming population (used when sampling pristine=True).
    preformed_probability: float = 0.05
    preformed_resistance_range: tuple = (2e4, 8e4)
    pristine_resistance_range: tuple = (1e6, 1e7)
    forming_current_mu: float = 400e-6
    forming_current_sigma: float = 80e-6
    post_forming_conductance_range: tuple = (30e-6, 120e-6)

    def validate(self):
        if self.set_sigma < 0 or self.reset_sigma < 0:
            raise ConfigurationError("threshold sigmas must be non-negative")
        if not 0.0 <= self.stuck_probability <= 1.0:
            raise ConfigurationError("stuck_probability must be in [0, 1]")
        if not 0.0 <= self.preformed_probability <= 1.0:
            raise ConfigurationError("preformed_probability must be in [0, 1]")
        for name in ("stuck_conductance_range", "g_init_range", "kinetics_rate_range",
                     "preformed_resistance_range", "pristine_resistance_range",
                     "post_forming_conductance_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigurationError(f"{name} must be ordered (lo <= hi)")
        if not 0 < self.g_min <= self.g_max:
            raise ConfigurationError("need 0 < g_min <= g_max")
        if self.kinetics_voltage_scale <= 0:
            raise ConfigurationError("kinetics_voltage_scale must be positive")
        return self


@dataclass
class MemristorDevice:
    """State and sampled parameters of one crosspoint device.

    ``conductance`` is the live analog state, always inside [g_min, g_max].
    A stuck device never changes state.  An unformed device conducts through
    ``pristine_resistance`` and ignores voltage pulses until formed.
    """

    conductance: float
    set_threshold: float
    reset_threshold: float
    g_min: float = 2e-6
    g_max: float = 150e-6
    nonlinearity_alpha: float = 0.0
    kinetics_rate: float = 0.04e-6
    kinetics_voltage_scale: float = 0.3
    stuck: bool = False
    # Latent forming state.
    formed: bool = True
    pristine_resistance: float = 5e6
    forming_current: float = 400e-6
    post_forming_conductance: float = 80e-6
    stuck_value: float = 50e-6

    def __post_init__(self):
        if self.set_threshold <= 0 or self.reset_threshold >= 0:
            raise ConfigurationError("need set_threshold > 0 and reset_threshold < 0")
        self.conductance = min(max(self.conductance, self.g_min), self.g_max)

    def copy(self) -> "MemristorDevice":
        return replace(self)

    def effective_conductance(self) -> float:
        """Low-voltage conductance seen by the circuit (pristine path if unformed)."""
        if not self.formed:
            return 1.0 / self.pristine_resistance
        return self.conductance

    def current(self, voltage: float) -> float:
        """Static I(V) = G*V*(1 + alpha*V^2); alpha = 0 is the linear model."""
        if abs(voltage) > SAFE_READ_VOLTAGE:
            raise ValueError(f"|{voltage} V| exceeds safe read bound {SAFE_READ_VOLTAGE} V")
        g = self.effective_conductance()
        return g * voltage * (1.0 + self.nonlinearity_alpha * voltage * voltage)

    def read_conductance(self, v_read: float = 0.2) -> float:
        """Non-destructive conductance read: current(v_read) / v_read."""
        if v_read == 0.0:
            raise ValueError("read voltage must be nonzero")
        if self.formed and abs(v_read) > min(self.set_threshold, -self.reset_threshold):
            raise ValueError(f"read at {v_read} V would disturb the device state")
        return self.current(v_read) / v_read

    def apply_pulse(self, amplitude: float, width: float = PULSE_WIDTH_REF) -> "MemristorDevice":
        """Apply one voltage pulse; above-threshold pulses move the conductance.

        The update is threshold-gated and exponential in overvoltage:
        dG = rate * (width/500us) * exp(overvoltage / voltage_scale), with
        positive pulses increasing conductance and negative decreasing it,
        clamped to [g_min, g_max].  Returns the device for chaining.
        """
        if width <= 0:
            raise ValueError("pulse width must be positive")
        if self.stuck or not self.formed:
            return self
        scale = width / PULSE_WIDTH_REF
        if amplitude >= self.set_threshold:
            over = amplitude - self.set_threshold
            step = self.kinetics_rate * scale * math.exp(over / self.kinetics_voltage_scale)
            self.conductance = min(self.conductance + step, self.g_max)
        elif amplitude <= self.reset_threshold:
            over = self.reset_threshold - amplitude
            step = self.kinetics_rate * scale * math.exp(over / self.kinetics_voltage_scale)
            self.conductance = max(self.conductance - step, self.g_min)
        return self


def _uniform(rng: np.random.Generator, bounds) -> float:
    lo, hi = bounds
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def sample_device(spec: DeviceVariationSpec, rng: np.random.Generator,
                  pristine: bool = False) -> MemristorDevice:
    """Draw one device from the population described by ``spec``.

    The draw order is fixed so a given generator state always yields the same
    device, regardless of whether the pristine fields end up being used.
    With ``pristine=True`` the device starts unformed (high-resistance) and
    must go through the forming procedure before it responds to pulses.
    """
    spec.validate()
    set_th = max(_MIN_THRESHOLD, float(rng.normal(spec.set_mu, spec.set_sigma)))
    reset_th = min(-_MIN_THRESHOLD, float(rng.normal(spec.reset_mu, spec.reset_sigma)))
    stuck = bool(rng.uniform() < spec.stuck_probability)
    stuck_value = _uniform(rng, spec.stuck_conductance_range)
    g_init = _uniform(rng, spec.g_init_range)
    rate = _uniform(rng, spec.kinetics_rate_range)
    preformed = bool(rng.uniform() < spec.preformed_probability) and not stuck
    if preformed:
        pristine_r = _uniform(rng, spec.preformed_resistance_range)
    else:
        pristine_r = _uniform(rng, spec.pristine_resistance_range)
    if stuck:
        forming_i = math.inf
    else:
        forming_i = max(_MIN_FORMING_CURRENT,
                        float(rng.normal(spec.forming_current_mu, spec.forming_current_sigma)))
    post_g = _uniform(rng, spec.post_forming_conductance_range)

    conductance = stuck_value if stuck else g_init
    return MemristorDevice(
        conductance=conductance,
        set_threshold=set_th,
        reset_threshold=reset_th,
        g_min=spec.g_min,
        g_max=spec.g_max,
        nonlinearity_alpha=spec.nonlinearity_alpha,
        kinetics_rate=rate,
        kinetics_voltage_scale=spec.kinetics_voltage_scale,
        stuck=stuck,
        formed=not pristine,
        pristine_resistance=pristine_r,
        forming_current=forming_i,
        post_forming_conductance=post_g,
        stuck_value=stuck_value,
    )
