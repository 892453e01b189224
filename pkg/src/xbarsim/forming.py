"""Automated one-device-at-a-time electroforming over a pristine crossbar.

The procedure per device: read the pristine resistance at 0.1 V; devices
already conducting below the pristine threshold are counted as pre-formed.
Otherwise current sweeps with increasing ceilings are applied until the
low-voltage current ratio confirms forming.  Devices that exhaust the
attempt budget get a second round (after resetting every formed device in
the array, with an escalated ceiling); devices failing both rounds are
recorded defective and flagged stuck.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .crossbar import Crossbar
from .device import MemristorDevice
from .errors import ConfigurationError

PRISTINE_READ_V = 0.1

STATUS_PREFORMED = "preformed"
STATUS_FORMED = "formed"
STATUS_DEFECTIVE = "defective"


@dataclass
class FormingSpec:
    """Parameters of the forming state machine.

    The ceiling ladder in round r runs from I_start to I_stop (both scaled by
    escalation**(r-1)) in I_step increments, at most max_attempts sweeps per
    round.  Success requires the post/pre current ratio at 0.1 V to reach
    R_min_ratio.  After success (or for pre-formed devices) the device is
    driven to a low-conductance state with V_reset pulses.
    """

    I_start: float = 180e-6
    I_stop: float = 540e-6
    I_step: float = 20e-6
    R_min_ratio: float = 5.0
    V_reset: float = -1.3
    R_TH: float = 6e5
    max_attempts: int = 19
    max_rounds: int = 2
    escalation: float = 1.25
    # Reset-to-low-state knobs: long pulses, amplitude escalated when a
    # device's reset threshold sits below |V_reset|.
    reset_pulse_width: float = 0.05
    reset_amplitude_floor: float = -1.9
    reset_amplitude_step: float = 0.05
    reset_pulse_budget: int = 200
    low_conductance_target: float = 3e-6

    def validate(self):
        if self.I_start > self.I_stop:
            raise ConfigurationError("need I_start <= I_stop")
        if self.I_step <= 0:
            raise ConfigurationError("I_step must be positive")
        if self.R_min_ratio <= 1:
            raise ConfigurationError("R_min_ratio must exceed 1")
        if self.V_reset >= 0:
            raise ConfigurationError("V_reset must be negative")
        if self.max_attempts < 1 or self.max_rounds < 1:
            raise ConfigurationError("max_attempts and max_rounds must be >= 1")
        return self


@dataclass
class FormingOutcome:
    status: str
    attempts_used: int
    trace: list = field(default_factory=list)   # (sweep ceiling A, current ratio)


def _reset_to_low(device: MemristorDevice, spec: FormingSpec):
    """Drive a formed device into a low-conductance state with reset pulses.

    The flow uses a fixed V_reset, but a device whose reset threshold lies
    below |V_reset| would never move, so the amplitude escalates whenever a
    pulse has no effect.
    """
    if device.stuck or not device.formed:
        return
    amplitude = spec.V_reset
    for _ in range(spec.reset_pulse_budget):
        if device.conductance <= spec.low_conductance_target:
            return
        before = device.conductance
        device.apply_pulse(amplitude, spec.reset_pulse_width)
        if device.conductance >= before:            # ineffective: escalate
            if amplitude <= spec.reset_amplitude_floor:
                return
            amplitude = max(amplitude - spec.reset_amplitude_step,
                            spec.reset_amplitude_floor)


def _sweep(device: MemristorDevice, ceiling: float):
    """One current-controlled forming sweep up to ``ceiling``.

    In this model a pristine device forms as soon as the ceiling reaches its
    latent forming current; formed and stuck devices are unaffected.
    """
    if device.formed or device.stuck:
        return
    if ceiling >= device.forming_current:
        device.formed = True
        device.conductance = min(max(device.post_forming_conductance, device.g_min),
                                 device.g_max)


def form_device(xbar: Crossbar, row: int, col: int, spec: FormingSpec) -> FormingOutcome:
    """Run the forming flow for one device; never raises on failure."""
    spec.validate()
    device = xbar.device(row, col)

    r_pristine = PRISTINE_READ_V / device.current(PRISTINE_READ_V)
    if r_pristine < spec.R_TH:
        # Already conducting: effectively pre-formed (e.g. by annealing).
        device.formed = True
        _reset_to_low(device, spec)
        return FormingOutcome(STATUS_PREFORMED, attempts_used=0)

    i_before = device.current(PRISTINE_READ_V)
    trace = []
    attempts = 0
    for round_idx in range(spec.max_rounds):
        scale = spec.escalation ** round_idx
        ceiling = spec.I_start * scale
        stop = spec.I_stop * scale
        for _ in range(spec.max_attempts):
            attempts += 1
            _sweep(device, ceiling)
            ratio = device.current(PRISTINE_READ_V) / i_before
            trace.append((ceiling, ratio))
            if ratio >= spec.R_min_ratio:
                _reset_to_low(device, spec)
                return FormingOutcome(STATUS_FORMED, attempts, trace)
            ceiling = min(ceiling + spec.I_step * scale, stop)
        if round_idx + 1 < spec.max_rounds:
            # Leakage through already-on neighbours can mask forming; retry
            # after pulling every formed device back to its low state.
            for r in range(xbar.rows):
                for c in range(xbar.cols):
                    _reset_to_low(xbar.devices[r][c], spec)

    # Give up: the cell is stuck at some mid-range conductance.
    device.stuck = True
    device.formed = True
    device.conductance = min(max(device.stuck_value, device.g_min), device.g_max)
    return FormingOutcome(STATUS_DEFECTIVE, attempts, trace)


def form_all(xbar: Crossbar, targets, spec: FormingSpec) -> dict:
    """Form the listed (row, col) cells in order; returns the report dict.

    The report maps directly onto the JSON artifact: per-device outcomes in
    input order plus the aggregate defective fraction.
    """
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ConfigurationError("duplicate forming targets")
    entries = []
    n_defective = 0
    for row, col in targets:
        outcome = form_device(xbar, row, col, spec)
        if outcome.status == STATUS_DEFECTIVE:
            n_defective += 1
        entries.append({
            "row": row,
            "col": col,
            "status": outcome.status,
            "attempts": outcome.attempts_used,
            "trace": [[c, r] for c, r in outcome.trace],
        })
    fraction = n_defective / len(targets) if targets else 0.0
    return {"devices": entries, "defective_count": n_defective,
            "defective_fraction": fraction}


def save_report(report: dict, path):
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
