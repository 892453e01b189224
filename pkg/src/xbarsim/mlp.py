"""Differential-pair two-layer perceptron inference.

Each signed weight is a pair of devices on adjacent crossbar rows: row 2j
carries G+ and row 2j+1 carries G- for neuron j, columns are inputs.  The
hidden neuron saturates (0.2 V rail), the output neuron is a linear
transimpedance stage, both with the 1e6 V/A gain of the board:

    V_hidden = 0.2 * tanh(1e6 * (I+ - I-))
    V_out    = 1e6 * (I+ - I-)

Pixels map to +/-0.2 V inputs (1 -> +0.2 V), and both layers carry a fixed
+0.2 V bias input appended after the data inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .crossbar import Crossbar, vmm
from .errors import ConfigurationError


@dataclass
class NetworkTopology:
    n_inputs: int = 16
    n_hidden: int = 10
    n_outputs: int = 4
    input_level: float = 0.2
    bias_level: float = 0.2
    transimpedance_gain: float = 1e6
    hidden_saturation: float = 0.2
    output_clamp: float | None = None     # volts; None = unclamped linear stage

    @property
    def layer1_shape(self):
        """(grid rows, grid cols) of the first-layer pair grid."""
        return 2 * self.n_hidden, self.n_inputs + 1

    @property
    def layer2_shape(self):
        return 2 * self.n_outputs, self.n_hidden + 1


DEFAULT_TOPOLOGY = NetworkTopology()


@dataclass
class ConductancePairMap:
    """Differential-pair conductances of one layer, in siemens.

    ``plus`` and ``minus`` have shape (neurons, inputs); the corresponding
    crossbar grid interleaves them on adjacent rows.
    """

    plus: np.ndarray
    minus: np.ndarray
    layer: int = 1

    def __post_init__(self):
        self.plus = np.asarray(self.plus, dtype=float)
        self.minus = np.asarray(self.minus, dtype=float)
        if self.plus.shape != self.minus.shape:
            raise ConfigurationError("plus/minus shapes differ")

    @property
    def n_neurons(self):
        return self.plus.shape[0]

    @property
    def n_inputs(self):
        return self.plus.shape[1]

    def to_grid(self) -> np.ndarray:
        grid = np.empty((2 * self.n_neurons, self.n_inputs))
        grid[0::2] = self.plus
        grid[1::2] = self.minus
        return grid

    @classmethod
    def from_grid(cls, grid, layer: int = 1) -> "ConductancePairMap":
        grid = np.asarray(grid, dtype=float)
        if grid.shape[0] % 2:
            raise ConfigurationError("pair grid needs an even number of rows")
        return cls(plus=grid[0::2].copy(), minus=grid[1::2].copy(), layer=layer)


def neuron_hidden(delta_current, gain: float = 1e6, saturation: float = 0.2):
    """Saturating hidden-stage response: saturation * tanh(gain * dI)."""
    return saturation * np.tanh(gain * np.asarray(delta_current, dtype=float))


def neuron_output(delta_current, gain: float = 1e6, clamp: float | None = None):
    """Linear output stage: gain * dI, optionally clamped at +/-clamp volts."""
    v = gain * np.asarray(delta_current, dtype=float)
    if clamp is not None:
        v = np.clip(v, -clamp, clamp)
    return v


def _pair_currents(layer, inputs: np.ndarray):
    """(I+, I-) per neuron for a ConductancePairMap or a Crossbar layer."""
    if isinstance(layer, ConductancePairMap):
        return layer.plus @ inputs, layer.minus @ inputs
    if isinstance(layer, Crossbar):
        currents = vmm(layer, inputs)
        return currents[0::2], currents[1::2]
    raise TypeError(f"unsupported layer type {type(layer).__name__}")


def layer_forward(layer, inputs, kind: str, topology: NetworkTopology = DEFAULT_TOPOLOGY):
    """Run one differential-pair layer; kind is 'hidden' or 'output'."""
    inputs = np.asarray(inputs, dtype=float)
    n_in = layer.n_inputs if isinstance(layer, ConductancePairMap) else layer.cols
    if inputs.shape != (n_in,):
        raise ValueError(f"expected {n_in} inputs, got shape {inputs.shape}")
    i_plus, i_minus = _pair_currents(layer, inputs)
    delta = i_plus - i_minus
    if kind == "hidden":
        return neuron_hidden(delta, topology.transimpedance_gain, topology.hidden_saturation)
    if kind == "output":
        return neuron_output(delta, topology.transimpedance_gain, topology.output_clamp)
    raise ValueError(f"unknown activation kind {kind!r}")


@dataclass
class MlpNetwork:
    """Two layers (pair maps or crossbars) plus the topology constants."""

    layer1: object
    layer2: object
    topology: NetworkTopology = field(default_factory=NetworkTopology)


def encode_pixels(pixels, topology: NetworkTopology = DEFAULT_TOPOLOGY) -> np.ndarray:
    """Map binary pixels to +/-input_level volts (1 -> +, 0 -> -)."""
    px = np.asarray(pixels, dtype=float)
    if px.shape != (topology.n_inputs,):
        raise ValueError(f"expected {topology.n_inputs} pixels")
    return np.where(px > 0.5, topology.input_level, -topology.input_level)


def infer(net: MlpNetwork, pixels) -> tuple:
    """Classify one pattern; returns (class index, output voltages).

    Ties break toward the lowest class index.
    """
    topo = net.topology
    x = np.concatenate([encode_pixels(pixels, topo), [topo.bias_level]])
    hidden = layer_forward(net.layer1, x, "hidden", topo)
    h = np.concatenate([hidden, [topo.bias_level]])
    outputs = layer_forward(net.layer2, h, "output", topo)
    return int(np.argmax(outputs)), outputs
