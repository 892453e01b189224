"""Training paths: ex-situ backpropagation and in-situ Manhattan-rule.

Ex-situ training runs full-batch gradient descent on mean-square error with
the hardware transfer functions (0.2 V inputs, saturating 0.2*tanh hidden
stage, 1e6 V/A gain), keeping every weight representable as a differential
conductance pair inside the working range.  The hardware-aware variant
additionally freezes defective devices at their measured conductances and
routes the remaining updates around them.

In-situ training drives the simulated crossbars directly: inference on the
hardware, update signs from backpropagation on read-back conductances, and
one fixed-amplitude pulse per device, one crossbar row at a time in two
polarity steps.

Weights at every interface are in siemens.  Learning rates are quoted in
gain-normalized units (1 unit = 1 uS of differential conductance), which is
the natural scale at which the 1e6 V/A gain cancels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .benchmark import label_vector, pixel_matrix
from .crossbar import Crossbar
from .errors import ConfigurationError, DivergenceError
from .mlp import DEFAULT_TOPOLOGY, ConductancePairMap
from .rng import stream

# Largest representable pair weight: 2 * min(g_bias - lo, hi - g_bias).
WEIGHT_CLIP = 90e-6

_U = 1e-6          # gain-normalized weight unit (siemens)


@dataclass
class TrainingConfig:
    learning_rate: float = 1.0
    epochs: int = 6000
    seed: int = 0
    init_scale: float = 4e-6          # uniform +/- initial weights, siemens
    target_level: float = 1.0         # MSE target voltage for the winning class
    clip_interval: tuple = (10e-6, 100e-6)
    g_bias: float = 55e-6
    fill_range: bool = True           # scale trained weights into the pair range
    fill_fraction: float = 2.0 / 3.0  # fraction of the representable range to use
    finetune_epochs: int = 2000       # constrained polish in hardware-aware mode

    def validate(self):
        lo, hi = self.clip_interval
        if not 0 < lo < hi:
            raise ConfigurationError("clip interval must be positive and ordered")
        if not lo <= self.g_bias <= hi:
            raise ConfigurationError("g_bias must sit inside the clip interval")
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise ConfigurationError("epoch counts must be non-negative")
        return self

    @property
    def weight_limit(self) -> float:
        lo, hi = self.clip_interval
        return 2.0 * min(self.g_bias - lo, hi - self.g_bias)


@dataclass
class DefectMap:
    """Stuck devices on the two pair grids, values in siemens."""

    layer1_stuck: np.ndarray
    layer1_values: np.ndarray
    layer2_stuck: np.ndarray
    layer2_values: np.ndarray

    @classmethod
    def from_crossbars(cls, xb1: Crossbar, xb2: Crossbar) -> "DefectMap":
        return cls(xb1.stuck_map(), xb1.conductances(),
                   xb2.stuck_map(), xb2.conductances())


def weights_to_pairs(W, g_bias: float = 55e-6, clip=(10e-6, 100e-6),
                     layer: int = 1) -> ConductancePairMap:
    """Split signed weights into differential pairs: G+/- = g_bias +/- W/2.

    Out-of-range weights are clipped into the representable interval with a
    warning, mirroring the training-time clip.
    """
    W = np.asarray(W, dtype=float)
    limit = 2.0 * min(g_bias - clip[0], clip[1] - g_bias)
    if np.any(np.abs(W) > limit * (1 + 1e-12)):
        warnings.warn("weights exceed the pair-representable range; clipping")
        W = np.clip(W, -limit, limit)
    return ConductancePairMap(plus=g_bias + W / 2.0, minus=g_bias - W / 2.0,
                              layer=layer)


def pairs_to_weights(pair_map: ConductancePairMap) -> np.ndarray:
    """Signed weights encoded by a pair map: W = G+ - G-."""
    return pair_map.plus - pair_map.minus


def encode_batch(pixels_matrix, topology=DEFAULT_TOPOLOGY) -> np.ndarray:
    """Binary pixel rows -> +/-input_level volts with the bias column appended."""
    X = np.asarray(pixels_matrix, dtype=float)
    lv = topology.input_level
    inputs = np.where(X > 0.5, lv, -lv)
    bias = np.full((len(X), 1), topology.bias_level)
    return np.hstack([inputs, bias])


def forward_batch(w1, w2, pixels_matrix, topology=DEFAULT_TOPOLOGY) -> np.ndarray:
    """Output voltages for a batch of patterns; weights in siemens."""
    Xe = encode_batch(pixels_matrix, topology)
    gain = topology.transimpedance_gain
    H = topology.hidden_saturation * np.tanh(gain * (Xe @ np.asarray(w1).T))
    Ha = np.hstack([H, np.full((len(H), 1), topology.bias_level)])
    return gain * (Ha @ np.asarray(w2).T)


def _grads(u1, u2, Xe, T, topology=DEFAULT_TOPOLOGY):
    """MSE gradients in gain-normalized units; returns (loss, Y, d1, d2)."""
    sat = topology.hidden_saturation
    bias = topology.bias_level
    A = Xe @ u1.T
    tanh_a = np.tanh(A)
    H = sat * tanh_a
    Ha = np.hstack([H, np.full((len(H), 1), bias)])
    Y = Ha @ u2.T
    dY = 2.0 * (Y - T) / T.size
    d2 = dY.T @ Ha
    dH = dY @ u2[:, :-1]
    d1 = (dH * sat * (1.0 - tanh_a ** 2)).T @ Xe
    loss = float(((Y - T) ** 2).mean())
    return loss, Y, d1, d2


def _targets(y, n_outputs, level):
    T = np.full((len(y), n_outputs), -level)
    T[np.arange(len(y)), y] = level
    return T


@dataclass
class TrainingOutcome:
    weights: tuple                 # (w1, w2) in siemens
    pair_maps: tuple               # (layer1, layer2) ConductancePairMap
    curve: list                    # (epoch, mse, train fidelity) rows
    train_fidelity: float
    range_scale: float = 1.0       # factor applied by the range fill


def train_ex_situ(patterns, cfg: TrainingConfig,
                  defects: DefectMap | None = None) -> TrainingOutcome:
    """Full-batch backpropagation on the canonical topology (16-10-4 + biases).

    Stage 1 trains signed weights with per-step clipping to the pair range.
    The result is then normalized onto the full conductance range (weight
    import is a fixed-precision analog write, so dynamic range is margin)
    and split into differential pairs.  With a defect map, stuck devices are
    pinned at their measured conductances, their pair partners re-solved for
    the wanted weights, and a constrained fine-tune polishes the network
    with the stuck entries excluded from every update.
    """
    cfg.validate()
    if not patterns:
        raise ConfigurationError("empty training set")
    topo = DEFAULT_TOPOLOGY
    Xe = encode_batch(pixel_matrix(patterns), topo)
    y = label_vector(patterns)
    T = _targets(y, topo.n_outputs, cfg.target_level)
    limit_u = cfg.weight_limit / _U
    lr = cfg.learning_rate

    rng = stream(cfg.seed, "training-init")
    init_u = cfg.init_scale / _U
    u1 = rng.uniform(-init_u, init_u, (topo.n_hidden, topo.n_inputs + 1))
    u2 = rng.uniform(-init_u, init_u, (topo.n_outputs, topo.n_hidden + 1))

    curve = []
    for epoch in range(cfg.epochs):
        loss, Y, d1, d2 = _grads(u1, u2, Xe, T, topo)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        curve.append((epoch, loss, float((Y.argmax(1) == y).mean())))
        u1 = np.clip(u1 - lr * d1, -limit_u, limit_u)
        u2 = np.clip(u2 - lr * d2, -limit_u, limit_u)

    # Normalize into the representable range: classification is invariant to
    # a common positive scale, and larger conductance contrasts buy import
    # headroom against tuning error and stuck cells.  A third of the range is
    # kept in reserve so a single defective pair cannot dominate a neuron.
    beta = 1.0
    peak = max(np.abs(u1).max(), np.abs(u2).max())
    if cfg.fill_range and peak > 0:
        beta = cfg.fill_fraction * limit_u / peak
        u1, u2 = u1 * beta, u2 * beta

    g_bias_u = cfg.g_bias / _U
    lo_u, hi_u = cfg.clip_interval[0] / _U, cfg.clip_interval[1] / _U
    p1, m1 = g_bias_u + u1 / 2.0, g_bias_u - u1 / 2.0
    p2, m2 = g_bias_u + u2 / 2.0, g_bias_u - u2 / 2.0

    if defects is not None:
        p1, m1 = _pin_and_solve(p1, m1, u1, defects.layer1_stuck,
                                defects.layer1_values, lo_u, hi_u)
        p2, m2 = _pin_and_solve(p2, m2, u2, defects.layer2_stuck,
                                defects.layer2_values, lo_u, hi_u)
        p1, m1, p2, m2 = _finetune_pairs(
            p1, m1, p2, m2, defects, Xe, y, cfg, beta, curve, topo)

    w1, w2 = (p1 - m1) * _U, (p2 - m2) * _U
    maps = (ConductancePairMap(p1 * _U, m1 * _U, layer=1),
            ConductancePairMap(p2 * _U, m2 * _U, layer=2))
    fid = float((forward_batch(w1, w2, pixel_matrix(patterns), topo).argmax(1) == y).mean())
    return TrainingOutcome(weights=(w1, w2), pair_maps=maps, curve=curve,
                           train_fidelity=fid, range_scale=beta)


def _pin_and_solve(p, m, u, stuck_grid, value_grid, lo_u, hi_u):
    """Pin stuck devices (values in siemens) and re-solve free partners."""
    sp, sm = stuck_grid[0::2], stuck_grid[1::2]
    vp, vm = value_grid[0::2] / _U, value_grid[1::2] / _U
    p, m = p.copy(), m.copy()
    p[sp] = vp[sp]
    m[sm] = vm[sm]
    fix_m = sp & ~sm
    m[fix_m] = np.clip(p[fix_m] - u[fix_m], lo_u, hi_u)
    fix_p = sm & ~sp
    p[fix_p] = np.clip(m[fix_p] + u[fix_p], lo_u, hi_u)
    return p, m


def _finetune_pairs(p1, m1, p2, m2, defects, Xe, y, cfg, beta, curve, topo):
    """Constrained pair-space polish: stuck entries get exactly zero update."""
    lo_u, hi_u = cfg.clip_interval[0] / _U, cfg.clip_interval[1] / _U
    f1p, f1m = ~defects.layer1_stuck[0::2], ~defects.layer1_stuck[1::2]
    f2p, f2m = ~defects.layer2_stuck[0::2], ~defects.layer2_stuck[1::2]
    # Targets and step size follow the range normalization so the polish
    # starts at equilibrium instead of undoing the scale.
    T = _targets(y, topo.n_outputs, cfg.target_level * beta)
    lr = cfg.learning_rate / beta ** 2 if beta > 0 else cfg.learning_rate
    base_epoch = len(curve)
    for epoch in range(cfg.finetune_epochs):
        loss, Y, d1, d2 = _grads(p1 - m1, p2 - m2, Xe, T, topo)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss in fine-tune epoch {epoch}")
        curve.append((base_epoch + epoch, loss, float((Y.argmax(1) == y).mean())))
        p1 = np.clip(p1 - lr * d1 * f1p, lo_u, hi_u)
        m1 = np.clip(m1 + lr * d1 * f1m, lo_u, hi_u)
        p2 = np.clip(p2 - lr * d2 * f2p, lo_u, hi_u)
        m2 = np.clip(m2 + lr * d2 * f2m, lo_u, hi_u)
    return p1, m1, p2, m2


def train_single_layer(patterns, cfg: TrainingConfig) -> tuple:
    """Single-layer argmax baseline (16+bias -> 4); returns (weights, best fidelity).

    Used for the capacity comparison against the MLP; on a non-separable set
    its best training fidelity stays below 100%.
    """
    cfg.validate()
    topo = DEFAULT_TOPOLOGY
    Xe = encode_batch(pixel_matrix(patterns), topo)
    y = label_vector(patterns)
    T = _targets(y, topo.n_outputs, cfg.target_level)
    limit_u = cfg.weight_limit / _U
    rng = stream(cfg.seed, "training-init", "single-layer")
    w = rng.uniform(-cfg.init_scale / _U, cfg.init_scale / _U,
                    (topo.n_outputs, topo.n_inputs + 1))
    best = 0.0
    for _ in range(cfg.epochs):
        Y = Xe @ w.T
        best = max(best, float((Y.argmax(1) == y).mean()))
        dY = 2.0 * (Y - T) / T.size
        w = np.clip(w - cfg.learning_rate * (dY.T @ Xe), -limit_u, limit_u)
    best = max(best, float(((Xe @ w.T).argmax(1) == y).mean()))
    return w * _U, best


# --- In-situ Manhattan-rule training ----------------------------------------

@dataclass
class ManhattanConfig:
    amplitude: float = 1.3            # volts, fixed for every update pulse
    pulse_width: float = 500e-6
    bias_scheme: str = "V_half"
    epochs: int = 400
    target_level: float = 1.0
    tail_fraction: float = 0.25       # window for the reported final fidelity

    def validate(self):
        if self.amplitude <= 0:
            raise ConfigurationError("pulse amplitude must be positive")
        if self.epochs < 1:
            raise ConfigurationError("need at least one epoch")
        return self


@dataclass
class ManhattanResult:
    error_curve: list                  # per-epoch training error rate
    final_fidelity: float              # mean fidelity over the tail window
    last_fidelity: float               # fidelity of the end state
    disturb_risk_count: int            # devices switchable at half-select bias


def _read_weights(xbar: Crossbar) -> np.ndarray:
    g = xbar.conductances()
    return g[0::2] - g[1::2]


def _half_select_risk(xbar: Crossbar, amplitude: float) -> int:
    half = amplitude / 2.0
    count = 0
    for row in xbar.devices:
        for dev in row:
            if dev.set_threshold < half or -dev.reset_threshold < half:
                count += 1
    return count


def train_in_situ_manhattan(xb1: Crossbar, xb2: Crossbar, patterns,
                            cfg: ManhattanConfig) -> ManhattanResult:
    """Hardware-in-the-loop training with fixed-amplitude update pulses.

    Each epoch: run inference for the whole batch on the simulated hardware,
    compute update signs by backpropagation on the read-back conductances,
    then pulse every device once, one crossbar row at a time in two steps
    (positive polarity first, then negative) under half-select biasing.
    Classes are restricted to the labels present in the dataset.
    """
    cfg.validate()
    topo = DEFAULT_TOPOLOGY
    if xb1.rows != 2 * topo.n_hidden or xb1.cols != topo.n_inputs + 1:
        raise ConfigurationError("first crossbar does not match the topology")
    if xb2.rows != 2 * topo.n_outputs or xb2.cols != topo.n_hidden + 1:
        raise ConfigurationError("second crossbar does not match the topology")
    Xe = encode_batch(pixel_matrix(patterns), topo)
    y = label_vector(patterns)
    class_idx = sorted(set(int(v) for v in y))
    y_local = np.array([class_idx.index(v) for v in y])
    T = _targets(y_local, len(class_idx), cfg.target_level)

    disturb = _half_select_risk(xb1, cfg.amplitude) + _half_select_risk(xb2, cfg.amplitude)
    errors = []
    fids = []

    # Gradients run over the full 4-output head with error only on the
    # classes in play; unused outputs see zero error and get zero pulses.
    def masked_grads():
        u1 = _read_weights(xb1) / _U
        u2 = _read_weights(xb2) / _U
        A = Xe @ u1.T
        tanh_a = np.tanh(A)
        H = topo.hidden_saturation * tanh_a
        Ha = np.hstack([H, np.full((len(H), 1), topo.bias_level)])
        Y = Ha @ u2.T
        dY = np.zeros_like(Y)
        dY[:, class_idx] = 2.0 * (Y[:, class_idx] - T) / T.size
        d2 = dY.T @ Ha
        dH = dY @ u2[:, :-1]
        d1 = (dH * topo.hidden_saturation * (1.0 - tanh_a ** 2)).T @ Xe
        pred = Y[:, class_idx].argmax(1)
        return d1, d2, float((pred == y_local).mean())

    for _ in range(cfg.epochs):
        d1, d2, fid = masked_grads()
        errors.append(1.0 - fid)
        fids.append(fid)
        for xbar, grad in ((xb1, d1), (xb2, d2)):
            signs = -np.sign(grad)
            for r in range(xbar.rows):
                neuron = r // 2
                row_signs = signs[neuron] if r % 2 == 0 else -signs[neuron]
                devices = xbar.devices[r]
                # Two-step parallel row update: all increases, then decreases.
                for c in np.nonzero(row_signs > 0)[0]:
                    devices[c].apply_pulse(cfg.amplitude, cfg.pulse_width)
                for c in np.nonzero(row_signs < 0)[0]:
                    devices[c].apply_pulse(-cfg.amplitude, cfg.pulse_width)

    _, _, fid = masked_grads()
    fids.append(fid)
    tail = max(1, int(round(cfg.tail_fraction * len(fids))))
    return ManhattanResult(error_curve=errors,
                           final_fidelity=float(np.mean(fids[-tail:])),
                           last_fidelity=fid,
                           disturb_risk_count=disturb)


def save_curve(curve, path):
    """Training curve as CSV: epoch, mse, fidelity."""
    with open(path, "w") as fh:
        fh.write("epoch,mse,fidelity\n")
        for epoch, mse, fid in curve:
            fh.write(f"{epoch},{mse:.9g},{fid:.9g}\n")
