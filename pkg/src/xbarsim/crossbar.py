"""Passive crossbar circuit: device grid, biasing, readout, and line parasitics.

Geometry convention: input voltages drive the columns, output currents are
collected on the rows, which sit at virtual ground.  In the wire-resistive
model each line is a ladder of per-segment resistances R_w; columns are
driven at their row-0 end and rows are terminated into virtual ground past
their last column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .device import DeviceVariationSpec, MemristorDevice, sample_device
from .errors import ConfigurationError
from .rng import stream

LINE_MODELS = ("ideal", "wire_resistive")

# Wire-resistive nodal solves get quadratically expensive; beyond this size
# use the resistor-ladder abstraction instead.
MAX_NODAL_DIM = 64


@dataclass
class BiasScheme:
    """Write biasing scheme: 'V_half' or 'V_third' with write voltage V_w.

    V_half drives selected lines at +/-V_w/2 and grounds the rest, exposing
    half-selected cells to V_w/2.  V_third drives the remaining lines at
    +/-V_w/6, bounding every non-selected cell at V_w/3.
    """

    scheme: str = "V_third"
    write_voltage: float = 2.1

    def __post_init__(self):
        if self.scheme not in ("V_half", "V_third"):
            raise ConfigurationError(f"unknown bias scheme {self.scheme!r}")

    def half_select_fraction(self) -> float:
        return 0.5 if self.scheme == "V_half" else 1.0 / 3.0


@dataclass
class Crossbar:
    rows: int
    cols: int
    devices: list
    wire_segment_resistance: float = 0.0
    line_model: str = "ideal"

    def device(self, row: int, col: int) -> MemristorDevice:
        self._check_index(row, col)
        return self.devices[row][col]

    def _check_index(self, row: int, col: int):
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"({row}, {col}) outside {self.rows}x{self.cols} crossbar")

    def conductances(self) -> np.ndarray:
        """Effective low-voltage conductance of every cell, shape (rows, cols)."""
        out = np.empty((self.rows, self.cols))
        for r in range(self.rows):
            row = self.devices[r]
            for c in range(self.cols):
                out[r, c] = row[c].effective_conductance()
        return out

    def set_conductances(self, grid: np.ndarray, respect_stuck: bool = True):
        """Directly overwrite device states (snapshot restore / test setup)."""
        grid = np.asarray(grid, dtype=float)
        if grid.shape != (self.rows, self.cols):
            raise ConfigurationError(f"grid shape {grid.shape} != ({self.rows}, {self.cols})")
        for r in range(self.rows):
            for c in range(self.cols):
                dev = self.devices[r][c]
                if respect_stuck and dev.stuck:
                    continue
                dev.conductance = min(max(float(grid[r, c]), dev.g_min), dev.g_max)

    def stuck_map(self) -> np.ndarray:
        return np.array([[d.stuck for d in row] for row in self.devices], dtype=bool)


def build_crossbar(rows: int, cols: int, spec: DeviceVariationSpec, R_w: float = 0.0,
                   seed: int = 0, pristine: bool = False,
                   line_model: str = "ideal") -> Crossbar:
    """Populate a rows x cols grid with independently sampled devices.

    Every cell gets its own derived seed, so the grid is reproducible and
    insensitive to sampling order.
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError("crossbar dimensions must be >= 1")
    if R_w < 0:
        raise ConfigurationError("wire segment resistance must be >= 0")
    if line_model not in LINE_MODELS:
        raise ConfigurationError(f"unknown line model {line_model!r}")
    spec.validate()
    devices = [
        [sample_device(spec, stream(seed, "cell", r, c), pristine=pristine)
         for c in range(cols)]
        for r in range(rows)
    ]
    return Crossbar(rows=rows, cols=cols, devices=devices,
                    wire_segment_resistance=R_w, line_model=line_model)


def vmm_ideal(xbar: Crossbar, column_voltages) -> np.ndarray:
    """Row currents with ideal lines: I_row = sum_col V_col * G[row, col]."""
    v = np.asarray(column_voltages, dtype=float)
    if v.shape != (xbar.cols,):
        raise ValueError(f"expected {xbar.cols} column voltages, got shape {v.shape}")
    return xbar.conductances() @ v


def vmm(xbar: Crossbar, column_voltages) -> np.ndarray:
    """Row currents under the crossbar's configured line model."""
    if xbar.line_model == "wire_resistive" and xbar.wire_segment_resistance > 0:
        return vmm_wire_resistive(xbar, column_voltages)
    return vmm_ideal(xbar, column_voltages)


def vmm_wire_resistive(xbar: Crossbar, column_voltages) -> np.ndarray:
    """Row currents from the full nodal solve with per-segment resistance R_w.

    Each line is a resistor ladder; every crosspoint couples its column node
    to its row node through the device conductance.  Columns are driven at
    the row-0 periphery, rows terminate into virtual ground after the last
    column.  R_w = 0 reduces exactly to the ideal product.
    """
    v = np.asarray(column_voltages, dtype=float)
    if v.shape != (xbar.cols,):
        raise ValueError(f"expected {xbar.cols} column voltages, got shape {v.shape}")
    r_w = xbar.wire_segment_resistance
    if r_w == 0.0:
        return vmm_ideal(xbar, v)
    if max(xbar.rows, xbar.cols) > MAX_NODAL_DIM:
        raise ConfigurationError(
            f"wire-resistive solve capped at {MAX_NODAL_DIM}x{MAX_NODAL_DIM}; "
            "use ladder_worst_case_drop for scaling analysis")

    rows, cols = xbar.rows, xbar.cols
    g_w = 1.0 / r_w
    g_dev = xbar.conductances()
    n = rows * cols
    col_node = lambda r, c: r * cols + c
    row_node = lambda r, c: n + r * cols + c

    data, ii, jj = [], [], []
    rhs = np.zeros(2 * n)

    def stamp(a, b, g):
        # Conductance g between nodes a and b (b = -1 means a fixed rail,
        # handled by the caller via the rhs).
        data.append(g); ii.append(a); jj.append(a)
        if b >= 0:
            data.append(g); ii.append(b); jj.append(b)
            data.append(-g); ii.append(a); jj.append(b)
            data.append(-g); ii.append(b); jj.append(a)

    for r in range(rows):
        for c in range(cols):
            cn, rn = col_node(r, c), row_node(r, c)
            stamp(cn, rn, g_dev[r, c])
            if r == 0:
                stamp(cn, -1, g_w)          # drive periphery
                rhs[cn] += g_w * v[c]
            if r < rows - 1:
                stamp(cn, col_node(r + 1, c), g_w)
            if c < cols - 1:
                stamp(rn, row_node(r, c + 1), g_w)
            else:
                stamp(rn, -1, g_w)          # virtual-ground periphery

    mat = scipy.sparse.coo_matrix((data, (ii, jj)), shape=(2 * n, 2 * n)).tocsc()
    sol = scipy.sparse.linalg.spsolve(mat, rhs)
    last = np.array([sol[row_node(r, cols - 1)] for r in range(rows)])
    return last * g_w


def device_voltage_map(xbar: Crossbar, sel_row: int, sel_col: int,
                       bias: BiasScheme) -> np.ndarray:
    """Voltage magnitude across every cell during a write, ideal lines.

    Selected cell sees V_w; half-selected cells (sharing the selected row or
    column) see V_w/2 or V_w/3 per scheme; unselected cells see 0 (V_half)
    or the worst-case V_w/3 (V_third).
    """
    xbar._check_index(sel_row, sel_col)
    v_w = bias.write_voltage
    half = v_w * bias.half_select_fraction()
    unsel = 0.0 if bias.scheme == "V_half" else v_w / 3.0
    out = np.full((xbar.rows, xbar.cols), unsel)
    out[sel_row, :] = half
    out[:, sel_col] = half
    out[sel_row, sel_col] = v_w
    return out


def ladder_worst_case_drop(n_segments: int, R_w: float, G: float) -> float:
    """Relative voltage drop (V - V_far)/V along a loaded resistor ladder.

    The ladder has n series segments of R_w; after each segment the node is
    loaded by conductance G to ground.  This is the worst-case line model
    for a fully loaded crossbar row or column.
    """
    if n_segments < 1:
        raise ConfigurationError("ladder needs at least one segment")
    if R_w < 0 or G < 0:
        raise ConfigurationError("R_w and G must be non-negative")
    if R_w == 0.0 or G == 0.0:
        return 0.0
    # Impedance looking into node k (its own load in parallel with the rest),
    # computed from the far end, then cascade the voltage dividers.
    z = 1.0 / G
    impedances = [z]
    for _ in range(n_segments - 1):
        downstream = R_w + impedances[-1]
        z = downstream / (1.0 + G * downstream)
        impedances.append(z)
    ratio = 1.0
    for z in reversed(impedances):
        ratio *= z / (R_w + z)
    return 1.0 - ratio


def write_drop_budget(v_th_min: float, v_th_max: float, scheme: str) -> float:
    """Largest allowable relative line drop before a write becomes unsafe.

    V_third budget: (3*v_th_min - v_th_max)/v_th_max/2, the factor 2 covering
    the drop on both selected lines.  V_half budget: (2*v_th_min - v_th_max)/
    v_th_max.
    """
    if scheme == "V_third":
        return (3.0 * v_th_min - v_th_max) / v_th_max / 2.0
    if scheme == "V_half":
        return (2.0 * v_th_min - v_th_max) / v_th_max
    raise ConfigurationError(f"unknown bias scheme {scheme!r}")


def max_crossbar_dimension(v_th_min: float, v_th_max: float, G_at_third: float,
                           R_w: float, bias: BiasScheme, n_cap: int = 100000) -> int:
    """Largest square dimension whose worst-case write drop stays in budget.

    Returns 0 when no safe write window exists (budget <= 0).
    """
    budget = write_drop_budget(abs(v_th_min), abs(v_th_max), bias.scheme)
    if budget <= 0.0:
        return 0
    if ladder_worst_case_drop(1, R_w, G_at_third) > budget:
        return 0
    lo, hi = 1, 2
    while hi <= n_cap and ladder_worst_case_drop(hi, R_w, G_at_third) <= budget:
        lo, hi = hi, hi * 2
    hi = min(hi, n_cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ladder_worst_case_drop(mid, R_w, G_at_third) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


# --- Grid and state file formats -------------------------------------------

def export_grid(grid: np.ndarray, path):
    """Write a float grid as CSV: one crossbar row per line, 9 significant
    digits, '.' decimal separator, no header."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    with open(path, "w") as fh:
        for row in grid:
            fh.write(",".join(f"{x:.9g}" for x in row) + "\n")


def import_grid(path) -> np.ndarray:
    """Read a grid written by export_grid."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ConfigurationError(f"empty grid file {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigurationError(f"ragged grid file {path}")
    return np.array(rows, dtype=float)


def save_state(xbar: Crossbar, path):
    """Snapshot the full crossbar (all device fields) as deterministic JSON."""
    payload = {
        "rows": xbar.rows,
        "cols": xbar.cols,
        "wire_segment_resistance": xbar.wire_segment_resistance,
        "line_model": xbar.line_model,
        "devices": [[asdict(d) for d in row] for row in xbar.devices],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_state(path) -> Crossbar:
    with open(path) as fh:
        payload = json.load(fh)
    devices = [[MemristorDevice(**d) for d in row] for row in payload["devices"]]
    return Crossbar(rows=payload["rows"], cols=payload["cols"], devices=devices,
                    wire_segment_resistance=payload["wire_segment_resistance"],
                    line_model=payload["line_model"])
