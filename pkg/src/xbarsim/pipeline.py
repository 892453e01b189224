"""End-to-end experiment composition: form -> train -> import -> infer.

These helpers wire the per-module operations into the two ex-situ flows
(hardware-oblivious and hardware-aware) and collect the artifacts the
experiment runner writes out.  All randomness derives from one root seed
through named sub-streams, so a seed fully determines every output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .benchmark import (canonical_training_set, generate_test_set,
                        label_vector, pixel_matrix)
from .crossbar import Crossbar, build_crossbar
from .device import DeviceVariationSpec
from .forming import FormingSpec, form_all
from .mlp import DEFAULT_TOPOLOGY, ConductancePairMap, MlpNetwork, infer
from .rng import seed_sequence
from .training import (DefectMap, TrainingConfig, TrainingOutcome,
                       forward_batch, train_ex_situ)
from .tuning import TuningSpec, import_with_refinement

# The in-situ experiment runs on freshly formed (low-conductance) arrays in
# the coarse-update regime: fixed-amplitude pulses move a device by a large,
# device-dependent step, which is what limits the achievable fidelity.
INSITU_DEVICE_SPEC = DeviceVariationSpec(
    g_init_range=(2e-6, 3.5e-6),
    kinetics_rate_range=(0.04e-6, 0.28e-6),
)


def derive_seed(root_seed: int, *labels) -> int:
    """A 32-bit child seed for the addressed sub-stream."""
    return int(seed_sequence(root_seed, *labels).generate_state(1)[0])


def build_network_crossbars(seed: int, device_spec: DeviceVariationSpec,
                            R_w: float = 0.0, pristine: bool = True):
    """The two arrays backing the 16-10-4 network: 20x17 and 8x11 grids."""
    topo = DEFAULT_TOPOLOGY
    xb1 = build_crossbar(2 * topo.n_hidden, topo.n_inputs + 1, device_spec,
                         R_w=R_w, seed=derive_seed(seed, "device", 1),
                         pristine=pristine)
    xb2 = build_crossbar(2 * topo.n_outputs, topo.n_hidden + 1, device_spec,
                         R_w=R_w, seed=derive_seed(seed, "device", 2),
                         pristine=pristine)
    return xb1, xb2


def form_network(xb1: Crossbar, xb2: Crossbar, forming_spec: FormingSpec):
    """Form every cell of both arrays; returns the two forming reports."""
    r1 = form_all(xb1, [(r, c) for r in range(xb1.rows) for c in range(xb1.cols)],
                  forming_spec)
    r2 = form_all(xb2, [(r, c) for r in range(xb2.rows) for c in range(xb2.cols)],
                  forming_spec)
    return r1, r2


def import_network(xb1: Crossbar, xb2: Crossbar, outcome: TrainingOutcome,
                   tuning_spec: TuningSpec, refine_passes: int = 2):
    """Tune both arrays to the trained pair maps; returns the error grids."""
    map1, map2 = outcome.pair_maps
    e1 = import_with_refinement(xb1, map1.to_grid(), tuning_spec, refine_passes)
    e2 = import_with_refinement(xb2, map2.to_grid(), tuning_spec, refine_passes)
    return e1, e2


def read_back_network(xb1: Crossbar, xb2: Crossbar) -> MlpNetwork:
    """Snapshot the crossbars into pair maps (the software view of the chip)."""
    return MlpNetwork(ConductancePairMap.from_grid(xb1.conductances(), layer=1),
                      ConductancePairMap.from_grid(xb2.conductances(), layer=2))


def hardware_fidelity(xb1: Crossbar, xb2: Crossbar, patterns) -> float:
    """Classification fidelity of the crossbar state (ideal-line readout)."""
    net = read_back_network(xb1, xb2)
    w1 = net.layer1.plus - net.layer1.minus
    w2 = net.layer2.plus - net.layer2.minus
    Y = forward_batch(w1, w2, pixel_matrix(patterns))
    return float((Y.argmax(1) == label_vector(patterns)).mean())


@dataclass
class PipelineResult:
    aware: bool
    software_train_fidelity: float
    software_test_fidelity: float
    hardware_train_fidelity: float
    hardware_test_fidelity: float
    defective_fraction: float
    import_error_max: float
    outcome: TrainingOutcome = field(repr=False, default=None)
    crossbars: tuple = field(repr=False, default=None)
    import_errors: tuple = field(repr=False, default=None)
    forming_reports: tuple = field(repr=False, default=None)


def run_ex_situ_pipeline(seed: int, aware: bool,
                         device_spec: DeviceVariationSpec | None = None,
                         forming_spec: FormingSpec | None = None,
                         training_cfg: TrainingConfig | None = None,
                         tuning_spec: TuningSpec | None = None,
                         refine_passes: int = 2,
                         patterns=None, test_patterns=None) -> PipelineResult:
    """The full ex-situ experiment for one seed.

    Forms two pristine arrays, trains the software network (with the defect
    map when ``aware``), imports the weights at the configured tolerance and
    evaluates train/test fidelity on the resulting hardware state.
    """
    device_spec = device_spec or DeviceVariationSpec()
    forming_spec = forming_spec or FormingSpec()
    training_cfg = training_cfg or TrainingConfig(seed=derive_seed(seed, "training-init"))
    tuning_spec = tuning_spec or TuningSpec(tolerance=0.30)
    patterns = patterns or canonical_training_set()
    test_patterns = test_patterns or generate_test_set(patterns)

    xb1, xb2 = build_network_crossbars(seed, device_spec, pristine=True)
    rep1, rep2 = form_network(xb1, xb2, forming_spec)
    n_cells = xb1.rows * xb1.cols + xb2.rows * xb2.cols
    defective = (rep1["defective_count"] + rep2["defective_count"]) / n_cells

    defects = DefectMap.from_crossbars(xb1, xb2) if aware else None
    outcome = train_ex_situ(patterns, training_cfg, defects=defects)
    w1, w2 = outcome.weights
    Xtr, ytr = pixel_matrix(patterns), label_vector(patterns)
    Xte, yte = pixel_matrix(test_patterns), label_vector(test_patterns)
    sw_train = float((forward_batch(w1, w2, Xtr).argmax(1) == ytr).mean())
    sw_test = float((forward_batch(w1, w2, Xte).argmax(1) == yte).mean())

    e1, e2 = import_network(xb1, xb2, outcome, tuning_spec, refine_passes)
    not_stuck1, not_stuck2 = ~xb1.stuck_map(), ~xb2.stuck_map()
    err_max = max(e1[not_stuck1].max() if not_stuck1.any() else 0.0,
                  e2[not_stuck2].max() if not_stuck2.any() else 0.0)

    return PipelineResult(
        aware=aware,
        software_train_fidelity=sw_train,
        software_test_fidelity=sw_test,
        hardware_train_fidelity=hardware_fidelity(xb1, xb2, patterns),
        hardware_test_fidelity=hardware_fidelity(xb1, xb2, test_patterns),
        defective_fraction=defective,
        import_error_max=float(err_max),
        outcome=outcome,
        crossbars=(xb1, xb2),
        import_errors=(e1, e2),
        forming_reports=(rep1, rep2),
    )
