"""Behavioral simulator for passive memristive crossbar classifiers.

The package models the full experimental pipeline at desk scale: device
forming, write-and-verify conductance tuning, differential-pair multilayer
perceptron inference, ex-situ (hardware-oblivious and hardware-aware) and
in-situ Manhattan-rule training, and crossbar wiring/scaling analysis.
"""

from .device import DeviceVariationSpec, MemristorDevice, sample_device
from .crossbar import (BiasScheme, Crossbar, build_crossbar, device_voltage_map,
                       export_grid, import_grid, ladder_worst_case_drop,
                       load_state, max_crossbar_dimension, save_state, vmm,
                       vmm_ideal, vmm_wire_resistive, write_drop_budget)
from .forming import FormingOutcome, FormingSpec, form_all, form_device
from .tuning import (TuningResult, TuningSpec, error_histogram,
                     import_conductance_map, import_with_refinement,
                     tune_device, tuning_error)
from .mlp import (ConductancePairMap, MlpNetwork, NetworkTopology, infer,
                  layer_forward, neuron_hidden, neuron_output)
from .training import (DefectMap, ManhattanConfig, ManhattanResult,
                       TrainingConfig, TrainingOutcome, forward_batch,
                       pairs_to_weights, train_ex_situ, train_in_situ_manhattan,
                       train_single_layer, weights_to_pairs)
from .benchmark import (Pattern, SweepStats, canonical_training_set,
                        evaluate_fidelity, generate_test_set,
                        linear_separability_check, load_patterns,
                        precision_sweep, save_patterns)
from .pipeline import (INSITU_DEVICE_SPEC, PipelineResult, derive_seed,
                       hardware_fidelity, run_ex_situ_pipeline)
from .errors import ConfigurationError, DivergenceError

__version__ = "0.1.0"
