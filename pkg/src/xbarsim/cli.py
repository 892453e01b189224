"""Experiment runner: every pipeline stage as a subcommand.

    xbarsim form   --config cfg.json --out out/
    xbarsim tune   --config cfg.json --out out/ --targets map.csv
    xbarsim train  --config cfg.json --out out/ --mode ex-situ-aware
    xbarsim infer  --config cfg.json --out out/ --network out/ --patterns p.txt
    xbarsim sweep  --config cfg.json --out out/ --weights out/
    xbarsim scale  --config cfg.json --out out/

Exit codes: 0 success, 2 configuration/input error, 3 divergence or
non-convergence.  Identical config and seed reproduce byte-identical
artifacts; configuration is validated before anything is written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .benchmark import (canonical_training_set, generate_test_set, load_patterns,
                        precision_sweep, save_patterns)
from .config import ExperimentConfig, load_config, write_default_config
from .crossbar import (BiasScheme, build_crossbar, export_grid, import_grid,
                       ladder_worst_case_drop, load_state, max_crossbar_dimension,
                       save_state, write_drop_budget)
from .errors import ConfigurationError, DivergenceError
from .forming import form_all, save_report
from .mlp import ConductancePairMap, MlpNetwork, infer
from .pipeline import (build_network_crossbars, derive_seed, run_ex_situ_pipeline)
from .training import (ManhattanConfig, pairs_to_weights, save_curve,
                       train_in_situ_manhattan, train_single_layer, forward_batch)
from .tuning import error_histogram, import_conductance_map, save_histogram
from .benchmark import label_vector, pixel_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3


def _write_json(payload: dict, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_form(cfg: ExperimentConfig, out: str) -> int:
    xbar = build_crossbar(cfg.rows, cfg.cols, cfg.device,
                          R_w=cfg.wire_segment_resistance,
                          seed=derive_seed(cfg.seed, "device", "form"),
                          pristine=True, line_model=cfg.line_model)
    targets = [(r, c) for r in range(cfg.rows) for c in range(cfg.cols)]
    report = form_all(xbar, targets, cfg.forming)
    os.makedirs(out, exist_ok=True)
    save_report(report, os.path.join(out, "forming_report.json"))
    save_state(xbar, os.path.join(out, "crossbar_state.json"))
    print(f"formed {len(targets)} cells: {report['defective_count']} defective "
          f"({report['defective_fraction']:.3%})")
    return EXIT_OK


def cmd_tune(cfg: ExperimentConfig, out: str, targets_path: str) -> int:
    state_path = os.path.join(out, "crossbar_state.json")
    if not os.path.exists(state_path):
        raise ConfigurationError(f"no crossbar snapshot at {state_path}; run 'form' first")
    xbar = load_state(state_path)
    targets = import_grid(targets_path)
    errors = import_conductance_map(xbar, targets, cfg.tuning, skip_stuck=True)
    export_grid(errors, os.path.join(out, "error_grid.csv"))
    save_histogram(error_histogram(errors), os.path.join(out, "error_histogram.json"))
    save_state(xbar, state_path)
    not_stuck = ~xbar.stuck_map()
    failed = int((errors[not_stuck] > cfg.tuning.tolerance + 1e-12).sum())
    print(f"tuned {int(not_stuck.sum())} cells; max error "
          f"{errors[not_stuck].max():.4f}; {failed} above tolerance")
    return EXIT_NONCONVERGED if failed else EXIT_OK


def _write_pair_maps(outcome, out):
    map1, map2 = outcome.pair_maps
    export_grid(map1.to_grid(), os.path.join(out, "layer1_pairs.csv"))
    export_grid(map2.to_grid(), os.path.join(out, "layer2_pairs.csv"))


def cmd_train(cfg: ExperimentConfig, out: str, mode: str) -> int:
    os.makedirs(out, exist_ok=True)
    if mode in ("ex-situ-oblivious", "ex-situ-aware"):
        result = run_ex_situ_pipeline(
            cfg.seed, aware=(mode == "ex-situ-aware"),
            device_spec=cfg.device, forming_spec=cfg.forming,
            training_cfg=cfg.training, tuning_spec=cfg.tuning,
            refine_passes=cfg.refine_passes)
        _write_pair_maps(result.outcome, out)
        save_curve(result.outcome.curve, os.path.join(out, "training_curve.csv"))
        xb1, xb2 = result.crossbars
        save_state(xb1, os.path.join(out, "crossbar1_state.json"))
        save_state(xb2, os.path.join(out, "crossbar2_state.json"))
        e1, e2 = result.import_errors
        export_grid(e1, os.path.join(out, "import_error_layer1.csv"))
        export_grid(e2, os.path.join(out, "import_error_layer2.csv"))
        save_report(result.forming_reports[0], os.path.join(out, "forming_report_layer1.json"))
        save_report(result.forming_reports[1], os.path.join(out, "forming_report_layer2.json"))
        _write_json({
            "mode": mode,
            "software_train_fidelity": result.software_train_fidelity,
            "software_test_fidelity": result.software_test_fidelity,
            "hardware_train_fidelity": result.hardware_train_fidelity,
            "hardware_test_fidelity": result.hardware_test_fidelity,
            "defective_fraction": result.defective_fraction,
            "import_error_max": result.import_error_max,
        }, os.path.join(out, "fidelity.json"))
        print(f"{mode}: software {result.software_train_fidelity:.3f}/"
              f"{result.software_test_fidelity:.3f}  hardware "
              f"{result.hardware_train_fidelity:.3f}/{result.hardware_test_fidelity:.3f}")
        return EXIT_OK

    if mode == "in-situ":
        patterns = [p for p in canonical_training_set()
                    if p.label in set(cfg.manhattan_classes)]
        if not patterns:
            raise ConfigurationError(f"no patterns for classes {cfg.manhattan_classes!r}")
        xb1, xb2 = build_network_crossbars(cfg.seed, cfg.insitu_device, pristine=False)
        result = train_in_situ_manhattan(xb1, xb2, patterns, cfg.manhattan)
        with open(os.path.join(out, "insitu_error_curve.csv"), "w") as fh:
            fh.write("epoch,error\n")
            for epoch, err in enumerate(result.error_curve):
                fh.write(f"{epoch},{err:.9g}\n")
        save_state(xb1, os.path.join(out, "crossbar1_state.json"))
        save_state(xb2, os.path.join(out, "crossbar2_state.json"))
        _write_json({
            "mode": mode,
            "classes": cfg.manhattan_classes,
            "final_fidelity": result.final_fidelity,
            "last_fidelity": result.last_fidelity,
            "disturb_risk_count": result.disturb_risk_count,
        }, os.path.join(out, "fidelity.json"))
        print(f"in-situ: final fidelity {result.final_fidelity:.3f} "
              f"(last state {result.last_fidelity:.3f})")
        return EXIT_OK

    raise ConfigurationError(f"unknown training mode {mode!r}")


def _load_network(artifact_dir: str) -> MlpNetwork:
    s1 = os.path.join(artifact_dir, "crossbar1_state.json")
    s2 = os.path.join(artifact_dir, "crossbar2_state.json")
    if os.path.exists(s1) and os.path.exists(s2):
        return MlpNetwork(load_state(s1), load_state(s2))
    p1 = os.path.join(artifact_dir, "layer1_pairs.csv")
    p2 = os.path.join(artifact_dir, "layer2_pairs.csv")
    if os.path.exists(p1) and os.path.exists(p2):
        return MlpNetwork(ConductancePairMap.from_grid(import_grid(p1), layer=1),
                          ConductancePairMap.from_grid(import_grid(p2), layer=2))
    raise ConfigurationError(
        f"{artifact_dir} holds neither crossbar snapshots nor pair-map CSVs")


def cmd_infer(cfg: ExperimentConfig, out: str, network_dir: str,
              patterns_path: str) -> int:
    net = _load_network(network_dir)
    patterns = load_patterns(patterns_path)
    os.makedirs(out, exist_ok=True)
    correct = 0
    with open(os.path.join(out, "outputs.csv"), "w") as fh:
        fh.write("pattern,v_out_0,v_out_1,v_out_2,v_out_3,predicted,label\n")
        for idx, pattern in enumerate(patterns):
            cls, volts = infer(net, pattern.pixels)
            correct += cls == pattern.label_index
            volts_txt = ",".join(f"{v:.9g}" for v in volts)
            fh.write(f"{idx},{volts_txt},{cls},{pattern.label_index}\n")
    fidelity = correct / len(patterns)
    _write_json({"patterns": len(patterns), "fidelity": fidelity},
                os.path.join(out, "inference_summary.json"))
    print(f"inference: {correct}/{len(patterns)} correct ({fidelity:.3%})")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out: str, weights_dir: str) -> int:
    p1 = os.path.join(weights_dir, "layer1_pairs.csv")
    p2 = os.path.join(weights_dir, "layer2_pairs.csv")
    if not (os.path.exists(p1) and os.path.exists(p2)):
        raise ConfigurationError(f"no trained pair maps under {weights_dir}; run 'train' first")
    w1 = pairs_to_weights(ConductancePairMap.from_grid(import_grid(p1)))
    w2 = pairs_to_weights(ConductancePairMap.from_grid(import_grid(p2)))
    stats = precision_sweep((w1, w2), cfg.noise_sigmas, runs=cfg.sweep_runs,
                            seed=derive_seed(cfg.seed, "noise"))
    os.makedirs(out, exist_ok=True)
    stats["train"].save_csv(os.path.join(out, "train_sweep.csv"))
    stats["test"].save_csv(os.path.join(out, "test_sweep.csv"))

    patterns = canonical_training_set()
    _, single_best = train_single_layer(patterns, cfg.training)
    mlp_fid = float((forward_batch(w1, w2, pixel_matrix(patterns)).argmax(1)
                     == label_vector(patterns)).mean())
    with open(os.path.join(out, "model_comparison.csv"), "w") as fh:
        fh.write("model,best_train_fidelity\n")
        fh.write(f"single-layer,{single_best:.9g}\n")
        fh.write(f"mlp-10-hidden,{mlp_fid:.9g}\n")
    print(f"sweep done over {len(cfg.noise_sigmas)} noise levels x {cfg.sweep_runs} runs; "
          f"single-layer best {single_best:.3f} vs MLP {mlp_fid:.3f}")
    return EXIT_OK


def cmd_scale(cfg: ExperimentConfig, out: str) -> int:
    sc = cfg.scale
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "ladder_drops.csv"), "w") as fh:
        fh.write("preset,conductance_S,n,relative_drop\n")
        for name, r_w in sorted(sc.wire_presets.items()):
            for g in sorted({*sc.g_v_third.values(), *sc.g_v_half.values()}):
                for n in sc.ladder_lengths:
                    drop = ladder_worst_case_drop(n, r_w, g)
                    fh.write(f"{name},{g:.9g},{n},{drop:.9g}\n")

    rows = []
    for name, r_w in sorted(sc.wire_presets.items()):
        for scheme, g_map in (("V_third", sc.g_v_third), ("V_half", sc.g_v_half)):
            for transition, window in (("set", sc.set_window), ("reset", sc.reset_window)):
                v_min, v_max = abs(window[0]), abs(window[1])
                budget = write_drop_budget(v_min, v_max, scheme)
                bias = BiasScheme(scheme, 2 * v_min if scheme == "V_half" else 3 * v_min)
                n_max = max_crossbar_dimension(v_min, v_max, g_map[transition], r_w, bias)
                note = "" if budget > 0 else "no safe write window"
                rows.append((name, scheme, transition, budget, n_max, note))
    with open(os.path.join(out, "max_dimensions.csv"), "w") as fh:
        fh.write("preset,scheme,transition,drop_budget,n_max,note\n")
        for name, scheme, transition, budget, n_max, note in rows:
            fh.write(f"{name},{scheme},{transition},{budget:.9g},{n_max},{note}\n")
    for name, scheme, transition, budget, n_max, note in rows:
        print(f"{name:16s} {scheme:8s} {transition:6s} budget {budget:7.2%}  n_max {n_max}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xbarsim",
        description="Memristive crossbar classifier experiments")
    parser.add_argument("--config", default=None, help="experiment config JSON")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("form", help="electroform a pristine crossbar")
    tune = sub.add_parser("tune", help="write-and-verify a conductance map")
    tune.add_argument("--targets", required=True, help="target conductance grid CSV")
    train = sub.add_parser("train", help="train the classifier")
    train.add_argument("--mode", default="ex-situ-oblivious",
                       choices=["ex-situ-oblivious", "ex-situ-aware", "in-situ"])
    inf = sub.add_parser("infer", help="classify a pattern file")
    inf.add_argument("--network", required=True,
                     help="directory with crossbar snapshots or pair-map CSVs")
    inf.add_argument("--patterns", required=True, help="pattern file")
    sweep = sub.add_parser("sweep", help="weight-precision Monte Carlo")
    sweep.add_argument("--weights", required=True, help="directory with trained pair maps")
    sub.add_parser("scale", help="crossbar scaling analysis")
    init = sub.add_parser("init-config", help="write the default config")
    init.add_argument("--path", default="xbarsim.json")
    export = sub.add_parser("export-patterns", help="write the benchmark pattern files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init-config":
            write_default_config(args.path)
            print(f"wrote {args.path}")
            return EXIT_OK
        cfg = load_config(args.config, seed_override=args.seed)
        if args.command == "form":
            return cmd_form(cfg, args.out)
        if args.command == "tune":
            return cmd_tune(cfg, args.out, args.targets)
        if args.command == "train":
            return cmd_train(cfg, args.out, args.mode)
        if args.command == "infer":
            return cmd_infer(cfg, args.out, args.network, args.patterns)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.weights)
        if args.command == "scale":
            return cmd_scale(cfg, args.out)
        if args.command == "export-patterns":
            train_set = canonical_training_set()
            os.makedirs(args.out, exist_ok=True)
            save_patterns(train_set, os.path.join(args.out, "training_patterns.txt"))
            save_patterns(generate_test_set(train_set),
                          os.path.join(args.out, "test_patterns.txt"))
            print(f"wrote pattern files to {args.out}")
            return EXIT_OK
        raise ConfigurationError(f"unknown command {args.command!r}")
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
