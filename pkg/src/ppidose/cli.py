"""Command-line interface.

Subcommands: generate-data, train, finetune, validate-open-loop,
run-closed-loop, baseline, evaluate.  Common flags --seed, --config and
--out-dir work on every subcommand.  Exit code 0 on success; failures
print a single machine-parsable ``error: <Type>: <message>`` line to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import load_config
from .dataset import WindowDataset
from .errors import ConfigurationError, PpidoseError
from .forecast.io import load_weights, save_weights
from .harness import (
    FOUNDATION_COHORT,
    TEST_COHORT,
    _S_BENCH,
    _S_CALIB,
    _S_DATA,
    calibrate_fixed_dose,
    evaluate_rows,
    finetune_patient,
    generate_foundation_dataset,
    load_dataset,
    patient_params,
    patient_streams,
    report_csv,
    report_json,
    result_row,
    run_closed_loop,
    run_open_loop_validation,
    save_dataset,
    trace_csv,
    train_foundation,
)
from .patient import sample_patient


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="root RNG seed")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file (sections sim/meals/bnn/mpc/harness)")
    parser.add_argument("--out-dir", type=Path, default=Path("out"),
                        help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppidose",
        description="Symptom-driven personalized PPI dosing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="simulate patient episodes")
    _common_flags(p)
    p.add_argument("--patients", type=int, default=None)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--cohort", choices=["foundation", "test"], default="foundation")
    p.add_argument("--include-hidden", action="store_true",
                   help="write the hidden acid column into the episode CSVs")

    p = sub.add_parser("train", help="train the foundation forecaster")
    _common_flags(p)
    p.add_argument("--data", type=Path, required=True, help="dataset directory")
    p.add_argument("--weights-out", type=Path, default=None)

    p = sub.add_parser("finetune", help="fine-tune decoder+head on one patient")
    _common_flags(p)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True,
                   help="dataset directory holding that patient's episode")
    p.add_argument("--patient-index", type=int, default=0)
    p.add_argument("--weights-out", type=Path, default=None)

    p = sub.add_parser("validate-open-loop", help="frozen-weights forecast RMSE")
    _common_flags(p)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--patient-index", type=int, default=0)
    p.add_argument("--days", type=int, default=None)

    p = sub.add_parser("run-closed-loop", help="daily MPC (or fixed) dosing run")
    _common_flags(p)
    p.add_argument("--weights", type=Path, default=None)
    p.add_argument("--patient-index", type=int, default=0)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--arm", choices=["mpc", "fixed"], default="mpc")
    p.add_argument("--fixed-dose", type=float, default=None)
    p.add_argument("--initial-dose", type=float, default=None)
    p.add_argument("--include-hidden", action="store_true")

    p = sub.add_parser("baseline", help="calibrate the fixed twice-daily regimen")
    _common_flags(p)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--patients", type=int, default=None)

    p = sub.add_parser("evaluate", help="summarize paired closed-loop reports")
    _common_flags(p)
    p.add_argument("--reports", type=Path, nargs="+", required=True,
                   help="report JSON files from run-closed-loop")
    return parser


def _cmd_generate_data(args, config) -> int:
    n_patients = args.patients if args.patients is not None else (
        config.harness.foundation_patients if args.cohort == "foundation"
        else config.harness.test_patients)
    n_days = args.days if args.days is not None else (
        config.harness.foundation_days if args.cohort == "foundation"
        else config.harness.finetune_days)
    if args.cohort == "foundation":
        episodes, windows = generate_foundation_dataset(n_patients, n_days,
                                                        args.seed, config)
    else:
        episodes = []
        for i in range(n_patients):
            streams = patient_streams(args.seed, TEST_COHORT, i)
            params = sample_patient(streams[0], config.sim.ranges)
            episodes.append(harness._episode_from_streams(
                params, n_days, i, streams[_S_DATA], config))
        windows = WindowDataset.from_episodes(
            episodes, config.bnn.t_hist, config.bnn.t_fut,
            config.harness.stride_hours, dose_max=config.mpc.u_max)
    out = save_dataset(episodes, windows, args.out_dir,
                       include_hidden=args.include_hidden, seed=args.seed)
    print(f"wrote {len(episodes)} episodes ({len(windows)} windows) to {out}")
    return 0


def _cmd_train(args, config) -> int:
    _, windows = load_dataset(args.data, config)
    weights, history = train_foundation(windows, config, args.seed)
    out = args.weights_out or (args.out_dir / "foundation.bin")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_weights(weights, out)
    print(f"trained {history.best_epoch + 1} best epoch "
          f"(val loss {min(history.val_loss):.6f}); weights -> {out}")
    return 0


def _cmd_finetune(args, config) -> int:
    foundation = load_weights(args.weights)
    episodes, _ = load_dataset(args.data, config)
    matching = [ep for ep in episodes if ep.patient_id == args.patient_index]
    if len(matching) != 1:
        raise ConfigurationError(
            f"dataset must hold exactly one episode for patient "
            f"{args.patient_index}; found {len(matching)}")
    tuned, history = finetune_patient(foundation, matching[0], config, args.seed,
                                      patient_index=args.patient_index)
    out = args.weights_out or (args.out_dir
                               / f"patient_{args.patient_index:04d}.bin")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_weights(tuned, out)
    val = min(history.val_loss) if history.val_loss else float("nan")
    print(f"fine-tuned patient {args.patient_index} (val loss {val:.6f}); "
          f"weights -> {out}")
    return 0


def _cmd_validate_open_loop(args, config) -> int:
    weights = load_weights(args.weights)
    days = args.days if args.days is not None else config.harness.open_loop_days
    params = patient_params(args.seed, TEST_COHORT, args.patient_index,
                            config.sim.ranges)
    result = run_open_loop_validation(weights, params, days, args.seed, config,
                                      patient_index=args.patient_index)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"openloop_patient_{args.patient_index:04d}"
    payload = {
        "patient": args.patient_index,
        "days": days,
        "rmse_reflux": float(result.rmse[0]),
        "rmse_digestion": float(result.rmse[1]),
        "noise_floor_reflux": float(result.noise_floor[0]),
        "noise_floor_digestion": float(result.noise_floor[1]),
        "n_windows": result.n_windows,
    }
    (args.out_dir / f"{stem}.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")
    lines = ["window_start,h_ahead,pred_reflux,pred_digestion,true_reflux,true_digestion"]
    lines += [f"{s},{h},{pr!r},{pd!r},{tr},{td}"
              for s, h, pr, pd, tr, td in result.trace]
    (args.out_dir / f"{stem}_trace.csv").write_text("\n".join(lines) + "\n")
    print(f"open-loop RMSE reflux={result.rmse[0]:.4f} "
          f"digestion={result.rmse[1]:.4f} (floors "
          f"{result.noise_floor[0]:.4f}/{result.noise_floor[1]:.4f}) -> {args.out_dir}")
    return 0


def _cmd_run_closed_loop(args, config) -> int:
    days = args.days if args.days is not None else config.harness.closed_loop_days
    params = patient_params(args.seed, TEST_COHORT, args.patient_index,
                            config.sim.ranges)
    weights = load_weights(args.weights) if args.weights is not None else None
    if args.arm == "fixed" and args.fixed_dose is None:
        raise ConfigurationError("--arm fixed requires --fixed-dose")
    if args.arm == "mpc" and weights is None:
        raise ConfigurationError("--arm mpc requires --weights")
    initial = args.initial_dose
    if initial is None and args.fixed_dose is not None:
        initial = args.fixed_dose
    bench_ss = patient_streams(args.seed, TEST_COHORT, args.patient_index)[_S_BENCH]
    result = run_closed_loop(weights, params, days, bench_ss, config,
                             arm=args.arm, fixed_dose=args.fixed_dose,
                             initial_dose=initial,
                             patient_id=args.patient_index)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"closedloop_{args.arm}_patient_{args.patient_index:04d}"
    (args.out_dir / f"{stem}.json").write_text(report_json([result]))
    (args.out_dir / f"{stem}.csv").write_text(report_csv([result]))
    (args.out_dir / f"{stem}_trace.csv").write_text(
        trace_csv(result, include_hidden=args.include_hidden))
    print(f"{args.arm} arm patient {args.patient_index}: usage={result.usage:.3f} "
          f"satisfaction reflux={result.satisfaction[0]:.3f} "
          f"digestion={result.satisfaction[1]:.3f} -> {args.out_dir}")
    return 0


def _cmd_baseline(args, config) -> int:
    days = args.days if args.days is not None else config.harness.closed_loop_days
    n_patients = (args.patients if args.patients is not None
                  else config.harness.test_patients)
    patients = []
    for i in range(n_patients):
        streams = patient_streams(args.seed, TEST_COHORT, i)
        patients.append((i, sample_patient(streams[0], config.sim.ranges),
                         streams[_S_CALIB]))
    calibration = calibrate_fixed_dose(patients, days, config)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "fixed_dose": calibration.dose,
        "target": calibration.target,
        "grid": list(calibration.grid),
        "requirements": {str(k): v for k, v in calibration.requirements.items()},
        "unreachable": calibration.unreachable,
    }
    (args.out_dir / "baseline.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")
    flag = " (target unreachable for some patients)" if calibration.unreachable else ""
    print(f"fixed regimen dose = {calibration.dose}{flag} -> "
          f"{args.out_dir / 'baseline.json'}")
    return 0


def _cmd_evaluate(args, config) -> int:
    rows = []
    for path in args.reports:
        payload = json.loads(Path(path).read_text())
        rows.extend(payload["patients"])
    summary = evaluate_rows(rows)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "mean_usage_reduction": summary.mean_usage_reduction,
        "min_satisfaction": summary.min_satisfaction,
        "paper_target_met": summary.paper_target_met,
        "per_patient": summary.per_patient,
    }
    (args.out_dir / "summary.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"mean usage reduction {100 * summary.mean_usage_reduction:.1f}%, "
          f"min satisfaction {100 * summary.min_satisfaction:.1f}%"
          + (" [paper targets met]" if summary.paper_target_met else ""))
    return 0


_COMMANDS = {
    "generate-data": _cmd_generate_data,
    "train": _cmd_train,
    "finetune": _cmd_finetune,
    "validate-open-loop": _cmd_validate_open_loop,
    "run-closed-loop": _cmd_run_closed_loop,
    "baseline": _cmd_baseline,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except PpidoseError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
