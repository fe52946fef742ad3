"""
Command-line utility for dataset synthesis, autofocus, training, evaluation and benchmarking.

Usage::

    python -m src.pipeline.run_autofocus [global flags] <command> [command flags]

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from src.learned_autofocus.pipeline import infer
from src.learned_autofocus.regressor import RegressorParams
from src.learned_autofocus.training import TrainConfig, train
from src.errors import AutofocusError
from src.gd_autofocus import FocusResult, GdConfig, crossval_lr, focus_gd
from src.iqa import DespeckleConfig
from src.log import configure_logging
from src.pipeline.dataset import MANIFEST_NAME, SPLITS, DatasetManifest, build_dataset
from src.pipeline.evaluation import METHOD_NAMES, bench, build_methods, evaluate, resolve_learning_rates
from src.settings import Settings, load_settings
from src.sharpness import Metric, MetricKind
from src.slc import DEGREES, drc, export_drc, read_slc, write_slc
from src.validation import validate_eval_records, validate_manifest
from src.weighting import WEIGHT_NAMES, WeightFn, weight_identity, weight_lowcontrast

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

MIN_IMAGE_SIZE = 8


def _method_list(value: str) -> list[str]:
    names = [name.strip() for name in value.split(",") if name.strip()]
    unknown = [name for name in names if name not in METHOD_NAMES]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown methods {unknown}; choose from {', '.join(METHOD_NAMES)}")
    return names


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def _image_size(value: str) -> int:
    size = int(value)
    if size < MIN_IMAGE_SIZE or size & (size - 1):
        raise argparse.ArgumentTypeError(f"expected a power of two >= {MIN_IMAGE_SIZE}, got {value}")
    return size


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit seed, got {value}")
    return seed



def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run_autofocus",
        description="Synthetic aperture sonar autofocus: classical gradient descent and learned single-pass correction.",
    )
    parser.add_argument("--seed", type=_seed, default=0, help="Base seed for every random draw (default: 0).")
    parser.add_argument(
        "--size",
        type=_image_size,
        default=settings.image_size,
        help=f"Image side length M, a power of two (default: {settings.image_size}).",
    )
    parser.add_argument("--out", type=Path, default=Path("data/synthetic"), help="Output directory (default: data/synthetic).")
    parser.add_argument(
        "--threads",
        type=_positive_int,
        default=os.cpu_count() or 1,
        help="Worker threads for per-image parallelism (default: available cores).",
    )
    parser.add_argument("--log-level", default=settings.logging.level, help="Logging level (default from settings).")

    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="Generate a synthetic dataset and manifest.")
    synth.add_argument("--train", type=_positive_int, default=settings.dataset.train)
    synth.add_argument("--val", type=_positive_int, default=settings.dataset.val)
    synth.add_argument("--test", type=_positive_int, default=settings.dataset.test)

    focus_gd_cmd = commands.add_parser("focus-gd", help="Autofocus one SLC1 file by gradient descent.")
    focus_gd_cmd.add_argument("--metric", choices=[m.value for m in Metric], required=True)
    focus_gd_cmd.add_argument("--lr", type=float, default=None, help="Learning rate (default: configured value for the metric).")
    focus_gd_cmd.add_argument("--iters", type=_positive_int, default=settings.gd.iterations)
    focus_gd_cmd.add_argument("--weight", choices=WEIGHT_NAMES, default=settings.gd.weight)
    _add_focus_io(focus_gd_cmd)

    focus_deep = commands.add_parser("focus-deep", help="Autofocus one SLC1 file with a trained regressor.")
    focus_deep.add_argument("--model", type=Path, required=True, help="DAF1 checkpoint.")
    focus_deep.add_argument("--zero-phase-input", action="store_true", default=settings.training.zero_phase_input)
    _add_focus_io(focus_deep)

    train_cmd = commands.add_parser("train", help="Train the regressor on a manifest.")
    train_cmd.add_argument("--manifest", type=Path, required=True)
    train_cmd.add_argument("--epochs", type=_positive_int, default=settings.training.epochs)
    train_cmd.add_argument("--batch", type=_positive_int, default=settings.training.batch_size)
    train_cmd.add_argument("--lr", type=float, default=settings.training.learning_rate)
    train_cmd.add_argument("--loss-mode", choices=["relative", "absolute"], default=settings.training.loss_mode)
    train_cmd.add_argument("--zero-phase-input", action="store_true", default=settings.training.zero_phase_input)
    train_cmd.add_argument(
        "--stored-corruption",
        action="store_true",
        default=not settings.training.fresh_corruption_per_epoch,
        help="Train on the manifest's corrupted images instead of resampling corruption each epoch.",
    )

    eval_cmd = commands.add_parser("eval", help="Score methods on the test split.")
    eval_cmd.add_argument("--manifest", type=Path, required=True)
    eval_cmd.add_argument("--methods", type=_method_list, default=list(METHOD_NAMES[:-1]))
    eval_cmd.add_argument("--model", type=Path, default=None, help="DAF1 checkpoint, required for 'deep'.")
    eval_cmd.add_argument("--iters", type=_positive_int, default=settings.gd.iterations)
    eval_cmd.add_argument("--weight", choices=WEIGHT_NAMES, default=settings.gd.weight)
    eval_cmd.add_argument("--crossval-split", choices=SPLITS, default=settings.evaluation.crossval_split)

    bench_cmd = commands.add_parser("bench", help="Mean per-image runtime per method.")
    bench_cmd.add_argument("--manifest", type=Path, required=True)
    bench_cmd.add_argument("--methods", type=_method_list, default=list(METHOD_NAMES[2:-1]))
    bench_cmd.add_argument("--model", type=Path, default=None)
    bench_cmd.add_argument("--iters", type=_positive_int, default=settings.gd.iterations)
    bench_cmd.add_argument("--crossval-split", choices=SPLITS, default=settings.evaluation.crossval_split)

    crossval = commands.add_parser("crossval", help="Select a GD learning rate for a metric.")
    crossval.add_argument("--manifest", type=Path, required=True)
    crossval.add_argument("--metric", choices=[m.value for m in Metric], required=True)
    crossval.add_argument("--split", choices=SPLITS, default=settings.evaluation.crossval_split)
    crossval.add_argument("--iters", type=_positive_int, default=settings.gd.iterations)
    crossval.add_argument("--weight", choices=WEIGHT_NAMES, default=settings.gd.weight)
    return parser


def _add_focus_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", type=Path, required=True, help="Defocused SLC1 file.")
    parser.add_argument("--output", type=Path, required=True, help="Where to write the corrected SLC1 file.")
    parser.add_argument("--png", type=Path, default=None, help="Optional DRC image of the result (.png or .pgm).")


def _weight(name: str, settings: Settings) -> WeightFn:
    if name == "lowcontrast":
        return weight_lowcontrast(settings.gd.lowcontrast_window, settings.gd.lowcontrast_quantile)
    return weight_identity()


def _print_focus_result(result: FocusResult) -> None:
    print("iteration,objective")
    for iteration, value in enumerate(result.trace):
        print(f"{iteration},{value:.17g}")
    print()
    print("degree,coefficient")
    for degree, coeff in zip(DEGREES, result.phi_hat.coeffs):
        print(f"{degree},{coeff:.17g}")


def _write_focus_outputs(result: FocusResult, args: argparse.Namespace) -> None:
    write_slc(result.g_hat, args.output)
    if args.png is not None:
        export_drc(drc(result.g_hat), args.png)


def _load_model(path: Optional[Path]) -> Optional[RegressorParams]:
    return RegressorParams.load(path) if path is not None else None


def _report_issues(issues: list[str]) -> bool:
    for issue in issues:
        print(f"- {issue}", file=sys.stderr)
    return bool(issues)


# -- Commands ---------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    manifest = build_dataset(
        count_train=args.train,
        count_val=args.val,
        count_test=args.test,
        base_seed=args.seed,
        out_dir=args.out,
        size=args.size,
        scene_settings=settings.scene,
        n_jobs=args.threads,
    )
    failed = _report_issues(validate_manifest(manifest))
    print(f"Saved manifest with {len(manifest)} records to {manifest.root / MANIFEST_NAME}")
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_focus_gd(args: argparse.Namespace, settings: Settings) -> int:
    learning_rate = args.lr if args.lr is not None else settings.gd.learning_rates.get(args.metric)
    if learning_rate is None:
        raise ValueError(f"No learning rate configured for {args.metric}; pass --lr or run crossval")
    cfg = GdConfig(
        metric=MetricKind.parse(args.metric, b=settings.gd.osf_b),
        learning_rate=learning_rate,
        iterations=args.iters,
        weight=_weight(args.weight, settings),
    )
    result = focus_gd(read_slc(args.input), cfg)
    _write_focus_outputs(result, args)
    _print_focus_result(result)
    return EXIT_OK


def cmd_focus_deep(args: argparse.Namespace, settings: Settings) -> int:
    params = RegressorParams.load(args.model)
    result = infer(read_slc(args.input), params, zero_phase_input=args.zero_phase_input)
    _write_focus_outputs(result, args)
    _print_focus_result(result)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    manifest = DatasetManifest.from_csv(args.manifest)
    cfg = TrainConfig(
        batch_size=args.batch,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        fresh_corruption_per_epoch=not args.stored_corruption,
        loss_mode=args.loss_mode,
        zero_phase_input=args.zero_phase_input,
        n_jobs=args.threads,
    )
    params, history = train(manifest, cfg)
    model_path = params.save(args.out / "model.daf")
    history_path = history.to_csv(args.out / "history.csv")
    print(f"Saved checkpoint (epoch {history.selected_epoch}) to {model_path}")
    print(f"Saved training history to {history_path}")
    return EXIT_OK


def _methods_for(args: argparse.Namespace, settings: Settings, manifest: DatasetManifest, weight: WeightFn):
    rates = resolve_learning_rates(
        manifest,
        args.methods,
        settings.gd.learning_rates,
        grid=settings.gd.learning_rate_grid,
        iterations=args.iters,
        weight=weight,
        osf_b=settings.gd.osf_b,
        split=args.crossval_split,
        n_jobs=args.threads,
    )
    return build_methods(
        args.methods,
        learning_rates=rates,
        iterations=args.iters,
        weight=weight,
        osf_b=settings.gd.osf_b,
        params=_load_model(args.model),
        zero_phase_input=settings.training.zero_phase_input,
    )


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    manifest = DatasetManifest.from_csv(args.manifest)
    if _report_issues(validate_manifest(manifest)):
        print(f"error: manifest {args.manifest} failed validation", file=sys.stderr)
        return EXIT_FAILURE
    methods = _methods_for(args, settings, manifest, _weight(args.weight, settings))
    records, summary = evaluate(
        manifest,
        methods,
        args.out / "eval.csv",
        despeckle_cfg=DespeckleConfig(**asdict(settings.despeckle)),
        identical_mse=settings.evaluation.identical_mse,
        n_jobs=args.threads,
    )
    summary_path = args.out / "eval_summary.csv"
    summary.to_csv(summary_path, index=False, float_format="%.17g")
    print(summary.to_csv(index=False), end="")
    return EXIT_FAILURE if _report_issues(validate_eval_records(records)) else EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    manifest = DatasetManifest.from_csv(args.manifest)
    methods = _methods_for(args, settings, manifest, weight_identity())
    frame = bench(manifest, methods)
    args.out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out / "bench.csv", index=False, float_format="%.17g")
    print(frame.to_csv(index=False), end="")
    return EXIT_OK


def cmd_crossval(args: argparse.Namespace, settings: Settings) -> int:
    manifest = DatasetManifest.from_csv(args.manifest)
    images = [record.load_corrupted() for record in manifest.split(args.split)]
    learning_rate = crossval_lr(
        images,
        MetricKind.parse(args.metric, b=settings.gd.osf_b),
        settings.gd.learning_rate_grid,
        iterations=args.iters,
        weight=_weight(args.weight, settings),
        n_jobs=args.threads,
    )
    print(pd.DataFrame([{"metric": args.metric, "learning_rate": learning_rate}]).to_csv(index=False), end="")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "focus-gd": cmd_focus_gd,
    "focus-deep": cmd_focus_deep,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "crossval": cmd_crossval,
}


def main(argv: Optional[Sequence[str]] = None, *, settings: Optional[Settings] = None) -> int:
    settings = settings or load_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    configure_logging(args.log_level, json_format=settings.logging.json)
    try:
        return COMMANDS[args.command](args, settings)
    except (AutofocusError, OSError, ValueError) as exc:
        logger.error("command failed", extra={"command": args.command, "error": f"{type(exc).__name__}: {exc}"})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
