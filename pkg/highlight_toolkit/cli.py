#!/usr/bin/env python3
"""
Command-line frontend: synthesize corpora, build datasets, train, evaluate, detect.
"""

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from dotenv import find_dotenv, load_dotenv

from ._config import RunConfig, env_int, load_run_config
from ._errors import ConfigurationError, HighlightToolkitError
from .datasets import build_audio_dataset, build_video_dataset, load_dataset, save_dataset
from .eval_metrics import BATCH_FRACTIONS, SPLIT_FRACTIONS, evaluate, split_balanced
from .inference_pipeline import plot_timelines, run_detection, write_scores_csv
from .models import LabeledDataset
from .nn_core import Model, TrainConfig, build_classifier, load_model, save_model, train_model
from .synth_data import (
    SynthConfig,
    corruption_indices,
    default_audio_config,
    default_video_config,
    gen_audio_corpus,
    gen_video_corpus,
    load_manifest,
)
from .timeline import save_annotations
from .transfer import adapt_for_binary, pretrain_source_model

logger = logging.getLogger(__name__)

CORRUPTION_CHOICES = ("none", "first-half", "second-half", "all")


def _defaults_help() -> str:
    defaults = RunConfig()
    lines = ["Defaults (packaged data/default.ini; override with --config FILE or HLD_CONFIG):"]
    for section in ("audio", "video", "train", "detect"):
        values = dataclasses.asdict(getattr(defaults, section))
        shown = ", ".join(f"{key}={'auto' if value is None else value}" for key, value in values.items())
        lines.append(f"  [{section}] {shown}")
    fractions = ", ".join(f"{m} {f:.1%}" for m, f in BATCH_FRACTIONS.items())
    lines.append(f"  batch_size=auto uses a fraction of the training set: {fractions}")
    lines.append("Environment: HLD_CONFIG, HLD_SEED (0), HLD_JOBS (1), HLD_LOG_LEVEL (WARNING); read from .env too")
    return "\n".join(lines)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors to main() instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n\n{self.format_help()}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file read on top of the packaged defaults (env: HLD_CONFIG)")
    common.add_argument("--seed", type=int, default=None, help="Seed for all randomness (env: HLD_SEED, default 0)")
    common.add_argument("--jobs", type=int, default=None, help="Worker cap for encoding and scoring (env: HLD_JOBS, default 1)")
    common.add_argument("--verbose", "-v", action="store_true", help="Log progress at INFO level")

    parser = _Parser(
        prog="hl-detect",
        description="Sport highlight detection from audio Mel-spectrograms and stacked video frames",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  hl-detect synth both --out corpus
  hl-detect dataset build --modality audio --corpus corpus
  hl-detect train --modality audio
  hl-detect pretrain --out models/source.fta
  hl-detect train --modality video --transfer-from models/source.fta
  hl-detect eval --modality video
  hl-detect detect --audio match.wav --frames match_frames/ --plot scores.svg

""" + _defaults_help(),
    )
    documented = {"formatter_class": argparse.RawDescriptionHelpFormatter, "epilog": _defaults_help()}
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    synth = sub.add_parser("synth", parents=[common], **documented, help="Generate a seeded synthetic corpus")
    synth.add_argument("modality", choices=("audio", "video", "both"))
    synth.add_argument("--out", help="Corpus directory (default: [paths] corpus)")
    synth.add_argument("--recordings", type=int, help="Number of recordings (default: 70 audio, 100 video)")
    synth.add_argument("--length", type=int, default=60, help="Recording length in seconds (default: 60)")
    synth.add_argument("--highlights", type=int, default=2, help="Highlights per recording (default: 2)")
    synth.add_argument("--k", type=int, help="Chunk length in seconds (default: [detect] k = 5)")
    synth.add_argument("--corrupt-audio", choices=CORRUPTION_CHOICES, default="none",
                       help="Recordings whose audio highlights are suppressed (default: none)")
    synth.add_argument("--corrupt-video", choices=CORRUPTION_CHOICES, default="none",
                       help="Recordings whose visual highlights are hidden (default: none)")
    synth.add_argument("--corruption-strength", type=float, default=0.0,
                       help="Fraction of the highlight signature kept when corrupted (default: 0)")

    dataset = sub.add_parser("dataset", help="Chunk dataset commands")
    dataset_sub = dataset.add_subparsers(dest="dataset_command", parser_class=_Parser)
    build = dataset_sub.add_parser("build", parents=[common], **documented, help="Encode the corpus chunks of one modality")
    build.add_argument("--modality", choices=("audio", "video"), required=True)
    build.add_argument("--corpus", help="Corpus directory (default: [paths] corpus)")
    build.add_argument("--out", help="Dataset file (default: [paths] datasets/<modality>.npz)")

    pretrain = sub.add_parser("pretrain", parents=[common], **documented, help="Train an RGB shape classifier as a transfer source")
    pretrain.add_argument("--out", required=True, help="FTA1 archive to write")
    pretrain.add_argument("--samples", type=int, default=400, help="Synthetic images (default: 400)")
    pretrain.add_argument("--classes", type=int, default=4, help="Number of classes (default: 4)")
    pretrain.add_argument("--lr", type=float, help="Learning rate (default: [train] learning_rate = 0.001)")
    pretrain.add_argument("--epochs", type=int, help="Maximum epochs (default: [train] max_epochs = 200)")

    train = sub.add_parser("train", parents=[common], **documented, help="Train a binary chunk classifier")
    _add_model_io(train)
    train.add_argument("--transfer-from", help="Source FTA1 archive whose first convolution is adapted")
    train.add_argument("--lr", type=float, help="Learning rate (default: [train] learning_rate = 0.001)")
    train.add_argument("--batch-size", type=int,
                       help="Minibatch size (default: 4.5%% of the training set for audio, 1.2%% for video)")
    train.add_argument("--epochs", type=int, help="Maximum epochs (default: [train] max_epochs = 200)")
    train.add_argument("--patience", type=int, help="Early-stopping patience (default: [train] patience = 10)")

    ev = sub.add_parser("eval", parents=[common], **documented, help="Evaluate a trained model on the held-out split")
    _add_model_io(ev)
    ev.add_argument("--report", help="JSON report (default: [paths] reports/<modality>_eval.json)")

    detect = sub.add_parser("detect", parents=[common], **documented, help="Score a recording and extract highlight intervals")
    detect.add_argument("--audio", help="16-bit PCM WAV file")
    detect.add_argument("--frames", help="Directory of frame_*.pgm/png files with frames.json")
    detect.add_argument("--audio-model", help="Audio FTA1 archive (default: [paths] models/audio.fta)")
    detect.add_argument("--video-model", help="Video FTA1 archive (default: [paths] models/video.fta)")
    detect.add_argument("--epsilon", type=float, help="Detection threshold (default: 0.5)")
    detect.add_argument("--min-len", type=int, help="Minimum highlight length in seconds (default: 3)")
    detect.add_argument("--stride", type=int, help="Window stride in seconds (default: 1)")
    detect.add_argument("--csv", help="Per-second scores CSV (default: [paths] reports/scores.csv)")
    detect.add_argument("--plot", help="SVG plot of the score timelines")
    detect.add_argument("--intervals-out", help="JSON file of the detected highlight intervals")
    return parser


def _add_model_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--modality", choices=("audio", "video"), required=True)
    parser.add_argument("--dataset", help="Dataset file (default: [paths] datasets/<modality>.npz)")
    parser.add_argument("--model", help="FTA1 archive (default: [paths] models/<modality>.fta)")


def _setup_logging(verbose: bool) -> None:
    level = "INFO" if verbose else os.getenv("HLD_LOG_LEVEL", "WARNING").strip().upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigurationError(f"HLD_LOG_LEVEL must be a logging level name, got {level!r}")
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def _splits(dataset: LabeledDataset, seed: int):
    return split_balanced(dataset, SPLIT_FRACTIONS[dataset.modality], seed)


def cmd_synth(args, config: RunConfig, seed: int, jobs: int) -> int:
    out = Path(args.out or config.paths.corpus)
    modalities = ("audio", "video") if args.modality == "both" else (args.modality,)
    defaults = {"audio": default_audio_config(seed), "video": default_video_config(seed)}
    for modality in modalities:
        # placement depends only on (seed, index): the smaller corpus annotates a prefix of the larger
        num = args.recordings or defaults[modality].num_recordings
        synth_config = SynthConfig(
            num_recordings=num,
            recording_length_s=args.length,
            highlights_per_recording=args.highlights,
            k=args.k or config.detect.k,
            seed=seed,
            corrupt_audio=corruption_indices(num, args.corrupt_audio),
            corrupt_video=corruption_indices(num, args.corrupt_video),
            corruption_strength=args.corruption_strength,
        )
        generate = gen_audio_corpus if modality == "audio" else gen_video_corpus
        corpus = generate(synth_config, out, jobs)
        print(f"{modality}: {len(corpus.recordings)} recordings, {len(corpus.chunks)} balanced chunks -> {out}")
    return 0


def cmd_dataset(args, config: RunConfig, seed: int, jobs: int) -> int:
    manifest = load_manifest(args.corpus or config.paths.corpus)
    if int(manifest["k"]) != config.detect.k:
        raise ConfigurationError(f"Corpus chunks are {manifest['k']} s long but [detect] k = {config.detect.k}")
    if args.modality == "audio":
        dataset = build_audio_dataset(manifest, config.audio, jobs)
    else:
        dataset = build_video_dataset(manifest, config.video, jobs)
    out = Path(args.out) if args.out else config.paths.dataset_file(args.modality)
    save_dataset(dataset, out)
    print(f"{args.modality}: {len(dataset)} samples ({dataset.positives} positive) -> {out}")
    return 0


def cmd_pretrain(args, config: RunConfig, seed: int, jobs: int) -> int:
    config = config.with_overrides("train", learning_rate=args.lr, max_epochs=args.epochs)
    train_config = TrainConfig(
        learning_rate=config.train.learning_rate,
        momentum=config.train.momentum,
        batch_size=config.train.batch_size or 16,
        max_epochs=config.train.max_epochs,
        patience=config.train.patience,
        seed=seed,
    )
    input_shape = (config.video.height, config.video.width, 3)
    model, history = pretrain_source_model(input_shape, args.classes, args.samples, train_config, seed)
    save_model(model, args.out)
    best = min(history, key=lambda r: r.val_loss)
    print(f"source model: {len(history)} epochs, best val_accuracy={best.val_accuracy:.4f} -> {args.out}")
    return 0


def _initial_model(args, input_shape: tuple, seed: int) -> Model:
    if not args.transfer_from:
        return build_classifier(input_shape, seed)
    source = load_model(args.transfer_from)
    if source.input_shape[:2] != input_shape[:2]:
        raise ConfigurationError(
            f"Source model takes {source.input_shape[:2]} images but {args.modality} inputs are {input_shape[:2]}"
        )
    return adapt_for_binary(source, input_shape[2], seed)


def cmd_train(args, config: RunConfig, seed: int, jobs: int) -> int:
    config = config.with_overrides("train", learning_rate=args.lr, batch_size=args.batch_size,
                                   max_epochs=args.epochs, patience=args.patience)
    dataset_path = args.dataset or config.paths.dataset_file(args.modality)
    dataset = load_dataset(dataset_path)
    if dataset.modality != args.modality:
        raise ConfigurationError(f"{dataset_path} holds {dataset.modality} samples, not {args.modality}")
    train, val, _ = _splits(dataset, seed)
    train_config = config.train.to_train_config(len(train), BATCH_FRACTIONS[args.modality], seed)

    model = _initial_model(args, dataset.inputs.shape[1:], seed)
    model, history = train_model(model, train, val, train_config)
    out = Path(args.model) if args.model else config.paths.model_file(args.modality)
    save_model(model, out)

    history_path = Path(config.paths.reports) / f"{args.modality}_history.csv"
    history_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([vars(r) for r in history]).to_csv(history_path, index=False, float_format="%.6f",
                                                    lineterminator="\n")
    best = min(history, key=lambda r: r.val_loss)
    print(f"{args.modality}: best epoch {best.epoch} of {len(history)}, "
          f"val_loss={best.val_loss:.4f} val_accuracy={best.val_accuracy:.4f} -> {out}")
    return 0


def cmd_eval(args, config: RunConfig, seed: int, jobs: int) -> int:
    dataset = load_dataset(args.dataset or config.paths.dataset_file(args.modality))
    _, _, test = _splits(dataset, seed)
    model = load_model(args.model or config.paths.model_file(args.modality))
    report = evaluate(model, test)
    out = Path(args.report) if args.report else Path(config.paths.reports) / f"{args.modality}_eval.json"
    report.save(out)
    print_report(args.modality, report)
    print(f"report -> {out}")
    return 0


def print_report(modality: str, report) -> None:
    """Print evaluation results in human-readable format."""
    pct = report.counts.normalized_percent()
    print("\n" + "=" * 48)
    print(f"{modality.upper()} CHUNK CLASSIFICATION ({report.counts.total} test chunks)")
    print("=" * 48)
    print(f"accuracy/recall  {report.accuracy:.4f} / {report.recall:.4f}")
    print(f"precision        {report.precision:.4f}")
    print(f"f1               {report.f1:.4f}")
    print("confusion (% of test set)   predicted 1   predicted 0")
    print(f"  highlight                 {pct['tp']:10.2f}   {pct['fn']:10.2f}")
    print(f"  non-highlight             {pct['fp']:10.2f}   {pct['tn']:10.2f}")
    print("=" * 48)


def cmd_detect(args, config: RunConfig, seed: int, jobs: int) -> int:
    if not args.audio and not args.frames:
        raise UsageError("hl-detect detect: supply --audio, --frames, or both")
    config = config.with_overrides("detect", epsilon=args.epsilon, min_length_s=args.min_len, stride_s=args.stride)
    models = {}
    if args.audio:
        models["audio"] = load_model(args.audio_model or config.paths.model_file("audio"))
    if args.frames:
        models["video"] = load_model(args.video_model or config.paths.model_file("video"))

    result = run_detection(args.audio, args.frames, models, config.detect, config.audio, config.video, jobs)
    csv_path = Path(args.csv) if args.csv else Path(config.paths.reports) / "scores.csv"
    write_scores_csv(result, csv_path)
    if args.plot:
        plot_timelines(result, config.detect, args.plot)
    if args.intervals_out:
        save_annotations(result.intervals[result.primary_source], args.intervals_out)

    source = result.primary_source
    print(f"{source}: {len(result.intervals[source])} highlight(s)")
    for interval in result.intervals[source]:
        print(f"  {interval.start_s:5d}s - {interval.end_s:5d}s  ({interval.length_s} s)")
    print(f"scores -> {csv_path}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "dataset": cmd_dataset,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "detect": cmd_detect,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns 0 on success, 1 on usage errors, 2 on data errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        if args.command == "dataset" and args.dataset_command is None:
            raise UsageError("hl-detect dataset: choose a subcommand (build)")
        load_dotenv(find_dotenv(usecwd=True))
        _setup_logging(args.verbose)
        config = load_run_config(args.config)
        seed = args.seed if args.seed is not None else env_int("HLD_SEED", 0)
        jobs = args.jobs if args.jobs is not None else env_int("HLD_JOBS", 1)
        if jobs < 1:
            raise UsageError(f"--jobs must be >= 1, got {jobs}")
        return COMMANDS[args.command](args, config, seed, jobs)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    except (HighlightToolkitError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
