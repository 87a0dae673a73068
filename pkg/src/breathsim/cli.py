"""Command-line entry point.

Stages hand off through files: ``generate`` writes JSON-Lines traces,
``features`` turns them into a CSV, ``train`` and ``evaluate`` consume the CSV,
and ``sweep`` runs the whole chain per distance.

Exit codes: 0 ok, 2 usage or validation, 3 I/O, 4 malformed data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import dsp, evaluation, formats, ml, waveform
from .channel import DISTANCES, ChannelConfig
from .dataset import WaveformOptions, featurize, generate_recordings
from .errors import BreathsimError, ClassTooSmall, InvalidK, SchemaViolation
from .features import extract_features, feature_names

EXIT_USAGE, EXIT_IO, EXIT_DATA = 2, 3, 4
_DEFAULT_CHANNEL = ChannelConfig()
_DEFAULT_TRAIN = ml.TrainConfig()


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _class_list(text: str) -> list[int]:
    if str(text).strip().lower() == "all":
        return [int(c) for c in waveform.BreathingClass]
    try:
        return sorted({int(waveform.BreathingClass.parse(v)) for v in str(text).split(",") if v.strip()})
    except (ValueError, KeyError):
        raise argparse.ArgumentTypeError(f"unknown class in {text!r}") from None


def _fps(text: str):
    text = str(text)
    if text in ("sqrt", "all"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("features-per-split must be 'sqrt', 'all' or an integer") from None


def _adc_bits(text: str):
    return None if str(text).lower() in ("none", "0") else int(text)


# -- parser -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed; every output is a pure function of it")
    g.add_argument("--config", type=Path, default=None, help="JSON file of option values (flags win)")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--quiet", action="store_true", help="only print errors")


def _waveform_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("waveform")
    g.add_argument("--duration", type=float, default=waveform.DEFAULT_DURATION, help="seconds per recording")
    g.add_argument("--sample-rate", type=float, default=waveform.DEFAULT_SAMPLE_RATE, help="Hz")
    g.add_argument("--jitter", type=float, default=None, help="set both period and amplitude jitter")
    g.add_argument("--period-jitter", type=float, default=waveform.DEFAULT_PERIOD_JITTER)
    g.add_argument("--amplitude-jitter", type=float, default=waveform.DEFAULT_AMPLITUDE_JITTER)


def _channel_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel")
    g.add_argument("--noise-sigma", type=float, default=_DEFAULT_CHANNEL.noise_sigma,
                   help="receiver noise, V RMS (default calibrated for the 0.5/1/1.5 m sweep)")
    g.add_argument("--drift-amplitude", type=float, default=_DEFAULT_CHANNEL.drift_amplitude, help="ambient drift, V")
    g.add_argument("--drift-frequency", type=float, default=_DEFAULT_CHANNEL.drift_frequency, help="Hz")
    g.add_argument("--path-loss-exponent", type=float, default=_DEFAULT_CHANNEL.path_loss_exponent)
    g.add_argument("--reference-distance", type=float, default=_DEFAULT_CHANNEL.reference_distance, help="m")
    g.add_argument("--dc-offset", type=float, default=_DEFAULT_CHANNEL.dc_offset, help="V")
    g.add_argument("--adc-bits", type=_adc_bits, default=_DEFAULT_CHANNEL.adc_bits, help="'none' disables the ADC")


def _dsp_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("signal processing")
    g.add_argument("--cutoff", type=float, default=dsp.DEFAULT_CUTOFF, help="low-pass cutoff, Hz")
    g.add_argument("--taps", type=int, default=dsp.DEFAULT_TAPS, help="FIR length (odd)")


def _train_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--max-depth", type=int, default=_DEFAULT_TRAIN.max_depth)
    g.add_argument("--min-samples-split", type=int, default=_DEFAULT_TRAIN.min_samples_split)
    g.add_argument("--min-impurity-decrease", type=float, default=_DEFAULT_TRAIN.min_impurity_decrease)
    g.add_argument("--trees", type=int, default=_DEFAULT_TRAIN.n_trees, help="forest size")
    g.add_argument("--features-per-split", type=_fps, default=None,
                   help="'sqrt', 'all' or an integer (default: sqrt for rf, all for dt)")
    g.add_argument("--no-bootstrap", action="store_true", help="grow forest members on the full data")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="breathsim", description=__doc__.split("\n\n")[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("generate", help="simulate sensor traces to JSON-Lines", formatter_class=fmt)
    p.add_argument("--classes", type=_class_list, default="all", help="'all' or comma list of ids/names")
    p.add_argument("--per-class", type=int, default=10, help="recordings per class per distance")
    p.add_argument("--distances", type=_float_list, default=",".join(map(str, DISTANCES)), help="metres")
    p.add_argument("--output", type=Path, default=None, help="trace file (default: OUT/traces.jsonl)")
    _waveform_opts(p)
    _channel_opts(p)
    _common(p)
    subs["generate"] = p

    p = sub.add_parser("features", help="extract the feature CSV from traces", formatter_class=fmt)
    p.add_argument("--input", type=Path, required=True, help="JSON-Lines trace file")
    p.add_argument("--output", type=Path, default=None, help="CSV file (default: OUT/features.csv)")
    _dsp_opts(p)
    _common(p)
    subs["features"] = p

    p = sub.add_parser("train", help="fit a tree or forest on a feature CSV", formatter_class=fmt)
    p.add_argument("--input", type=Path, required=True, help="feature CSV")
    p.add_argument("--model", choices=("dt", "rf"), required=True)
    p.add_argument("--output", type=Path, default=None, help="model file (default: OUT/model_<model>.json)")
    _train_opts(p)
    _common(p)
    subs["train"] = p

    p = sub.add_parser("evaluate", help="stratified k-fold CV on a feature CSV", formatter_class=fmt)
    p.add_argument("--input", type=Path, required=True, help="feature CSV")
    p.add_argument("--model", choices=("dt", "rf", "both"), default="both")
    p.add_argument("--folds", "-k", type=int, default=10)
    p.add_argument("--output", type=Path, default=None, help="report file (default: OUT/report.json)")
    _train_opts(p)
    _common(p)
    subs["evaluate"] = p

    p = sub.add_parser("sweep", help="full pipeline per distance, accuracy table", formatter_class=fmt)
    p.add_argument("--distances", type=_float_list, default=",".join(map(str, DISTANCES)), help="metres")
    p.add_argument("--per-class", type=int, default=100, help="recordings per class per distance")
    p.add_argument("--folds", "-k", type=int, default=10)
    p.add_argument("--model", choices=("dt", "rf", "both"), default="both")
    p.add_argument("--emit-traces", action="store_true", help="also keep the JSON-Lines traces")
    p.add_argument("--no-intermediates", action="store_true", help="do not write per-distance feature CSVs")
    p.add_argument("--plot-data", action="store_true", help="write OUT/accuracy.csv for external plotting")
    _waveform_opts(p)
    _channel_opts(p)
    _dsp_opts(p)
    _train_opts(p)
    _common(p)
    subs["sweep"] = p
    return parser, subs


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse flags, folding in ``--config`` values underneath explicit flags."""
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        values = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    sub = subs[args.command]
    known = {a.dest for a in sub._actions} - {"help", "config"}
    values = {k.replace("-", "_"): v for k, v in values.items()}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys for '{args.command}': {', '.join(unknown)}")
    # string values go through the same type converters as flags
    for action in sub._actions:
        if action.dest in values and isinstance(values[action.dest], str) and action.type is not None:
            values[action.dest] = action.type(values[action.dest])
    sub.set_defaults(**values)
    return parser.parse_args(argv)


# -- config assembly (validated before any work) ------------------------------


def _waveform_options(args) -> WaveformOptions:
    pj, aj = args.period_jitter, args.amplitude_jitter
    if args.jitter is not None:
        pj = aj = args.jitter
    return WaveformOptions(args.duration, args.sample_rate, pj, aj)


def _channel_config(args) -> ChannelConfig:
    return ChannelConfig(
        reference_distance=args.reference_distance,
        path_loss_exponent=args.path_loss_exponent,
        dc_offset=args.dc_offset,
        noise_sigma=args.noise_sigma,
        drift_amplitude=args.drift_amplitude,
        drift_frequency=args.drift_frequency,
        adc_bits=args.adc_bits,
    )


def _dsp_config(args) -> dsp.DspConfig:
    cfg = dsp.DspConfig(cutoff=args.cutoff, taps=args.taps)
    dsp.lowpass_kernel(args.sample_rate if hasattr(args, "sample_rate") else waveform.DEFAULT_SAMPLE_RATE, cfg.cutoff, cfg.taps)
    return cfg


def _train_config(args, kind: str) -> ml.TrainConfig:
    common = dict(
        max_depth=args.max_depth,
        min_samples_split=args.min_samples_split,
        min_impurity_decrease=args.min_impurity_decrease,
        seed=args.seed,
    )
    if kind == "dt":
        fps = args.features_per_split or "all"
        return ml.TrainConfig.for_tree(features_per_split=fps, **common)
    return ml.TrainConfig.for_forest(
        n_trees=args.trees,
        features_per_split=args.features_per_split or "sqrt",
        bootstrap=not args.no_bootstrap,
        **common,
    )


def _train_configs(args) -> dict:
    kinds = ("dt", "rf") if args.model == "both" else (args.model,)
    return {k.upper(): _train_config(args, k) for k in kinds}


# -- commands -----------------------------------------------------------------


class Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def out(self, text: str = "") -> None:
        if not self.quiet:
            print(text)

    @staticmethod
    def warn(text: str) -> None:
        print(f"warning: {text}", file=sys.stderr)


def _target(args, name: str) -> Path:
    path = args.output if getattr(args, "output", None) else args.out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(args, console: Console) -> int:
    options = _waveform_options(args)
    channel = _channel_config(args)
    for d in args.distances:
        channel.replace(distance=d)
    if args.per_class < 1:
        raise UsageError("--per-class must be >= 1")
    path = _target(args, "traces.jsonl")
    manifest = []
    with path.open("w") as fh:
        for d in args.distances:
            traces = generate_recordings(d, args.per_class, channel, args.seed, args.classes, options)
            formats.write_traces(fh, traces)
            manifest.append((d, len(traces)))
    console.out(f"wrote {sum(n for _, n in manifest)} records to {path} (seed {args.seed})")
    for d, _ in manifest:
        counts = ", ".join(f"{waveform.BreathingClass(c).label}={args.per_class}" for c in args.classes)
        console.out(f"  {evaluation.format_distance(d)}: {counts}")
    return 0


def cmd_features(args, console: Console) -> int:
    cfg = _dsp_config(args)
    rows, labels, distances, seeds = [], [], [], []
    with args.input.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            trace = formats.parse_trace(line, lineno)
            if not hasattr(trace, "distance"):
                raise formats.RecordError(lineno, "record has no distance_m (not a sensor trace)")
            try:
                rows.append(extract_features(trace, cfg))
            except BreathsimError as exc:
                raise formats.RecordError(lineno, str(exc)) from None
            labels.append(int(trace.label))
            distances.append(trace.distance)
            seeds.append(trace.source_seed)
    path = _target(args, "features.csv")
    with path.open("w", newline="") as fh:
        formats.write_features(fh, np.array(rows).reshape(len(rows), len(feature_names())), labels, distances, seeds)
    if not rows:
        console.warn(f"{args.input} holds no records; wrote header-only {path}")
    console.out(f"wrote {len(rows)} feature rows to {path}")
    return 0


def _load_features(path: Path):
    with path.open(newline="") as fh:
        dataset, distances, seeds = formats.read_features(fh)
    if dataset is None:
        raise DataError(f"{path} has no data rows")
    return dataset, distances


def cmd_train(args, console: Console) -> int:
    config = _train_config(args, args.model)
    dataset, _ = _load_features(args.input)
    model = ml.fit(dataset, args.model, config)
    path = _target(args, f"model_{args.model}.json")
    path.write_text(ml.serialize_model(model) + "\n")
    console.out(f"training accuracy: {ml.accuracy(model, dataset):.4f}")
    console.out(f"wrote {args.model} model to {path}")
    return 0


def _emit_report(args, report: evaluation.EvalReport, console: Console) -> None:
    table, doc = evaluation.render_report(report)
    path = _target(args, "report.json")
    path.write_text(doc)
    console.out(table.rstrip("\n"))
    for row in report.rows:
        console.out(
            f"{row.model_kind} mean accuracy at {evaluation.format_distance(row.distance_m)}: "
            f"{100 * row.mean_accuracy:.1f}%"
        )
    console.out(f"wrote report to {path}")


def cmd_evaluate(args, console: Console) -> int:
    configs = _train_configs(args)
    dataset, distances = _load_features(args.input)
    rows = []
    for d in sorted(set(distances.tolist())):
        subset = dataset.subset(np.flatnonzero(distances == d))
        rows.extend(evaluation.evaluate_dataset(subset, d, configs, args.folds, args.seed))
    settings = {"seed": args.seed, "k": args.folds, "input": str(args.input),
                "train": {k: ml.dataclasses.asdict(c) for k, c in configs.items()}}
    _emit_report(args, evaluation.EvalReport(rows, settings), console)
    return 0


def cmd_sweep(args, console: Console) -> int:
    options = _waveform_options(args)
    channel = _channel_config(args)
    for d in args.distances:
        channel.replace(distance=d)
    cfg = _dsp_config(args)
    configs = _train_configs(args)
    if args.per_class < args.folds:
        raise ClassTooSmall(0, args.per_class, args.folds)
    if args.folds < 2:
        raise InvalidK(f"k must be >= 2, got {args.folds}")
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for d in args.distances:
        traces = generate_recordings(d, args.per_class, channel, args.seed, options=options)
        tag = evaluation.format_distance(d)
        if args.emit_traces:
            with (args.out / f"traces_{tag}.jsonl").open("w") as fh:
                formats.write_traces(fh, traces)
        table = featurize(traces, cfg)
        if not args.no_intermediates:
            with (args.out / f"features_{tag}.csv").open("w", newline="") as fh:
                formats.write_features(fh, table.dataset.features, table.dataset.labels, table.distances, table.seeds)
        rows.extend(evaluation.evaluate_dataset(table.dataset, d, configs, args.folds, args.seed))
    settings = {
        "seed": args.seed,
        "k": args.folds,
        "per_class_count": args.per_class,
        "distances": [float(d) for d in args.distances],
        "channel": ml.dataclasses.asdict(channel),
        "waveform": ml.dataclasses.asdict(options),
        "dsp": ml.dataclasses.asdict(cfg),
        "train": {k: ml.dataclasses.asdict(c) for k, c in configs.items()},
    }
    report = evaluation.EvalReport(rows, settings)
    args.output = None
    _emit_report(args, report, console)
    if args.plot_data:
        (args.out / "accuracy.csv").write_text(evaluation.accuracy_csv(report))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    console = Console(args.quiet)
    try:
        return COMMANDS[args.command](args, console)
    except (SchemaViolation, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ClassTooSmall, InvalidK, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
