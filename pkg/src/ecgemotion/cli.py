"""Command-line pipeline: synth -> filter -> extract -> tune -> train ->
predict -> evaluate, plus the sweep experiments and report rendering.

Every subcommand reads its declared inputs, writes its declared outputs, and
exits 0 on success. Failures print one machine-parsable line to stderr and
exit with a category code: 1 usage, 2 io, 3 data, 4 config.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dsp, evaluation, features, forest, knn, svm, synthgen
from .config import PipelineConfig
from .types import ConfigError, Dataset, DataFormatError, ParameterError
from .utils import derive_seed, fmt_float


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_files(args.config or [])
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _signal_files(directory: Path) -> list:
    if not directory.is_dir():
        raise FileNotFoundError(f"signal directory {directory} does not exist")
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise DataFormatError(f"no signal CSVs found in {directory}")
    return paths


def _load_corpus(directory: Path) -> list:
    return [synthgen.load_record(path) for path in _signal_files(directory)]


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = evaluation.synth_corpus(cfg)
    for record in records:
        name = f"s{record.subject_id}_e{int(record.label)}.csv"
        synthgen.save_record(record, out / name)
    print(f"wrote {len(records)} signal files to {out}")
    return 0


def cmd_filter(args) -> int:
    cfg = _load_config(args)
    fir = evaluation.design_filter(cfg)
    if fir.warning:
        print(f"warning: {fir.warning}", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in _signal_files(Path(args.input)):
        record = synthgen.load_record(path)
        synthgen.save_record(dsp.apply(fir, record), out / path.name)
        count += 1
    if args.taps_out:
        dsp.save_taps(fir, args.taps_out)
    print(f"filtered {count} signal files into {out}")
    return 0


def cmd_extract(args) -> int:
    cfg = _load_config(args)
    records = _load_corpus(Path(args.input))
    dataset = features.assemble(
        records,
        cfg.segment_len,
        cfg.segment_stride,
        cfg.feature_count,
        cfg.train_subjects,
        cfg.test_subjects,
        cfg.train_size,
        cfg.test_size,
        derive_seed(cfg.seed, "run", args.run),
    )
    if cfg.zscore:
        dataset = features.standardize(dataset)
    features.save_features(dataset.train, args.train_out)
    features.save_features(dataset.test, args.test_out)
    print(
        f"wrote {len(dataset.train)} train and {len(dataset.test)} test vectors "
        f"({cfg.feature_count} features)"
    )
    return 0


def cmd_tune(args) -> int:
    cfg = _load_config(args)
    vectors = features.load_features(args.features)
    dataset = Dataset(vectors, [], len(vectors[0]))
    result = evaluation.tune_svm(dataset.train_arrays(), cfg, cfg.seed)
    with open(args.trace_out, "w") as fh:
        fh.write("iteration,particle,c,gamma,fitness,global_best_fitness\n")
        for row in result.trace:
            fh.write(
                f"{row[0]},{row[1]},{fmt_float(row[2])},{fmt_float(row[3])},"
                f"{fmt_float(row[4])},{fmt_float(row[5])}\n"
            )
    if args.params_out:
        with open(args.params_out, "w") as fh:
            fh.write(f"svm_c={fmt_float(result.c)}\n")
            fh.write(f"svm_gamma={fmt_float(result.gamma)}\n")
    print(f"c={fmt_float(result.c)} gamma={fmt_float(result.gamma)} fitness={fmt_float(result.fitness)}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.classifier:
        cfg = cfg.replace(classifier=args.classifier)
    vectors = features.load_features(args.features)
    dataset = Dataset(vectors, [], len(vectors[0]))
    model, _ = evaluation.train_classifier(dataset, cfg, derive_seed(cfg.seed, "train"))
    if cfg.classifier == "svm":
        svm.save_model(model, args.model)
    elif cfg.classifier == "forest":
        forest.save_model(model, args.model)
    else:
        knn.save_model(model, args.model)
    print(f"trained {cfg.classifier} on {len(vectors)} vectors -> {args.model}")
    return 0


def _load_any_model(path):
    with open(path) as fh:
        kind = fh.readline().split(" ", 1)[0]
    if kind == "svm":
        return svm.load_model(path), svm.predict_multiclass_batch
    if kind == "forest":
        return forest.load_model(path), forest.predict_forest_batch
    if kind == "knn":
        return knn.load_model(path), knn.predict_knn_batch
    raise DataFormatError(f"{path}: unrecognized model kind {kind!r}")


def cmd_predict(args) -> int:
    model, predict = _load_any_model(args.model)
    vectors = features.load_features(args.features)
    x = np.stack([fv.values for fv in vectors])
    codes = predict(model, x)
    with open(args.out, "w") as fh:
        fh.write("label\n")
        for code in codes:
            fh.write(f"{int(code)}\n")
    print(f"wrote {len(codes)} predictions to {args.out}")
    return 0


def _load_predictions(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "label":
            raise DataFormatError(f"{path}: expected prediction header 'label'")
        try:
            return np.array([int(line.strip()) for line in fh if line.strip()], dtype=np.int64)
        except ValueError as exc:
            raise DataFormatError(f"{path}: {exc}") from exc


def cmd_evaluate(args) -> int:
    vectors = features.load_features(args.features)
    truth = np.array([int(fv.label) for fv in vectors], dtype=np.int64)
    if args.predictions:
        predicted = _load_predictions(args.predictions)
    elif args.model:
        model, predict = _load_any_model(args.model)
        predicted = predict(model, np.stack([fv.values for fv in vectors]))
    else:
        raise ParameterError("evaluate needs --predictions or --model")
    cm = evaluation.confusion(truth, predicted)
    report = evaluation.RecognitionReport(
        np.array([evaluation._rates_or_fail(cm)])
    )
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.confusion.csv", "w") as fh:
        fh.write(evaluation.confusion_csv(cm))
    with open(f"{prefix}.rates.csv", "w") as fh:
        fh.write(evaluation.runs_csv(report))
    print(f"accuracy={fmt_float(cm.accuracy())} samples={cm.total}")
    return 0


def _sweep_records(args, cfg):
    if args.signals:
        return _load_corpus(Path(args.signals))
    records = evaluation.synth_corpus(cfg)
    filtered, _ = evaluation.filter_corpus(records, cfg)
    return filtered


def cmd_sweep_features(args) -> int:
    cfg = _load_config(args)
    curve = evaluation.sweep_features(cfg, records=_sweep_records(args, cfg))
    with open(args.out, "w") as fh:
        fh.write(evaluation.curve_csv("features", curve.points))
    print(f"best features={curve.best}")
    return 0


def cmd_sweep_trees(args) -> int:
    cfg = _load_config(args)
    curve, ge_points = evaluation.sweep_trees(cfg, records=_sweep_records(args, cfg))
    with open(args.out, "w") as fh:
        fh.write(evaluation.curve_csv("trees", curve.points))
    if args.ge_out:
        with open(args.ge_out, "w") as fh:
            fh.write(evaluation.ge_curve_csv(ge_points))
    print(f"best trees={curve.best}")
    return 0


def cmd_sweep_k(args) -> int:
    cfg = _load_config(args)
    curve = evaluation.sweep_k(cfg, records=_sweep_records(args, cfg))
    with open(args.out, "w") as fh:
        fh.write(evaluation.curve_csv("k", curve.points))
    print(f"best k={curve.best}")
    return 0


def cmd_report(args) -> int:
    with open(args.runs) as fh:
        report = evaluation.parse_runs_csv(fh.read())
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.csv", "w") as fh:
        fh.write(evaluation.report_csv(report))
    with open(f"{prefix}.txt", "w") as fh:
        fh.write(evaluation.report_text(report))
    print(evaluation.report_text(report), end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="ecgemotion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", action="append", help="config file; repeatable, later wins")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")

    p = sub.add_parser("synth", help="generate the synthetic signal corpus")
    common(p)
    p.add_argument("--out", required=True, help="output directory for signal CSVs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("filter", help="FIR-filter a directory of signal CSVs")
    common(p)
    p.add_argument("--in", dest="input", required=True, help="input signal directory")
    p.add_argument("--out", required=True, help="output signal directory")
    p.add_argument("--taps-out", default=None, help="also export the filter taps CSV")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("extract", help="segment, transform, and sample a train/test split")
    common(p)
    p.add_argument("--in", dest="input", required=True, help="filtered signal directory")
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--run", type=int, default=0, help="run index for seed derivation")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("tune", help="PSO-tune svm_c and svm_gamma on training features")
    common(p)
    p.add_argument("--features", required=True, help="training feature CSV")
    p.add_argument("--trace-out", required=True, help="per-evaluation trace CSV")
    p.add_argument("--params-out", default=None, help="write tuned keys as a config overlay")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="train the configured classifier")
    common(p)
    p.add_argument("--classifier", choices=("svm", "forest", "knn"), default=None)
    p.add_argument("--features", required=True, help="training feature CSV")
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels for a feature CSV")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="prediction CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="confusion matrix and recognition rates")
    common(p)
    p.add_argument("--features", required=True, help="test feature CSV (carries truth)")
    p.add_argument("--model", default=None)
    p.add_argument("--predictions", default=None)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-features", help="recognition rate vs feature count")
    common(p)
    p.add_argument("--signals", default=None, help="filtered signal directory (default: synth)")
    p.add_argument("--out", required=True, help="curve CSV")
    p.set_defaults(func=cmd_sweep_features)

    p = sub.add_parser("sweep-trees", help="recognition rate vs learning cycles")
    common(p)
    p.add_argument("--signals", default=None)
    p.add_argument("--out", required=True, help="rate curve CSV")
    p.add_argument("--ge-out", default=None, help="generalization-error curve CSV")
    p.set_defaults(func=cmd_sweep_trees)

    p = sub.add_parser("sweep-k", help="recognition rate vs neighbor count")
    common(p)
    p.add_argument("--signals", default=None)
    p.add_argument("--out", required=True, help="curve CSV")
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("report", help="render summary tables from stored run rates")
    common(p)
    p.add_argument("--runs", required=True, help="runs CSV written by evaluate")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ParameterError as exc:
        print(f"error:usage: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error:config: {exc}", file=sys.stderr)
        return 4
    except DataFormatError as exc:
        print(f"error:data: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
