"""Metrics, the repeated-run protocol, and the three sweep experiments.

The protocol mirrors the reference experiment: build a corpus of noisy
synthetic records, denoise, segment, extract DCT features, optionally tune
the SVM with PSO on the training side, then train and score repeatedly with
per-run seeds and aggregate highest/lowest/average recognition rates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import dsp, features, forest, knn, pso, svm, synthgen
from .config import PipelineConfig
from .types import (
    Dataset,
    DataFormatError,
    Emotion,
    EMOTIONS,
    NUM_CLASSES,
    ParameterError,
)
from .utils import derive_seed, fmt_float, fmt_percent


@dataclass(eq=False)
class ConfusionMatrix:
    """Rows are true emotions, columns predicted emotions."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ParameterError(f"confusion matrix must be {NUM_CLASSES}x{NUM_CLASSES}")
        if (self.counts < 0).any():
            raise ParameterError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)


def confusion(true_labels, predicted_labels) -> ConfusionMatrix:
    true_codes = np.asarray(true_labels, dtype=np.int64).ravel()
    pred_codes = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if len(true_codes) != len(pred_codes):
        raise ParameterError("label sequences differ in length")
    if len(true_codes) == 0:
        raise ParameterError("label sequences are empty")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (true_codes, pred_codes), 1)
    return ConfusionMatrix(counts)


def recognition_rates(cm: ConfusionMatrix) -> list:
    """Per-emotion diagonal fraction; None where the true class is absent."""
    rates = []
    for i in range(NUM_CLASSES):
        row_sum = cm.counts[i].sum()
        rates.append(float(cm.counts[i, i] / row_sum) if row_sum else None)
    return rates


def _rates_or_fail(cm: ConfusionMatrix) -> np.ndarray:
    rates = recognition_rates(cm)
    missing = [EMOTIONS[i].name for i, r in enumerate(rates) if r is None]
    if missing:
        raise DataFormatError(
            f"test split has no samples for {', '.join(missing)}; recognition rate undefined"
        )
    return np.array(rates)


@dataclass(eq=False)
class RecognitionReport:
    """Highest/lowest/average recognition rate per emotion over repeated runs."""

    rates: np.ndarray  # (runs, NUM_CLASSES)

    def __post_init__(self):
        self.rates = np.atleast_2d(np.asarray(self.rates, dtype=np.float64))
        if self.rates.shape[1] != NUM_CLASSES:
            raise ParameterError(f"rates must have {NUM_CLASSES} columns")

    @property
    def num_runs(self) -> int:
        return len(self.rates)

    def per_run_overall(self) -> np.ndarray:
        return self.rates.mean(axis=1)

    def highest(self) -> np.ndarray:
        return self.rates.max(axis=0)

    def lowest(self) -> np.ndarray:
        return self.rates.min(axis=0)

    def average(self) -> np.ndarray:
        return self.rates.mean(axis=0)

    @property
    def overall_average(self) -> float:
        return float(self.rates.mean())


def run_repeated(trainer, dataset_factory, runs: int, seed: int):
    """Run the train/score cycle ``runs`` times with derived per-run seeds.

    ``dataset_factory(run_seed)`` builds the run's dataset;
    ``trainer(dataset, run_seed)`` returns a batch predictor. Returns the
    report plus the per-run confusion matrices.
    """
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    all_rates = []
    confusions = []
    for run in range(runs):
        run_seed = derive_seed(seed, "run", run)
        dataset = dataset_factory(run_seed)
        predictor = trainer(dataset, run_seed)
        x_test, y_test = dataset.test_arrays()
        predicted = predictor(x_test)
        cm = confusion(y_test, predicted)
        confusions.append(cm)
        all_rates.append(_rates_or_fail(cm))
    return RecognitionReport(np.stack(all_rates)), confusions


# ---------------------------------------------------------------------------
# pipeline stages


def synth_corpus(cfg: PipelineConfig) -> list:
    """Generate the noisy corpus: one record per (subject, emotion)."""
    profiles = cfg.profiles()
    records = []
    for subject in cfg.all_subjects():
        for emotion in EMOTIONS:
            clean = synthgen.generate_clean(
                profiles[emotion],
                cfg.record_duration_s,
                cfg.sample_rate_hz,
                derive_seed(cfg.seed, "synth", subject, int(emotion)),
                label=emotion,
                subject_id=subject,
            )
            spec = cfg.noise_spec(derive_seed(cfg.seed, "noise", subject, int(emotion)))
            records.append(synthgen.inject_noise(clean, spec))
    return records


def design_filter(cfg: PipelineConfig) -> dsp.FirFilter:
    return dsp.design_bandpass(
        cfg.fir_low_hz, cfg.fir_high_hz, cfg.sample_rate_hz, cfg.fir_num_taps, cfg.fir_window
    )


def filter_corpus(records, cfg: PipelineConfig):
    fir = design_filter(cfg)
    if fir.warning:
        warnings.warn(fir.warning, stacklevel=2)
    return [dsp.apply(fir, record) for record in records], fir


class FeatureCache:
    """Full-width DCT coefficients for every segment of a corpus.

    Feature extraction at width n is a prefix slice, and each run's dataset
    is just a fresh balanced sample, so sweeps and repeated runs share all
    of the transform work.
    """

    def __init__(self, records, cfg: PipelineConfig):
        self.cfg = cfg
        basis = features.dct_matrix(cfg.segment_len)
        rows = []
        meta = []
        for record in records:
            for seg in dsp.segment(record, cfg.segment_len, cfg.segment_stride):
                rows.append(seg.samples)
                meta.append((int(seg.label), seg.source[0], seg.source[1]))
        if not rows:
            raise ParameterError("corpus yielded no segments")
        self.coeffs = np.stack(rows) @ basis.T
        self.labels = np.array([m[0] for m in meta], dtype=np.int64)
        self.subjects = np.array([m[1] for m in meta], dtype=np.int64)
        self.starts = np.array([m[2] for m in meta], dtype=np.int64)
        self._pools: dict[int, tuple[dict, dict]] = {}

    def _pools_at(self, n: int):
        cached = self._pools.get(n)
        if cached is not None:
            return cached
        train_set = set(self.cfg.train_subjects)
        test_set = set(self.cfg.test_subjects)
        train_pools: dict[Emotion, list] = {e: [] for e in EMOTIONS}
        test_pools: dict[Emotion, list] = {e: [] for e in EMOTIONS}
        for row in range(len(self.labels)):
            subject = int(self.subjects[row])
            if subject in train_set:
                pools = train_pools
            elif subject in test_set:
                pools = test_pools
            else:
                continue
            emotion = Emotion(int(self.labels[row]))
            pools[emotion].append(
                features.FeatureVector(
                    self.coeffs[row, :n].copy(), emotion, (subject, int(self.starts[row]))
                )
            )
        self._pools[n] = (train_pools, test_pools)
        return self._pools[n]

    def dataset(self, n: int, run_seed: int, train_size=None, test_size=None) -> Dataset:
        train_pools, test_pools = self._pools_at(n)
        rng = np.random.default_rng(run_seed)
        train = features.sample_balanced(
            train_pools, train_size or self.cfg.train_size, rng, "train"
        )
        test = features.sample_balanced(test_pools, test_size or self.cfg.test_size, rng, "test")
        dataset = Dataset(train, test, n)
        if self.cfg.zscore:
            dataset = features.standardize(dataset)
        return dataset


def tune_svm(train_arrays, cfg: PipelineConfig, seed: int) -> pso.PsoResult:
    """PSO-tune (C, gamma) by cross-validated accuracy on the training split.

    When ``pso_subsample`` is positive the fitness runs on a seed-fixed
    stratified subsample of the training data, keeping the 600-evaluation
    swarm affordable; the final model always trains on the full split.
    """
    x, codes = train_arrays
    if cfg.pso_subsample and cfg.pso_subsample < len(codes):
        rng = np.random.default_rng(derive_seed(seed, "pso-subsample"))
        keep = []
        per_class = features.balanced_counts(cfg.pso_subsample)
        for code, want in enumerate(per_class):
            idx = np.flatnonzero(codes == code)
            if len(idx) == 0:
                continue
            take = min(want, len(idx))
            keep.append(rng.choice(idx, size=take, replace=False))
        keep = np.concatenate(keep)
        x, codes = x[keep], codes[keep]
    config = cfg.pso_config(derive_seed(seed, "pso"))
    return pso.optimize((x, codes), config)


def train_classifier(dataset: Dataset, cfg: PipelineConfig, seed: int, tuned=None):
    """Train the configured classifier; returns (model, batch predictor)."""
    x, y = dataset.train_arrays()
    if cfg.classifier == "svm":
        c, gamma = tuned if tuned else (cfg.svm_c, cfg.svm_gamma)
        params = svm.SvmParams(
            c=c,
            gamma=gamma,
            tolerance=cfg.svm_tolerance,
            max_passes=cfg.svm_max_passes or None,
        )
        model = svm.train_multiclass((x, y), params, derive_seed(seed, "svm"))
        return model, lambda q: svm.predict_multiclass_batch(model, q)
    if cfg.classifier == "forest":
        model = forest.train_forest(
            x,
            y,
            num_trees=cfg.forest_trees,
            features_per_split=cfg.forest_features_per_split or None,
            seed=derive_seed(seed, "forest"),
            max_depth=cfg.forest_max_depth or None,
            min_leaf=cfg.forest_min_leaf,
        )
        return model, lambda q: forest.predict_forest_batch(model, q)
    if cfg.classifier == "knn":
        model = knn.KnnModel(x, y, cfg.knn_k, cfg.knn_metric, cfg.knn_minkowski_p)
        return model, lambda q: knn.predict_knn_batch(model, q)
    raise ParameterError(f"unknown classifier {cfg.classifier!r}")


@dataclass(eq=False)
class ProtocolResult:
    report: RecognitionReport
    confusions: list
    tuned: tuple | None = None
    pso_result: pso.PsoResult | None = None


def run_protocol(cfg: PipelineConfig, records=None) -> ProtocolResult:
    """The full reference experiment: synth -> filter -> features -> tune ->
    repeated train/score runs."""
    if records is None:
        records = synth_corpus(cfg)
        records, _ = filter_corpus(records, cfg)
    cache = FeatureCache(records, cfg)

    tuned = None
    pso_result = None
    if cfg.classifier == "svm" and cfg.svm_tune:
        first = cache.dataset(cfg.feature_count, derive_seed(cfg.seed, "run", 0))
        pso_result = tune_svm(first.train_arrays(), cfg, cfg.seed)
        tuned = (pso_result.c, pso_result.gamma)

    def factory(run_seed):
        return cache.dataset(cfg.feature_count, run_seed)

    def trainer(dataset, run_seed):
        _, predictor = train_classifier(dataset, cfg, run_seed, tuned)
        return predictor

    report, confusions = run_repeated(trainer, factory, cfg.runs, cfg.seed)
    return ProtocolResult(report, confusions, tuned, pso_result)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(eq=False)
class SweepCurve:
    parameter: str
    points: list  # (value, mean rate)
    best: int

    def values(self) -> list:
        return [v for v, _ in self.points]


def _best_value(points) -> int:
    best_value, best_rate = points[0]
    for value, rate in points[1:]:
        if rate > best_rate:
            best_value, best_rate = value, rate
    return int(best_value)


def sweep_features(cfg: PipelineConfig, records=None, values=None, runs=None) -> SweepCurve:
    """Mean recognition rate per feature count, classifier fixed at the
    configured hyperparameters."""
    values = list(values) if values is not None else cfg.sweep_features_values()
    if not values or any(v < 1 for v in values):
        raise ParameterError("feature sweep range must contain positive counts")
    if max(values) > cfg.segment_len:
        raise ParameterError("feature count cannot exceed segment length")
    runs = runs or cfg.runs
    if records is None:
        records, _ = filter_corpus(synth_corpus(cfg), cfg)
    cache = FeatureCache(records, cfg)

    points = []
    for n in values:
        def factory(run_seed, n=n):
            return cache.dataset(n, run_seed)

        def trainer(dataset, run_seed):
            _, predictor = train_classifier(dataset, cfg, run_seed)
            return predictor

        report, _ = run_repeated(trainer, factory, runs, derive_seed(cfg.seed, "sweep-features", n))
        points.append((int(n), report.overall_average))
    return SweepCurve("features", points, _best_value(points))


def sweep_trees(cfg: PipelineConfig, records=None, values=None, runs=None):
    """Rate and generalization-error curves over the learning-cycle counts.

    One forest per run is grown at the largest count; smaller counts are
    its prefix sub-ensembles (per-tree seeds make prefixes stable)."""
    values = list(values) if values is not None else cfg.sweep_trees_values()
    if not values or any(v < 1 for v in values):
        raise ParameterError("tree sweep range must contain positive counts")
    runs = runs or cfg.runs
    if records is None:
        records, _ = filter_corpus(synth_corpus(cfg), cfg)
    cache = FeatureCache(records, cfg)

    rate_rows = []
    ge_rows = []
    for run in range(runs):
        run_seed = derive_seed(cfg.seed, "sweep-trees", run)
        dataset = cache.dataset(cfg.feature_count, run_seed)
        x_train, y_train = dataset.train_arrays()
        x_test, y_test = dataset.test_arrays()
        model = forest.train_forest(
            x_train,
            y_train,
            num_trees=max(values),
            features_per_split=cfg.forest_features_per_split or None,
            seed=derive_seed(run_seed, "forest"),
            max_depth=cfg.forest_max_depth or None,
            min_leaf=cfg.forest_min_leaf,
        )
        rates = []
        ges = []
        for t in values:
            predicted = forest.predict_forest_batch(model, x_test, num_trees=t)
            rates.append(_rates_or_fail(confusion(y_test, predicted)).mean())
            ges.append(forest.generalization_error(model, (x_test, y_test), num_trees=t))
        rate_rows.append(rates)
        ge_rows.append(ges)

    mean_rates = np.mean(rate_rows, axis=0)
    mean_ges = np.mean(ge_rows, axis=0)
    rate_points = [(int(v), float(r)) for v, r in zip(values, mean_rates)]
    ge_points = [(int(v), float(g)) for v, g in zip(values, mean_ges)]
    return SweepCurve("trees", rate_points, _best_value(rate_points)), ge_points


def sweep_k(cfg: PipelineConfig, records=None, values=None, runs=None) -> SweepCurve:
    """Mean recognition rate per neighbor count; neighbor order is sorted
    once per run and shared across all k."""
    values = list(values) if values is not None else cfg.sweep_k_values()
    if not values or any(v < 1 for v in values):
        raise ParameterError("k sweep range must contain positive counts")
    runs = runs or cfg.runs
    if records is None:
        records, _ = filter_corpus(synth_corpus(cfg), cfg)
    cache = FeatureCache(records, cfg)

    rate_rows = []
    for run in range(runs):
        run_seed = derive_seed(cfg.seed, "sweep-k", run)
        dataset = cache.dataset(cfg.feature_count, run_seed)
        x_train, y_train = dataset.train_arrays()
        x_test, y_test = dataset.test_arrays()
        dists = knn._distance_matrix(cfg.knn_metric, x_test, x_train, cfg.knn_minkowski_p)
        order = np.argsort(dists, axis=1, kind="stable")
        rates = []
        for k in values:
            predicted = np.array(
                [
                    knn._vote(y_train[order[row]], dists[row][order[row]], k)
                    for row in range(len(x_test))
                ]
            )
            rates.append(_rates_or_fail(confusion(y_test, predicted)).mean())
        rate_rows.append(rates)

    mean_rates = np.mean(rate_rows, axis=0)
    points = [(int(v), float(r)) for v, r in zip(values, mean_rates)]
    return SweepCurve("k", points, _best_value(points))


# ---------------------------------------------------------------------------
# report and file rendering


def runs_csv(report: RecognitionReport) -> str:
    lines = ["run," + ",".join(e.name.lower() for e in EMOTIONS) + ",overall"]
    overall = report.per_run_overall()
    for run in range(report.num_runs):
        row = ",".join(fmt_float(v) for v in report.rates[run])
        lines.append(f"{run},{row},{fmt_float(overall[run])}")
    return "\n".join(lines) + "\n"


def parse_runs_csv(text: str) -> RecognitionReport:
    lines = [line for line in text.strip().splitlines() if line.strip()]
    expected = "run," + ",".join(e.name.lower() for e in EMOTIONS) + ",overall"
    if not lines or lines[0] != expected:
        raise DataFormatError(f"runs CSV must start with header {expected!r}")
    rates = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != NUM_CLASSES + 2:
            raise DataFormatError(f"malformed runs row: {line!r}")
        rates.append([float(v) for v in parts[1 : 1 + NUM_CLASSES]])
    if not rates:
        raise DataFormatError("runs CSV has no data rows")
    return RecognitionReport(np.array(rates))


def report_csv(report: RecognitionReport) -> str:
    lines = ["emotion,highest,lowest,average"]
    highest, lowest, average = report.highest(), report.lowest(), report.average()
    for i, emotion in enumerate(EMOTIONS):
        lines.append(
            f"{emotion.name.lower()},{fmt_float(highest[i])},"
            f"{fmt_float(lowest[i])},{fmt_float(average[i])}"
        )
    overall = report.per_run_overall()
    lines.append(
        f"overall,{fmt_float(overall.max())},{fmt_float(overall.min())},"
        f"{fmt_float(report.overall_average)}"
    )
    return "\n".join(lines) + "\n"


def report_text(report: RecognitionReport) -> str:
    """Aligned table in the style of the recognition-rate summaries."""
    names = [e.name.capitalize() for e in EMOTIONS] + ["Overall"]
    overall = report.per_run_overall()
    rows = [
        ("Highest recognition rate", list(report.highest()) + [overall.max()]),
        ("Lowest recognition rate", list(report.lowest()) + [overall.min()]),
        ("Average recognition rate", list(report.average()) + [report.overall_average]),
    ]
    label_width = max(len(r[0]) for r in rows)
    col_width = max(len(n) for n in names) + 2
    header = " " * label_width + "".join(n.rjust(col_width) for n in names)
    lines = [header]
    for label, values in rows:
        cells = "".join(fmt_percent(v).rjust(col_width) for v in values)
        lines.append(label.ljust(label_width) + cells)
    return "\n".join(lines) + "\n"


def confusion_csv(cm: ConfusionMatrix) -> str:
    lines = ["true_label," + ",".join(f"pred_{int(e)}" for e in EMOTIONS)]
    for i in range(NUM_CLASSES):
        lines.append(f"{i}," + ",".join(str(c) for c in cm.counts[i]))
    return "\n".join(lines) + "\n"


def curve_csv(parameter: str, points) -> str:
    lines = [f"{parameter},mean_rate"]
    for value, rate in points:
        lines.append(f"{value},{fmt_float(rate)}")
    return "\n".join(lines) + "\n"


def ge_curve_csv(points) -> str:
    lines = ["trees,mean_generalization_error"]
    for value, ge in points:
        lines.append(f"{value},{fmt_float(ge)}")
    return "\n".join(lines) + "\n"
