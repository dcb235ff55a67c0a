import numpy as np
import pytest

from ecgemotion import evaluation, knn
from ecgemotion.evaluation import (
    ConfusionMatrix,
    FeatureCache,
    RecognitionReport,
    confusion,
    recognition_rates,
    report_csv,
    report_text,
    run_repeated,
    runs_csv,
    parse_runs_csv,
    sweep_features,
    sweep_k,
    sweep_trees,
)
from ecgemotion.types import DataFormatError, Emotion, ParameterError
from ecgemotion.utils import fmt_percent


def test_confusion_perfect_prediction():
    labels = np.array([0, 1, 2, 3, 0, 1])
    cm = confusion(labels, labels)
    assert np.array_equal(np.diag(cm.counts), [2, 2, 1, 1])
    assert cm.counts.sum() == 6
    assert (cm.counts - np.diag(np.diag(cm.counts)) == 0).all()


def test_confusion_all_predicted_happy():
    cm = confusion([0, 1, 2, 3], [0, 0, 0, 0])
    assert cm.counts[:, 0].sum() == 4
    assert cm.counts[:, 1:].sum() == 0


def test_confusion_hand_tally():
    true_labels = [0, 0, 1, 2, 2, 3, 3, 3]
    predicted = [0, 1, 1, 2, 0, 3, 3, 2]
    cm = confusion(true_labels, predicted)
    expected = np.zeros((4, 4), dtype=int)
    expected[0, 0] = 1
    expected[0, 1] = 1
    expected[1, 1] = 1
    expected[2, 2] = 1
    expected[2, 0] = 1
    expected[3, 3] = 2
    expected[3, 2] = 1
    assert np.array_equal(cm.counts, expected)
    assert cm.counts.sum() == len(true_labels)


def test_confusion_errors():
    with pytest.raises(ParameterError):
        confusion([0, 1], [0])
    with pytest.raises(ParameterError):
        confusion([], [])


def test_recognition_rates_and_missing_rows():
    cm = confusion([0, 0, 1, 1], [0, 1, 1, 1])
    rates = recognition_rates(cm)
    assert rates[0] == 0.5 and rates[1] == 1.0
    assert rates[2] is None and rates[3] is None
    with pytest.raises(DataFormatError):
        evaluation._rates_or_fail(cm)


def test_accuracy_equals_weighted_rate_mean():
    rng = np.random.default_rng(0)
    true_labels = rng.integers(0, 4, 200)
    predicted = np.where(rng.random(200) < 0.7, true_labels, (true_labels + 1) % 4)
    cm = confusion(true_labels, predicted)
    rates = np.array(recognition_rates(cm), dtype=float)
    weights = cm.counts.sum(axis=1) / cm.counts.sum()
    assert cm.accuracy() == pytest.approx(float(np.sum(weights * rates)))
    assert cm.accuracy() == pytest.approx(np.trace(cm.counts) / cm.total)


def test_rate_formatting_matches_table_style():
    rates = (0.9251, 0.983, 0.8093, 0.9001)
    rendered = " ".join(fmt_percent(r) for r in rates)
    assert rendered == "92.51% 98.3% 80.93% 90.01%"


def test_report_summaries_ordered():
    rates = np.array(
        [
            [0.90, 0.95, 0.80, 0.88],
            [0.92, 0.99, 0.77, 0.91],
            [0.89, 0.97, 0.83, 0.90],
        ]
    )
    report = RecognitionReport(rates)
    assert (report.lowest() <= report.average()).all()
    assert (report.average() <= report.highest()).all()
    assert report.overall_average == pytest.approx(rates.mean())
    text = report_text(report)
    assert "Highest recognition rate" in text
    assert "Average recognition rate" in text
    csv = report_csv(report)
    assert csv.splitlines()[0] == "emotion,highest,lowest,average"
    assert len(csv.splitlines()) == 6  # header + four emotions + overall


def test_runs_csv_roundtrip():
    rates = np.array([[0.9, 0.8, 0.7, 0.6], [0.5, 0.4, 0.3, 0.2]])
    report = RecognitionReport(rates)
    parsed = parse_runs_csv(runs_csv(report))
    assert np.array_equal(parsed.rates, rates)


def test_parse_runs_csv_rejects_bad_header():
    with pytest.raises(DataFormatError):
        parse_runs_csv("nope\n1,2\n")


def _tiny_trainer_factory(blob_data):
    x_train, y_train, x_test, y_test = blob_data
    from ecgemotion.types import Dataset, FeatureVector

    def dataset_factory(run_seed):
        rng = np.random.default_rng(run_seed)
        idx = rng.permutation(len(x_train))[:80]
        train = [
            FeatureVector(x_train[i], Emotion(int(y_train[i])), (1, int(i))) for i in idx
        ]
        test = [
            FeatureVector(x_test[i], Emotion(int(y_test[i])), (5, int(i)))
            for i in range(0, len(x_test), 2)
        ]
        return Dataset(train, test, 2)

    def trainer(dataset, run_seed):
        x, y = dataset.train_arrays()
        model = knn.KnnModel(x, y, 3)
        return lambda q: knn.predict_knn_batch(model, q)

    return trainer, dataset_factory


def test_run_repeated_deterministic(blob_data):
    trainer, factory = _tiny_trainer_factory(blob_data)
    report_a, confusions_a = run_repeated(trainer, factory, runs=3, seed=5)
    report_b, confusions_b = run_repeated(trainer, factory, runs=3, seed=5)
    assert np.array_equal(report_a.rates, report_b.rates)
    for ca, cb in zip(confusions_a, confusions_b):
        assert np.array_equal(ca.counts, cb.counts)
    assert report_a.num_runs == 3
    for cm in confusions_a:
        assert cm.total == 100  # every second test point


def test_run_repeated_requires_runs():
    with pytest.raises(ParameterError):
        run_repeated(lambda d, s: None, lambda s: None, runs=0, seed=1)


def test_feature_cache_matches_assemble(mini_config, mini_corpus):
    from ecgemotion import features

    cache = FeatureCache(mini_corpus, mini_config)
    via_cache = cache.dataset(mini_config.feature_count, 777)
    via_assemble = features.assemble(
        mini_corpus,
        mini_config.segment_len,
        mini_config.segment_stride,
        mini_config.feature_count,
        mini_config.train_subjects,
        mini_config.test_subjects,
        mini_config.train_size,
        mini_config.test_size,
        777,
    )
    xa, ya = via_cache.train_arrays()
    xb, yb = via_assemble.train_arrays()
    assert np.allclose(xa, xb, rtol=0, atol=1e-12) and np.array_equal(ya, yb)


def test_sweep_features_points_and_determinism(mini_config, mini_corpus):
    cfg = mini_config.replace(classifier="knn", runs=1)
    curve_a = sweep_features(cfg, records=mini_corpus, values=[20, 25, 30], runs=1)
    curve_b = sweep_features(cfg, records=mini_corpus, values=[20, 25, 30], runs=1)
    assert curve_a.values() == [20, 25, 30]
    assert curve_a.points == curve_b.points
    best_rate = max(rate for _, rate in curve_a.points)
    assert dict(curve_a.points)[curve_a.best] == best_rate


def test_sweep_features_validates_range(mini_config, mini_corpus):
    with pytest.raises(ParameterError):
        sweep_features(mini_config, records=mini_corpus, values=[], runs=1)
    with pytest.raises(ParameterError):
        sweep_features(mini_config, records=mini_corpus, values=[500], runs=1)


def test_sweep_trees_curves(mini_config, mini_corpus):
    cfg = mini_config.replace(classifier="forest")
    values = [5, 10, 15]
    rate_curve, ge_points = sweep_trees(cfg, records=mini_corpus, values=values, runs=1)
    assert rate_curve.values() == values
    assert [v for v, _ in ge_points] == values
    assert all(0.0 <= g <= 1.0 for _, g in ge_points)
    again, ge_again = sweep_trees(cfg, records=mini_corpus, values=values, runs=1)
    assert rate_curve.points == again.points and ge_points == ge_again


def test_sweep_k_points(mini_config, mini_corpus):
    cfg = mini_config.replace(classifier="knn")
    curve = sweep_k(cfg, records=mini_corpus, values=list(range(1, 11)), runs=1)
    assert curve.values() == list(range(1, 11))
    assert all(0.0 <= rate <= 1.0 for _, rate in curve.points)


def test_default_sweep_ranges(mini_config):
    assert len(mini_config.sweep_features_values()) == 13
    assert len(mini_config.sweep_trees_values()) == 8
    assert len(mini_config.sweep_k_values()) == 10


def test_confusion_matrix_validation():
    with pytest.raises(ParameterError):
        ConfusionMatrix(np.zeros((3, 3), dtype=int))
    with pytest.raises(ParameterError):
        ConfusionMatrix(-np.ones((4, 4), dtype=int))
