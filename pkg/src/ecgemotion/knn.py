"""K-nearest-neighbor classifier with four distance metrics.

Metrics: Euclidean, cosine distance (1 - cosine similarity), Minkowski of
order p, and a chi-square form adapted to signed features by using
|x_i| + |y_i| + eps in the denominator (the classical statistic assumes
non-negative histogram bins, which DCT coefficients are not).

Neighbor ordering is stable: distance ties at the k-th rank go to the lower
training index. Label ties among the k neighbors go to the smaller summed
distance, then to the lower class code.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .types import DataFormatError, Emotion, NUM_CLASSES, ParameterError
from .utils import fmt_float

METRICS = ("euclidean", "cosine", "minkowski", "chisquare")
CHI_SQUARE_EPS = 1e-12
_BATCH_ROWS = 128  # chunk size for broadcasting metrics


def distance(metric: str, x, y, p: float = 2.0) -> float:
    """Distance between two equal-length vectors under the named metric."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("distance arguments must be equal-length vectors")
    if metric == "euclidean":
        return float(np.sqrt(np.sum((x - y) ** 2)))
    if metric == "cosine":
        nx = np.sqrt(np.dot(x, x))
        ny = np.sqrt(np.dot(y, y))
        if nx == 0.0 or ny == 0.0:
            raise ParameterError("cosine distance is undefined for zero vectors")
        return float(1.0 - np.dot(x, y) / (nx * ny))
    if metric == "minkowski":
        if p < 1:
            raise ParameterError("minkowski order p must be >= 1")
        return float(np.sum(np.abs(x - y) ** p) ** (1.0 / p))
    if metric == "chisquare":
        return float(np.sum((x - y) ** 2 / (np.abs(x) + np.abs(y) + CHI_SQUARE_EPS)))
    raise ParameterError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _distance_matrix(metric: str, queries: np.ndarray, train: np.ndarray, p: float) -> np.ndarray:
    if metric == "euclidean":
        qq = np.sum(queries * queries, axis=1)[:, None]
        tt = np.sum(train * train, axis=1)[None, :]
        d2 = qq + tt - 2.0 * (queries @ train.T)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)
    if metric == "cosine":
        qn = np.linalg.norm(queries, axis=1)
        tn = np.linalg.norm(train, axis=1)
        if np.any(qn == 0.0) or np.any(tn == 0.0):
            raise ParameterError("cosine distance is undefined for zero vectors")
        return 1.0 - (queries @ train.T) / np.outer(qn, tn)
    # broadcasting metrics: chunk the query rows to bound memory
    out = np.empty((len(queries), len(train)))
    for start in range(0, len(queries), _BATCH_ROWS):
        q = queries[start : start + _BATCH_ROWS, None, :]
        diff = q - train[None, :, :]
        if metric == "minkowski":
            if p < 1:
                raise ParameterError("minkowski order p must be >= 1")
            out[start : start + _BATCH_ROWS] = np.sum(np.abs(diff) ** p, axis=2) ** (1.0 / p)
        elif metric == "chisquare":
            denom = np.abs(q) + np.abs(train[None, :, :]) + CHI_SQUARE_EPS
            out[start : start + _BATCH_ROWS] = np.sum(diff**2 / denom, axis=2)
        else:
            raise ParameterError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return out


@dataclass(eq=False)
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int
    metric: str = "euclidean"
    p: float = 2.0

    def __post_init__(self):
        self.train_x = np.ascontiguousarray(self.train_x, dtype=np.float64)
        self.train_y = np.asarray(self.train_y, dtype=np.int64).ravel()
        if self.train_x.ndim != 2 or len(self.train_x) != len(self.train_y):
            raise ParameterError("training data must be (n, d) with one label per row")
        if not 1 <= self.k <= len(self.train_y):
            raise ParameterError(f"k must lie in [1, {len(self.train_y)}]")
        if self.metric not in METRICS:
            raise ParameterError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.metric == "minkowski" and self.p < 1:
            raise ParameterError("minkowski order p must be >= 1")


def _vote(sorted_labels: np.ndarray, sorted_dists: np.ndarray, k: int) -> int:
    labels = sorted_labels[:k]
    dists = sorted_dists[:k]
    counts = np.bincount(labels, minlength=NUM_CLASSES)
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) == 1:
        return int(tied[0])
    sums = np.array([dists[labels == c].sum() for c in tied])
    return int(tied[sums.argmin()])  # argmin keeps the lowest code on equal sums


def predict_knn_batch(model: KnnModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.train_x.shape[1]:
        raise ParameterError(
            f"input dimension {x.shape[1]} != training dimension {model.train_x.shape[1]}"
        )
    dists = _distance_matrix(model.metric, x, model.train_x, model.p)
    order = np.argsort(dists, axis=1, kind="stable")  # equal distances -> lower index
    out = np.empty(len(x), dtype=np.int64)
    for row in range(len(x)):
        out[row] = _vote(model.train_y[order[row]], dists[row][order[row]], model.k)
    return out


def predict_knn(model: KnnModel, x) -> Emotion:
    return Emotion(int(predict_knn_batch(model, np.asarray(x, dtype=np.float64)[None, :])[0]))


def select_k(
    x,
    y,
    k_range,
    folds: int = 5,
    seed: int = 0,
    metric: str = "euclidean",
    p: float = 2.0,
) -> tuple[int, list[tuple[int, float]]]:
    """Cross-validated misclassification loss per k; returns (best_k, curve).

    k values exceeding a fold's training size are skipped with a warning.
    Ties in the loss go to the smaller k.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64).ravel()
    k_values = sorted(set(int(k) for k in k_range))
    if not k_values:
        raise ParameterError("k_range must be non-empty")
    if k_values[0] < 1:
        raise ParameterError("k values must be >= 1")
    if folds < 2:
        raise ParameterError("folds must be >= 2")
    if len(y) < folds:
        raise ParameterError("need at least one sample per fold")

    rng = np.random.default_rng(seed)
    assignment = rng.permutation(len(y)) % folds
    errors = {k: [] for k in k_values}
    for fold in range(folds):
        val = np.flatnonzero(assignment == fold)
        fit = np.flatnonzero(assignment != fold)
        dists = _distance_matrix(metric, x[val], x[fit], p)
        order = np.argsort(dists, axis=1, kind="stable")
        for k in k_values:
            if k > len(fit):
                continue
            wrong = 0
            for row in range(len(val)):
                label = _vote(y[fit][order[row]], dists[row][order[row]], k)
                wrong += label != y[val][row]
            errors[k].append(wrong / len(val))

    curve = []
    for k in k_values:
        if not errors[k]:
            warnings.warn(f"k={k} exceeds every fold's training size; skipped", stacklevel=2)
            continue
        curve.append((k, float(np.mean(errors[k]))))
    if not curve:
        raise ParameterError("no k value was evaluable")
    best_k = min(curve, key=lambda item: (item[1], item[0]))[0]
    return best_k, curve


def save_model(model: KnnModel, path) -> None:
    with open(path, "w") as fh:
        header = f"knn v1 k={model.k} metric={model.metric}"
        if model.metric == "minkowski":
            header += f" p={fmt_float(model.p)}"
        fh.write(header + "\n")
        n = model.train_x.shape[1]
        fh.write("label," + ",".join(f"f{i}" for i in range(1, n + 1)) + "\n")
        for label, row in zip(model.train_y, model.train_x):
            fh.write(str(int(label)) + "," + ",".join(fmt_float(v) for v in row) + "\n")


def load_model(path) -> KnnModel:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) < 2 or header[0] != "knn" or header[1] != "v1":
            raise DataFormatError(f"{path}: not a knn v1 model file")
        fields = dict(item.split("=", 1) for item in header[2:])
        try:
            k = int(fields["k"])
            metric = fields["metric"]
            p = float(fields.get("p", 2.0))
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{path}: malformed knn header: {exc}") from exc
        feature_header = fh.readline().strip().split(",")
        if feature_header[:2] != ["label", "f1"]:
            raise DataFormatError(f"{path}: expected feature header after knn header")
        n = len(feature_header) - 1
        labels = []
        rows = []
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != n + 1:
                raise DataFormatError(f"{path}: bad training row")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise DataFormatError(f"{path}: no training rows")
    return KnnModel(np.array(rows), np.array(labels), k, metric, p)
