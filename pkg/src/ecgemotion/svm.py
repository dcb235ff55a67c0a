"""Soft-margin RBF-kernel SVM trained by pairwise dual coordinate ascent.

The binary trainer optimizes the dual of

    minimize 1/2 ||w||^2 + C * sum_i xi_i
    s.t.     y_i (w.x_i + b) >= 1 - xi_i,  xi_i >= 0

by repeatedly picking the pair of multipliers with the largest KKT
violation (one from the "can increase" set, one from the "can decrease"
set), solving the two-variable subproblem analytically, and clipping to
the box [0, C]. Exact ties in the violation scores are broken randomly
from the seed. Multiclass is one-vs-one over the six emotion pairs with
majority voting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import (
    Dataset,
    DataFormatError,
    Emotion,
    EMOTIONS,
    NUM_CLASSES,
    ParameterError,
)
from .utils import derive_seed, fmt_float

_EPS = 1e-12


@dataclass
class SvmParams:
    """Penalty C, RBF width gamma (= 1 / (2 sigma^2)), and solver knobs."""

    c: float
    gamma: float
    tolerance: float = 1e-3
    max_passes: int | None = None  # None -> 10 * n_samples

    def __post_init__(self):
        if self.c <= 0:
            raise ParameterError("c must be positive")
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be positive")


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); always in (0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ParameterError(f"kernel argument shapes differ: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of a and of b."""
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def rbf_kernel_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * pairwise_sq_dists(a, b))


def _masked_argmax(values: np.ndarray, mask: np.ndarray, rng: np.random.Generator) -> int:
    scores = np.where(mask, values, -np.inf)
    best = scores.max()
    if best == -np.inf:
        return -1
    candidates = np.flatnonzero(scores == best)
    if len(candidates) == 1:
        return int(candidates[0])
    return int(rng.choice(candidates))


def solve_dual(
    kmat: np.ndarray,
    y: np.ndarray,
    c: float,
    tolerance: float,
    max_steps: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """Maximize the SVM dual for a precomputed kernel matrix.

    Returns (alpha, bias). Stops when no pair violates the KKT conditions
    by more than ``tolerance`` or after ``max_steps`` pair updates.
    """
    n = len(y)
    alpha = np.zeros(n)
    # e_i = f_i - y_i where f_i = sum_j alpha_j y_j K(x_j, x_i), bias excluded
    e = -y.astype(np.float64)

    for _ in range(max_steps):
        can_up = ((y > 0) & (alpha < c - _EPS)) | ((y < 0) & (alpha > _EPS))
        can_dn = ((y < 0) & (alpha < c - _EPS)) | ((y > 0) & (alpha > _EPS))
        i = _masked_argmax(-e, can_up, rng)
        j = _masked_argmax(e, can_dn, rng)
        if i < 0 or j < 0 or e[j] - e[i] <= tolerance:
            break

        y1, y2 = y[i], y[j]
        a1, a2 = alpha[i], alpha[j]
        if y1 != y2:
            low, high = max(0.0, a2 - a1), min(c, c + a2 - a1)
        else:
            low, high = max(0.0, a1 + a2 - c), min(c, a1 + a2)
        if high - low < _EPS:
            break

        eta = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
        if eta < _EPS:
            eta = _EPS
        a2_new = np.clip(a2 + y2 * (e[i] - e[j]) / eta, low, high)
        if a2_new == a2:
            break
        a1_new = a1 + y1 * y2 * (a2 - a2_new)

        # Snap to the box so the support set stays exact.
        if a1_new < _EPS:
            a1_new = 0.0
        elif a1_new > c - _EPS:
            a1_new = c
        if a2_new < _EPS:
            a2_new = 0.0
        elif a2_new > c - _EPS:
            a2_new = c

        d1 = (a1_new - a1) * y1
        d2 = (a2_new - a2) * y2
        e += d1 * kmat[i] + d2 * kmat[j]
        alpha[i] = a1_new
        alpha[j] = a2_new

    free = (alpha > _EPS) & (alpha < c - _EPS)
    if free.any():
        bias = float(np.mean(-e[free]))  # y - f == -e
    else:
        can_up = ((y > 0) & (alpha < c - _EPS)) | ((y < 0) & (alpha > _EPS))
        can_dn = ((y < 0) & (alpha < c - _EPS)) | ((y > 0) & (alpha > _EPS))
        neg_e = -e
        lo_bound = neg_e[can_up].max() if can_up.any() else None
        hi_bound = neg_e[can_dn].min() if can_dn.any() else None
        if lo_bound is not None and hi_bound is not None:
            bias = float(0.5 * (lo_bound + hi_bound))
        elif lo_bound is not None:
            bias = float(lo_bound)
        elif hi_bound is not None:
            bias = float(hi_bound)
        else:
            bias = 0.0
    return alpha, bias


@dataclass(eq=False)
class BinarySvmModel:
    """Support vectors, their alpha_i * y_i coefficients, and the bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    params: SvmParams
    alpha: np.ndarray | None = None  # full training alphas, kept for diagnostics

    @property
    def num_support(self) -> int:
        return len(self.dual_coefs)


def train_binary(x, y, params: SvmParams, seed: int = 0) -> BinarySvmModel:
    """Train a binary RBF-SVM on labels in {-1, +1}."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2 or len(x) != len(y):
        raise ParameterError("x must be (n, d) with one label per row")
    if len(y) < 2:
        raise ParameterError("need at least two training points")
    labels = set(np.unique(y))
    if not labels <= {-1.0, 1.0}:
        raise ParameterError("binary labels must be -1 or +1")
    if len(labels) < 2:
        raise ParameterError("both classes must be present")

    n = len(y)
    max_steps = params.max_passes if params.max_passes else 10 * n
    rng = np.random.default_rng(seed)
    kmat = rbf_kernel_matrix(x, x, params.gamma)
    alpha, bias = solve_dual(kmat, y, params.c, params.tolerance, max_steps, rng)

    sv = alpha > 0.0
    return BinarySvmModel(
        support_vectors=x[sv].copy(),
        dual_coefs=(alpha * y)[sv],
        bias=bias,
        params=params,
        alpha=alpha,
    )


def decision_values(model: BinarySvmModel, x: np.ndarray) -> np.ndarray:
    """Raw decision values for a batch of inputs; sign gives the class."""
    if model.num_support == 0:
        raise ParameterError("model has no support vectors")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.support_vectors.shape[1]:
        raise ParameterError(
            f"input dimension {x.shape[1]} != support vector dimension "
            f"{model.support_vectors.shape[1]}"
        )
    k = rbf_kernel_matrix(x, model.support_vectors, model.params.gamma)
    return k @ model.dual_coefs + model.bias


def predict_binary(model: BinarySvmModel, x) -> float:
    """Signed decision value for a single input."""
    return float(decision_values(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def kkt_max_violation(model: BinarySvmModel, x, y) -> float:
    """Largest KKT residual of a trained model over its training set."""
    if model.alpha is None:
        raise ParameterError("model carries no training alphas")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(x) != len(model.alpha):
        raise ParameterError("x does not match the model's training set size")
    g = decision_values(model, x)
    yg = y * g
    c = model.params.c
    worst = 0.0
    for alpha_i, margin in zip(model.alpha, yg):
        if alpha_i <= _EPS:
            residual = max(0.0, 1.0 - margin)
        elif alpha_i >= c - _EPS:
            residual = max(0.0, margin - 1.0)
        else:
            residual = abs(margin - 1.0)
        worst = max(worst, residual)
    return worst


@dataclass(eq=False)
class MulticlassSvmModel:
    """One binary model per unordered emotion pair, combined by voting."""

    models: dict
    feature_count: int
    params: SvmParams


def _as_arrays(train) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(train, Dataset):
        return train.train_arrays()
    x, y = train
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)


def train_multiclass(train, params: SvmParams, seed: int = 0) -> MulticlassSvmModel:
    """Train all six pairwise models on the pair-restricted subsets."""
    x, codes = _as_arrays(train)
    present = set(int(c) for c in np.unique(codes))
    missing = [e.name for e in EMOTIONS if int(e) not in present]
    if missing:
        raise ParameterError(f"training data lacks emotions: {', '.join(missing)}")

    models = {}
    for a in range(NUM_CLASSES):
        for b in range(a + 1, NUM_CLASSES):
            mask = (codes == a) | (codes == b)
            y_pair = np.where(codes[mask] == a, 1.0, -1.0)
            models[(a, b)] = train_binary(
                x[mask], y_pair, params, derive_seed(seed, "pair", a, b)
            )
    return MulticlassSvmModel(models, x.shape[1], params)


def predict_multiclass_batch(model: MulticlassSvmModel, x) -> np.ndarray:
    """Predicted emotion codes by one-vs-one majority vote (ties -> lowest code)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    votes = np.zeros((len(x), NUM_CLASSES), dtype=np.int64)
    for (a, b), binary in model.models.items():
        decisions = decision_values(binary, x)
        votes[:, a] += decisions >= 0
        votes[:, b] += decisions < 0
    return votes.argmax(axis=1)


def predict_multiclass(model: MulticlassSvmModel, x) -> Emotion:
    code = predict_multiclass_batch(model, np.asarray(x, dtype=np.float64)[None, :])[0]
    return Emotion(int(code))


def save_model(model: MulticlassSvmModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(
            f"svm v1 classes={NUM_CLASSES} gamma={fmt_float(model.params.gamma)} "
            f"c={fmt_float(model.params.c)} features={model.feature_count}\n"
        )
        for (a, b), binary in sorted(model.models.items()):
            fh.write(f"pair {a} {b} bias={fmt_float(binary.bias)} nsv={binary.num_support}\n")
            for coef, sv in zip(binary.dual_coefs, binary.support_vectors):
                fh.write(fmt_float(coef) + "," + ",".join(fmt_float(v) for v in sv) + "\n")


def load_model(path) -> MulticlassSvmModel:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) < 2 or header[0] != "svm" or header[1] != "v1":
            raise DataFormatError(f"{path}: not an svm v1 model file")
        fields = dict(item.split("=", 1) for item in header[2:])
        try:
            gamma = float(fields["gamma"])
            c = float(fields["c"])
            feature_count = int(fields["features"])
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{path}: malformed svm header: {exc}") from exc
        params = SvmParams(c=c, gamma=gamma)

        models = {}
        line = fh.readline()
        while line:
            parts = line.split()
            if len(parts) != 5 or parts[0] != "pair":
                raise DataFormatError(f"{path}: malformed pair line: {line.strip()!r}")
            a, b = int(parts[1]), int(parts[2])
            bias = float(parts[3].split("=", 1)[1])
            nsv = int(parts[4].split("=", 1)[1])
            coefs = np.empty(nsv)
            vectors = np.empty((nsv, feature_count))
            for row in range(nsv):
                values = fh.readline().strip().split(",")
                if len(values) != feature_count + 1:
                    raise DataFormatError(f"{path}: bad support vector row for pair {a},{b}")
                coefs[row] = float(values[0])
                vectors[row] = [float(v) for v in values[1:]]
            models[(a, b)] = BinarySvmModel(vectors, coefs, bias, params)
            line = fh.readline()

    expected = NUM_CLASSES * (NUM_CLASSES - 1) // 2
    if len(models) != expected:
        raise DataFormatError(f"{path}: expected {expected} pairwise models, found {len(models)}")
    return MulticlassSvmModel(models, feature_count, params)
