"""DCT feature extraction and dataset assembly.

The transform is the orthonormal DCT-II:

    y(k) = w(k) * sum_{n=1..N} x(n) * cos(pi * (2n - 1) * (k - 1) / (2N))

with w(1) = 1/sqrt(N) and w(k) = sqrt(2/N) for k >= 2. It is energy
preserving, and its leading coefficients carry decreasing energy for
smooth signals, so truncating to the first n coefficients is the feature
extraction step. Coefficients are kept in natural index order; a
per-segment magnitude sort would destroy alignment across segments.
"""

from __future__ import annotations

import warnings

import numpy as np

from .types import (
    DataFormatError,
    Dataset,
    Emotion,
    EMOTIONS,
    FeatureVector,
    ParameterError,
    Segment,
)
from .utils import fmt_float

from . import dsp

_BASIS_CACHE: dict[int, np.ndarray] = {}


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k is the k-th cosine basis vector."""
    if n < 1:
        raise ParameterError("transform length must be >= 1")
    cached = _BASIS_CACHE.get(n)
    if cached is not None:
        return cached
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    basis = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    basis[0] *= 1.0 / np.sqrt(n)
    basis[1:] *= np.sqrt(2.0 / n)
    basis.setflags(write=False)
    _BASIS_CACHE[n] = basis
    return basis


def dct(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("dct input must be a non-empty 1-D sequence")
    return dct_matrix(len(x)) @ x


def idct(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise ParameterError("idct input must be a non-empty 1-D sequence")
    return dct_matrix(len(y)).T @ y


def extract(seg: Segment, n: int) -> FeatureVector:
    """First n DCT coefficients of a segment, in natural index order."""
    if not 1 <= n <= len(seg):
        raise ParameterError(f"feature count {n} outside [1, {len(seg)}]")
    coeffs = dct_matrix(len(seg))[:n] @ seg.samples
    return FeatureVector(coeffs, seg.label, seg.source)


def standardize(dataset: Dataset) -> Dataset:
    """Z-score both splits using per-feature statistics of the training split."""
    x_train, _ = dataset.train_arrays()
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std[std == 0.0] = 1.0

    def scale(vectors):
        return [FeatureVector((fv.values - mean) / std, fv.label, fv.source) for fv in vectors]

    return Dataset(scale(dataset.train), scale(dataset.test), dataset.feature_count)


def balanced_counts(total: int, classes: int = len(EMOTIONS)) -> list[int]:
    """Split a total across classes, lower class codes taking the remainder."""
    base, rem = divmod(total, classes)
    return [base + (1 if i < rem else 0) for i in range(classes)]


def sample_balanced(
    pools: dict[Emotion, list[FeatureVector]],
    total: int,
    rng: np.random.Generator,
    side: str,
) -> list[FeatureVector]:
    """Class-balanced sample; resamples with replacement when a pool is short."""
    counts = balanced_counts(total)
    chosen: list[FeatureVector] = []
    for emotion, want in zip(EMOTIONS, counts):
        pool = pools.get(emotion, [])
        if want == 0:
            continue
        if not pool:
            raise ParameterError(f"no {side} segments available for emotion {emotion.name}")
        replace = len(pool) < want
        if replace:
            warnings.warn(
                f"{side} pool for {emotion.name} has {len(pool)} segments; "
                f"sampling {want} with replacement",
                stacklevel=2,
            )
        idx = rng.choice(len(pool), size=want, replace=replace)
        chosen.extend(pool[i] for i in idx)
    order = rng.permutation(len(chosen))
    return [chosen[i] for i in order]


def assemble(
    records,
    segment_len: int,
    stride: int,
    n: int,
    train_subjects,
    test_subjects,
    train_size: int,
    test_size: int,
    seed: int,
) -> Dataset:
    """Segment records, extract features, and draw a balanced train/test split.

    Subject groups must be disjoint so train and test never share segment
    provenance. Deterministic for a fixed seed.
    """
    train_set = set(int(s) for s in train_subjects)
    test_set = set(int(s) for s in test_subjects)
    overlap = train_set & test_set
    if overlap:
        raise ParameterError(f"train/test subject sets overlap: {sorted(overlap)}")
    if train_size < 1 or test_size < 1:
        raise ParameterError("train_size and test_size must be >= 1")

    train_pools: dict[Emotion, list[FeatureVector]] = {e: [] for e in EMOTIONS}
    test_pools: dict[Emotion, list[FeatureVector]] = {e: [] for e in EMOTIONS}
    for record in records:
        if record.subject_id in train_set:
            pools = train_pools
        elif record.subject_id in test_set:
            pools = test_pools
        else:
            continue
        for seg in dsp.segment(record, segment_len, stride):
            pools[seg.label].append(extract(seg, n))

    rng = np.random.default_rng(seed)
    train = sample_balanced(train_pools, train_size, rng, "train")
    test = sample_balanced(test_pools, test_size, rng, "test")
    return Dataset(train, test, n)


def save_features(vectors, path) -> None:
    """Write feature vectors as CSV: header label,f1..fn then one row per vector."""
    vectors = list(vectors)
    if not vectors:
        raise ParameterError("no feature vectors to write")
    n = len(vectors[0])
    with open(path, "w") as fh:
        fh.write("label," + ",".join(f"f{i}" for i in range(1, n + 1)) + "\n")
        for fv in vectors:
            fh.write(str(int(fv.label)) + "," + ",".join(fmt_float(v) for v in fv.values) + "\n")


def load_features(path) -> list[FeatureVector]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) < 2 or header[0] != "label" or header[1] != "f1":
            raise DataFormatError(f"{path}: expected feature header 'label,f1..fn'")
        n = len(header) - 1
        vectors = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != n + 1:
                raise DataFormatError(f"{path}:{lineno}: expected {n + 1} columns, got {len(parts)}")
            try:
                label = Emotion.from_code(int(parts[0]))
                values = np.array([float(p) for p in parts[1:]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            vectors.append(FeatureVector(values, label, (-1, lineno)))
    if not vectors:
        raise DataFormatError(f"{path}: no feature rows")
    return vectors
