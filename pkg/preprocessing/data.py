"""Datasets for spectral feature scaling.

Provides:
- Dataset: immutable sample matrix with contiguous class ids 1..K
- load_csv(): read a labelled CSV (header row, one label column)
- write_csv(): write a Dataset back out in the same schema
- RingConfig / generate_rings(): the linked-rings toy problem
- FoldPlan / kfold_split(): deterministic stratified fold assignment
"""
import csv
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import StratifiedKFold

log = logging.getLogger(__name__)


# --------------------------------------------------------- Dataset

@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled samples. Rows of X are samples, labels are class ids 1..K.

    label_names keeps the raw label of each class id (index 0 -> class 1).
    Arrays are made read-only so a Dataset can be shared between threads.
    """
    X: np.ndarray
    labels: np.ndarray
    feature_names: tuple = None
    label_names: tuple = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        n, m = X.shape
        if labels.shape != (n,):
            raise ValueError(
                f"labels must have length {n}, got shape {labels.shape}")
        if n < 2 or m < 1:
            raise ValueError(f"need n >= 2 samples and m >= 1 features, got {n}x{m}")
        bad = np.argwhere(~np.isfinite(X))
        if len(bad):
            r, c = bad[0]
            raise ValueError(f"non-finite value at row {r + 1}, column {c + 1}")
        K = int(labels.max()) if n else 0
        if labels.min() < 1:
            raise ValueError("class ids must start at 1")
        missing = sorted(set(range(1, K + 1)) - set(labels.tolist()))
        if missing:
            raise ValueError(f"class ids {missing} have no samples")
        if K < 2:
            raise ValueError("fewer than 2 classes")
        if self.feature_names is not None and len(self.feature_names) != m:
            raise ValueError(
                f"{len(self.feature_names)} feature names for {m} features")

        X.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'labels', labels)
        if self.feature_names is None:
            object.__setattr__(self, 'feature_names',
                               tuple(f"f{j + 1}" for j in range(m)))
        else:
            object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        if self.label_names is None:
            object.__setattr__(self, 'label_names',
                               tuple(str(c) for c in range(1, K + 1)))
        else:
            object.__setattr__(self, 'label_names', tuple(self.label_names))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def K(self):
        return int(self.labels.max())

    def class_counts(self):
        """Samples per class, index 0 -> class 1."""
        return np.bincount(self.labels, minlength=self.K + 1)[1:]

    def subset(self, idx):
        """Rows *idx* as a new Dataset (all K classes must still be present)."""
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.labels[idx],
                       feature_names=self.feature_names,
                       label_names=self.label_names)


# --------------------------------------------------------- CSV ingestion

def load_csv(path, label_column='label'):
    """Read a UTF-8 CSV with a header row into a Dataset.

    Labels are re-encoded to 1..K in order of first appearance; the raw label
    strings are kept in Dataset.label_names.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"File not found: {path}")

    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path} is empty (no header row)") from None
        if label_column not in header:
            raise ValueError(
                f"label column '{label_column}' not found in {path} "
                f"(columns: {', '.join(header)})")
        li = header.index(label_column)
        feature_cols = [j for j in range(len(header)) if j != li]

        rows, raw_labels = [], []
        for r, row in enumerate(reader, 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"row {r} has {len(row)} cells, header has {len(header)}")
            values = []
            for j in feature_cols:
                cell = row[j].strip()
                try:
                    x = float(cell)
                except ValueError:
                    raise ValueError(
                        f"non-numeric value '{cell}' at row {r}, "
                        f"column {header[j]}") from None
                if not math.isfinite(x):
                    raise ValueError(
                        f"non-finite value at row {r}, column {header[j]}")
                values.append(x)
            rows.append(values)
            raw_labels.append(row[li].strip())

    codes = {}
    for lab in raw_labels:
        codes.setdefault(lab, len(codes) + 1)
    if len(codes) < 2:
        raise ValueError(f"fewer than 2 classes in column '{label_column}'")

    labels = np.array([codes[lab] for lab in raw_labels], dtype=np.int64)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_cols))
    log.info("loaded %s: %d samples, %d features, %d classes",
             path, X.shape[0], X.shape[1], len(codes))
    return Dataset(X, labels,
                   feature_names=tuple(header[j] for j in feature_cols),
                   label_names=tuple(codes))


def write_csv(ds, path, label_column='label'):
    """Write *ds* as CSV (features then label column). Floats use repr()
    so a reload is bit-identical."""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(list(ds.feature_names) + [label_column])
        for x, c in zip(ds.X, ds.labels):
            writer.writerow([repr(float(v)) for v in x]
                            + [ds.label_names[c - 1]])


# --------------------------------------------------------- Synthetic linked rings

# Ring geometry. Class c lies on a circle of radius _RING_RADIUS centred at
# (c - (K+1)/2) * _RING_SPACING on feature 2; odd classes lie in the (f2, f1)
# plane, even classes in the (f2, f3) plane, so neighbouring rings are linked
# like a chain (spacing < 2 * radius). Radial and out-of-plane Gaussian noise
# have std _RING_NOISE. For K = 3 the population variances of f1, f2, f3 are
#   R^2/3 + 2 tau^2/3 = 0.35,   (R^2 + tau^2)/2 + 2 D^2/3 = 2.01,
#   R^2/6 + 5 tau^2/6 = 0.19.
_RING_RADIUS = math.sqrt(0.99)
_RING_NOISE = math.sqrt(0.03)
_RING_SPACING = 1.5


@dataclass(frozen=True)
class RingConfig:
    """Linked-rings toy problem: 3 informative features + Gaussian noise."""
    samples_per_class: int = 200
    num_classes: int = 3
    num_features: int = 10
    noise_variance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_features < 3:
            raise ValueError("num_features must be >= 3 (3 informative features)")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be > 0")


def generate_rings(cfg):
    """Generate the rings dataset. Output depends only on *cfg*."""
    rng = np.random.default_rng(cfg.seed)
    K, n_c = cfg.num_classes, cfg.samples_per_class
    blocks = []
    for c in range(1, K + 1):
        theta = rng.uniform(0.0, 2.0 * np.pi, n_c)
        radius = _RING_RADIUS + _RING_NOISE * rng.standard_normal(n_c)
        off_plane = _RING_NOISE * rng.standard_normal(n_c)
        along = (c - (K + 1) / 2.0) * _RING_SPACING + radius * np.cos(theta)
        across = radius * np.sin(theta)
        block = np.empty((n_c, 3))
        block[:, 1] = along
        if c % 2:
            block[:, 0], block[:, 2] = across, off_plane
        else:
            block[:, 0], block[:, 2] = off_plane, across
        blocks.append(block)

    informative = np.vstack(blocks)
    noise = rng.normal(0.0, math.sqrt(cfg.noise_variance),
                       (K * n_c, cfg.num_features - 3))
    X = np.hstack([informative, noise])
    labels = np.repeat(np.arange(1, K + 1), n_c)
    return Dataset(X, labels)


# --------------------------------------------------------- Fold splitting

@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold index (1..k) of every sample."""
    assignments: np.ndarray
    k: int
    seed: int = 0

    def train_test(self, fold):
        """(train_idx, test_idx) for fold number *fold* (1-based)."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def folds(self):
        for f in range(1, self.k + 1):
            yield (f,) + self.train_test(f)


def kfold_split(ds, k, seed=0):
    """Stratified k-fold plan. Per class, fold sizes differ by at most one."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    counts = ds.class_counts()
    for c, count in enumerate(counts, 1):
        if count < k:
            raise ValueError(
                f"class {c} has {count} samples, fewer than k={k} folds")

    skf = StratifiedKFold(n_splits=k, shuffle=True,
                          random_state=int(seed) % (2 ** 32))
    assignments = np.zeros(ds.n, dtype=np.int64)
    for f, (_, test) in enumerate(skf.split(ds.X, ds.labels), 1):
        assignments[test] = f
    assignments.setflags(write=False)
    return FoldPlan(assignments=assignments, k=k, seed=seed)
