"""Linear matrix pencils whose eigenvectors carry feature scaling factors.

For a prescribed indicator vector v (entries 1 / -b) the relaxed Laplacian
eigenproblem of the linearised similarity graph

    W_lin(s)_ij = 1 - s^T x_ij / (sigma_i sigma_j)     (i != j),
    x_ij[k]     = (x_ik - x_jk)^2

is rewritten as  A_full [s; -1] = mu B_full [s; -1]  with mu = 1 - lambda.
Rows 1..n reproduce  W_lin(s) v = mu D_lin(s) v  and the last row carries the
constraint  e^T D_lin(s) v = 0.

Splits follow the class labels: one split per class, or one per bit of the
binary code of (class - 1).
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger(__name__)

SPLIT_MODES = ('one_per_class', 'binary_code')


# --------------------------------------------------------- Binary splits

@dataclass(frozen=True, eq=False)
class BinarySplit:
    """Two-cluster split of the training labels.

    t_i = +1 for samples in positive_classes, -1 otherwise;
    v_i = 1 where t_i = +1 and -b elsewhere.
    """
    positive_classes: frozenset
    t: np.ndarray
    b: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        if not np.all(np.abs(t) == 1):
            raise ValueError("t must contain only +1 / -1")
        if not (np.any(t > 0) and np.any(t < 0)):
            raise ValueError(
                f"split {sorted(self.positive_classes)} is single-signed")
        if not self.b > 0:
            raise ValueError(f"balance parameter b must be > 0, got {self.b}")
        t.setflags(write=False)
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'positive_classes',
                           frozenset(self.positive_classes))

    @property
    def v(self):
        return np.where(self.t > 0, 1.0, -self.b)

    def with_balance(self, b):
        return replace(self, b=float(b))

    def flipped(self, all_classes):
        """Same split with the other side positive (b becomes 1/b)."""
        return BinarySplit(frozenset(all_classes) - self.positive_classes,
                           -self.t, 1.0 / self.b)


@dataclass(frozen=True)
class SplitScheme:
    splits: tuple
    mode: str

    @property
    def r(self):
        return len(self.splits)


def make_splits(labels, K, mode='one_per_class'):
    """Prescribe the r binary splits of the K training classes.

    one_per_class: split p has positive class {p} (a single split when K = 2).
    binary_code:   ceil(log2 K) splits; class c is positive in split p when bit
                   p (most significant first) of c - 1 is set.
    """
    labels = np.asarray(labels)
    if K < 2:
        raise ValueError(f"need K >= 2 classes, got {K}")
    if mode not in SPLIT_MODES:
        raise ValueError(f"split mode must be one of {SPLIT_MODES}, got '{mode}'")

    if mode == 'one_per_class':
        positives = [{1}] if K == 2 else [{p} for p in range(1, K + 1)]
    else:
        bits = max(1, math.ceil(math.log2(K)))
        positives = [
            {c for c in range(1, K + 1) if ((c - 1) >> (bits - 1 - p)) & 1}
            for p in range(bits)
        ]

    splits = []
    for pos in positives:
        t = np.where(np.isin(labels, sorted(pos)), 1, -1)
        if np.all(t > 0) or np.all(t < 0):
            raise ValueError(
                f"{mode} split with positive classes {sorted(pos)} is "
                f"single-signed on these labels")
        splits.append(BinarySplit(frozenset(pos), t))

    codes = {tuple(int(s.t[i]) for s in splits) for i in range(len(labels))}
    present = len(np.unique(labels))
    if len(codes) != present:
        raise ValueError(
            f"{mode} splits do not give every class a unique indicator code")
    return SplitScheme(splits=tuple(splits), mode=mode)


def balance_param(split, graph_unscaled):
    """b = sum of degrees on the positive side / sum on the negative side."""
    d = graph_unscaled.d
    pos = float(np.sum(d[split.t > 0]))
    neg = float(np.sum(d[split.t < 0]))
    if neg <= 0:
        raise ValueError("negative side of the split has zero total degree")
    return pos / neg


# --------------------------------------------------------- Pencil assembly

@dataclass(frozen=True, eq=False)
class PencilPair:
    """(A_full, B_full) of one split, or several stacked splits."""
    A_full: np.ndarray
    B_full: np.ndarray
    splits: tuple = ()

    @property
    def split(self):
        return self.splits[0] if len(self.splits) == 1 else None

    @property
    def m(self):
        return self.A_full.shape[1] - 1

    @property
    def shape(self):
        return self.A_full.shape


def pair_distance_terms(X, sigma, weights):
    """Row i: sum_j weights_j x_ij / (sigma_i sigma_j), for every i (n x m)."""
    X = np.asarray(X, dtype=np.float64)
    c = np.asarray(weights, dtype=np.float64) / sigma
    out = np.empty_like(X)
    for i in range(X.shape[0]):
        out[i] = c @ (X - X[i]) ** 2
    return out / sigma[:, None]


def assemble_pencil(X, v, sigma, split=None):
    """Assemble A_full, B_full ((n+1) x (m+1)) for the indicator vector v.

    A rows  (X_i v)^T | alpha_i = sum_{j != i} v_j
    B rows  v_i xhat_i^T | beta_i = (n - 1) v_i
    A last  gamma^T = sum_i v_i xhat_i | rho = (n - 1) sum_i v_i
    B last  zeros
    where xhat_i = sum_j x_ij / (sigma_i sigma_j).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    v = np.asarray(v, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if v.shape != (n,) or sigma.shape != (n,):
        raise ValueError(f"v and sigma must have length {n}")

    A = pair_distance_terms(X, sigma, v)
    xhat = pair_distance_terms(X, sigma, np.ones(n))
    B = v[:, None] * xhat
    alpha = v.sum() - v
    beta = (n - 1) * v
    gamma = v @ xhat
    rho = (n - 1) * v.sum()

    A_full = np.zeros((n + 1, m + 1))
    A_full[:n, :m] = A
    A_full[:n, m] = alpha
    A_full[n, :m] = gamma
    A_full[n, m] = rho
    B_full = np.zeros((n + 1, m + 1))
    B_full[:n, :m] = B
    B_full[:n, m] = beta

    if not (np.all(np.isfinite(A_full)) and np.all(np.isfinite(B_full))):
        raise ValueError("pencil has non-finite entries (degenerate local scales)")
    splits = (split,) if split is not None else ()
    return PencilPair(A_full, B_full, splits)


def stack_pencils(pairs):
    """Stack several pencils vertically (common-eigenpair formulation)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pencils to stack")
    cols = {p.A_full.shape[1] for p in pairs} | {p.B_full.shape[1] for p in pairs}
    if len(cols) != 1:
        raise ValueError(f"pencils have mismatched column counts {sorted(cols)}")
    if len(pairs) == 1:
        return pairs[0]
    return PencilPair(np.vstack([p.A_full for p in pairs]),
                      np.vstack([p.B_full for p in pairs]),
                      tuple(s for p in pairs for s in p.splits))
