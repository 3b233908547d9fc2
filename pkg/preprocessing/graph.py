"""Similarity graphs with locally scaled Gaussian weights.

    w_ij = exp(-(x_i - x_j)^T S (x_i - x_j) / (sigma_i * sigma_j)),  w_ii = 0

sigma_i is the local scale of sample i: the distance (or the S-weighted squared
distance) to its k-th nearest neighbour. Neighbours are ranked by Euclidean
distance with ties broken by lower row index, so every graph is reproducible.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

DEFAULT_K_LOCAL = 7
DEFAULT_SPARSIFY_K = 7


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Weight matrix W (symmetric, zero diagonal), degrees d and local scales."""
    W: np.ndarray
    d: np.ndarray
    sigma: np.ndarray
    k_local: int = DEFAULT_K_LOCAL
    sparsify_k: int = None

    @property
    def n(self):
        return self.W.shape[0]


def neighbour_order(sq_dist):
    """Row-wise neighbour ranking (self excluded, ties -> lower index)."""
    d = np.array(sq_dist, dtype=np.float64)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind='stable')


def _as_diag(s, m):
    s = np.asarray(s, dtype=np.float64)
    if s.ndim == 2:
        s = np.diag(s)
    if s.shape != (m,):
        raise ValueError(f"scaling must have {m} diagonal entries, got {s.shape}")
    return s


def local_scales(X, k=DEFAULT_K_LOCAL, S=None):
    """Local scale of every row of X from its k-th nearest neighbour.

    Without S: sigma_i = ||x_i - x_i^(k)||_2.
    With S (diagonal, given as m-vector or m x m): sigma'_i =
    (x_i - x_i^(k))^T S (x_i - x_i^(k)); the neighbour is still chosen by
    Euclidean distance.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k} with n={n}")

    sq = cdist(X, X, 'sqeuclidean')
    kth = neighbour_order(sq)[:, k - 1]
    diff = X - X[kth]
    if S is None:
        sigma = np.sqrt(np.sum(diff ** 2, axis=1))
    else:
        sigma = (diff ** 2) @ _as_diag(S, m)

    zero = np.flatnonzero(sigma <= 0.0)
    if len(zero):
        i, j = int(zero[0]), int(kth[zero[0]])
        if np.array_equal(X[i], X[j]):
            raise ValueError(
                f"zero local scale: rows {i} and {j} coincide "
                f"(duplicate rows, k={k})")
        raise ValueError(
            f"zero local scale at row {i}: scaling removes every feature "
            f"separating it from row {j}")
    return sigma


def similarity_matrix(X, S, sigma, sparsify_k=None, k_local=DEFAULT_K_LOCAL):
    """Locally scaled Gaussian similarity graph of the rows of X.

    S is the diagonal scaling (m-vector or m x m). With *sparsify_k*, w_ij is
    kept only where j is among the sparsify_k nearest neighbours of i under the
    S-metric or vice versa.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    s = _as_diag(S, m)
    if np.any(s < 0):
        raise ValueError("scaling entries must be >= 0")
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (n,):
        raise ValueError(f"sigma must have length {n}, got {sigma.shape}")
    if np.any(~(sigma > 0)):
        i = int(np.flatnonzero(~(sigma > 0))[0])
        raise ValueError(f"local scale sigma[{i}] = {sigma[i]} is not positive")

    Xs = X * np.sqrt(s)
    quad = cdist(Xs, Xs, 'sqeuclidean')
    W = np.exp(-quad / np.outer(sigma, sigma))
    np.fill_diagonal(W, 0.0)

    if sparsify_k is not None:
        if sparsify_k < 1:
            raise ValueError(f"sparsify_k must be >= 1, got {sparsify_k}")
        kk = min(sparsify_k, n - 1)
        nearest = neighbour_order(quad)[:, :kk]
        mask = np.zeros((n, n), dtype=bool)
        mask[np.repeat(np.arange(n), kk), nearest.ravel()] = True
        mask |= mask.T
        W = np.where(mask, W, 0.0)

    d = W.sum(axis=1)
    if np.any(d <= 0):
        log.warning("%d samples have zero degree (weights underflow)",
                    int(np.sum(d <= 0)))
    return SimilarityGraph(W=W, d=d, sigma=sigma, k_local=k_local,
                           sparsify_k=sparsify_k)


def build_graph(X, S=None, k_local=DEFAULT_K_LOCAL, sparsify_k=None):
    """Euclidean local scales + similarity graph in one call (S = I default)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if S is None:
        S = np.ones(X.shape[1])
    sigma = local_scales(X, k_local)
    return similarity_matrix(X, S, sigma, sparsify_k=sparsify_k,
                             k_local=k_local)


def laplacian(g):
    """(L, D) with L = D - W."""
    D = np.diag(g.d)
    return D - g.W, D
