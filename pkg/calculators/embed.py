"""Spectral embedding of scaled train + test samples.

Z = [X; Y] S^(1/2) (training rows first) is turned into a 7-NN sparsified,
locally scaled Gaussian graph W' over all rows, and the generalized problem
L' u = lambda' D' u is solved densely. The embedding keeps the eigenvectors of
the ell smallest eigenvalues above the zero threshold (1e-10 * lambda_max).
The embedding is transductive: test rows take part in the graph.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from preprocessing.graph import (DEFAULT_K_LOCAL, DEFAULT_SPARSIFY_K,
                                 laplacian, neighbour_order,
                                 similarity_matrix)

log = logging.getLogger(__name__)

ZERO_EIG_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Embedding:
    """U: (n_train + n_test) x ell, D'-orthonormal columns; eigenvalues ascending."""
    U: np.ndarray
    eigenvalues: np.ndarray
    n_train: int
    n_test: int
    graph: object = None
    components: int = 1

    @property
    def ell(self):
        return self.U.shape[1]

    @property
    def train_rows(self):
        return range(0, self.n_train)

    @property
    def test_rows(self):
        return range(self.n_train, self.n_train + self.n_test)

    @property
    def train(self):
        return self.U[:self.n_train]

    @property
    def test(self):
        return self.U[self.n_train:]

    def truncate(self, ell):
        """First *ell* columns (the ell smallest nonzero eigenvalues)."""
        if not 1 <= ell <= self.ell:
            raise ValueError(f"ell must be in [1, {self.ell}], got {ell}")
        return replace(self, U=self.U[:, :ell], eigenvalues=self.eigenvalues[:ell])


def apply_scaling(X, Y, s_half):
    """Z = [X; Y] diag(s_half), training rows first."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    s_half = np.asarray(s_half, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y.reshape(-1, X.shape[1]) if Y.size else np.empty((0, X.shape[1]))
    if s_half.ndim == 2:
        s_half = np.diag(s_half)
    m = X.shape[1]
    if Y.shape[1] != m or s_half.shape != (m,):
        raise ValueError(
            f"dimension mismatch: X has {m} features, Y {Y.shape[1]}, "
            f"s_half {s_half.shape[0]}")
    return np.vstack([X, Y]) * s_half


def embedding_scales(Z, k=DEFAULT_K_LOCAL):
    """Euclidean local scales over all rows of Z.

    A row whose k-th neighbour coincides with it gets the distance to its
    nearest non-identical row instead.
    """
    sq = cdist(Z, Z, 'sqeuclidean')
    n = Z.shape[0]
    kk = min(k, n - 1)
    kth = neighbour_order(sq)[:, kk - 1]
    sigma = np.sqrt(sq[np.arange(n), kth])

    zero = np.flatnonzero(sigma <= 0.0)
    for i in zero:
        dist = np.sqrt(sq[i])
        pos = dist[dist > 0.0]
        if pos.size == 0:
            raise ValueError("all rows of the scaled data coincide")
        sigma[i] = pos.min()
    if len(zero):
        log.warning("%d samples had a zero local scale (duplicate rows); "
                    "using the nearest non-identical row", len(zero))
    return sigma


def spectral_embed(Z, ell, k_local=DEFAULT_K_LOCAL,
                   sparsify_k=DEFAULT_SPARSIFY_K, n_train=None):
    """ell-dimensional spectral embedding of the rows of Z.

    n_train marks the first n_train rows as training rows (default: all).
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    N = Z.shape[0]
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    if N <= ell + 1:
        raise ValueError(f"need more than ell + 1 = {ell + 1} rows, got {N}")
    n_train = N if n_train is None else int(n_train)

    sigma = embedding_scales(Z, k_local)
    g = similarity_matrix(Z, np.ones(Z.shape[1]), sigma,
                          sparsify_k=sparsify_k, k_local=k_local)
    components, _ = connected_components(csr_matrix(g.W > 0), directed=False)
    if components > ell + 1:
        raise ValueError(
            f"similarity graph has {components} connected components, "
            f"more than ell + 1 = {ell + 1}")
    if np.any(g.d <= 0):
        raise ValueError(
            f"{int(np.sum(g.d <= 0))} samples have zero degree in the "
            f"embedding graph")

    L, D = laplacian(g)
    lam, vecs = la.eigh(L, D)
    threshold = ZERO_EIG_RTOL * lam[-1]
    keep = np.flatnonzero(lam > threshold)[:ell]
    if keep.size < ell:
        raise ValueError(
            f"only {keep.size} nonzero eigenvalues available for ell={ell}")
    zeros = int(np.sum(lam <= threshold))
    if zeros != components:
        log.info("%d zero eigenvalues for %d graph components", zeros, components)

    U = vecs[:, keep]
    # sign convention: largest-magnitude entry of each column is positive
    peak = np.argmax(np.abs(U), axis=0)
    U = U * np.where(U[peak, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    return Embedding(U=U, eigenvalues=lam[keep], n_train=n_train,
                     n_test=N - n_train, graph=g, components=int(components))


def embedding_checks(emb):
    """Worst-case violations of the embedding invariants.

    orthonormality  max |U^T D' U - I|
    constraint      max |1^T D' u_a|
    residual        max ||L' u_a - lambda_a D' u_a|| / ||L'||_F
    """
    L, D = laplacian(emb.graph)
    U = emb.U
    DU = D @ U
    ortho = np.max(np.abs(U.T @ DU - np.eye(U.shape[1])))
    constraint = np.max(np.abs(DU.sum(axis=0)))
    res = L @ U - DU * emb.eigenvalues
    resid = np.max(np.linalg.norm(res, axis=0)) / np.linalg.norm(L, 'fro')
    return {
        'orthonormality': float(ortho),
        'constraint': float(constraint),
        'residual': float(resid),
    }
