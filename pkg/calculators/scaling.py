"""Integrate per-split scaling candidates into one diagonal scaling.

Each converged split p yields a candidate vector s^(p) (m entries). Candidates
may be negative, so the sign policy takes shat_ip = sqrt(|s_i^(p)|). The r
columns are then reduced row-wise to s_i^(1/2) by one of the methods below.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy import stats

log = logging.getLogger(__name__)

INTEGRATION_METHODS = ('pca', 'arithmetic', 'geometric', 'rms', 'harmonic')
SIGN_POLICY = 'absolute_value'


@dataclass(frozen=True, eq=False)
class ScalingResult:
    """candidates: m x r (column p from split p); integrated: m-vector s^(1/2)."""
    candidates: np.ndarray
    integrated: np.ndarray
    method: str
    sign_policy: str = SIGN_POLICY
    clamped: int = 0

    @property
    def m(self):
        return self.integrated.shape[0]

    def to_dict(self):
        return {
            'method': self.method,
            'sign_policy': self.sign_policy,
            'clamped': self.clamped,
            'integrated': [float(x) for x in self.integrated],
            'candidates': self.candidates.tolist(),
        }


def candidate_matrix(factor_vectors):
    """m x r matrix sqrt(|s^(p)|) from r raw factor vectors."""
    cols = [np.sqrt(np.abs(np.asarray(s, dtype=np.float64))) for s in factor_vectors]
    if not cols:
        raise ValueError("no candidate factor vectors")
    lengths = {c.shape for c in cols}
    if len(lengths) != 1:
        raise ValueError(f"candidate vectors have different lengths {sorted(lengths)}")
    return np.column_stack(cols)


def _pca(C):
    """Row-wise projection onto the principal direction of the candidate rows.

    Returns (integrated, clamped count).
    """
    m, r = C.shape
    dev = C - C.mean(axis=0)
    M = dev.T @ dev
    if np.linalg.norm(M) <= 1e-14 * max(1.0, np.linalg.norm(C) ** 2):
        phi = np.full(r, 1.0 / np.sqrt(r))
    else:
        _, vecs = la.eigh(M)
        phi = vecs[:, -1]
    if np.sum(C @ phi) < 0:
        phi = -phi
    out = C @ phi / np.sqrt(r)
    neg = out < 0
    clamped = int(np.count_nonzero(neg))
    if clamped:
        log.info("pca integration clamped %d of %d factors at 0", clamped, m)
    return np.where(neg, 0.0, out), clamped


def _integrate(C, method):
    C = np.asarray(C, dtype=np.float64)
    if C.ndim == 1:
        C = C[:, None]
    if C.ndim != 2 or C.shape[1] < 1:
        raise ValueError(f"candidates must be an m x r matrix, got {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("candidate factors must be finite")
    if method not in INTEGRATION_METHODS:
        raise ValueError(
            f"integration method must be one of {INTEGRATION_METHODS}, got '{method}'")
    if method == 'pca':
        return _pca(C)

    if np.any(C < 0):
        raise ValueError(f"{method} integration needs non-negative candidates")
    if method == 'arithmetic':
        out = C.mean(axis=1)
    elif method == 'rms':
        out = np.sqrt(np.mean(C ** 2, axis=1))
    elif method == 'geometric':
        # a zero candidate makes the feature's factor 0
        with np.errstate(divide='ignore'):
            out = stats.gmean(C, axis=1)
        out = np.where(np.any(C == 0, axis=1), 0.0, out)
    else:
        if np.any(C == 0):
            i, p = np.argwhere(C == 0)[0]
            raise ValueError(
                f"zero candidate factor (feature {i + 1}, split {p + 1})")
        out = stats.hmean(C, axis=1)
    return np.asarray(out, dtype=np.float64), 0


def integrate(candidates, method):
    """Reduce the m x r candidate matrix to an m-vector s^(1/2)."""
    return _integrate(candidates, method)[0]


def integrate_solutions(factor_vectors, method):
    """Sign policy + integration in one step -> ScalingResult."""
    C = candidate_matrix(factor_vectors)
    integrated, clamped = _integrate(C, method)
    return ScalingResult(candidates=C, integrated=integrated, method=method,
                         clamped=clamped)


def to_scaling_matrix(integrated):
    """(S, S^(1/2)) with S^(1/2) = diag(integrated), S = diag(integrated^2)."""
    v = np.asarray(integrated, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"integrated factors must be a vector, got {v.shape}")
    if np.any(v < 0):
        i = int(np.flatnonzero(v < 0)[0])
        raise ValueError(f"negative scaling factor at feature {i + 1}: {v[i]}")
    return np.diag(v ** 2), np.diag(v)


def identity_scaling(m):
    """No-op scaling (plain spectral clustering)."""
    C = np.ones((m, 1))
    return ScalingResult(candidates=C, integrated=np.ones(m), method='identity')
