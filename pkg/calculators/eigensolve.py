"""Rectangular generalized eigenproblem  A w = mu B w.

The pencils produced by :mod:`calculators.pencil` are (n+1) x (m+1), usually
tall, and have no eigenvalues in the square-matrix sense. An eigenvalue here is
a value mu at which A - mu B drops rank, detected as a local minimum of

    f(mu) = sigma_k(A Q - mu B Q),    k = min(rows, q)

where Q (C x q) is an orthonormal basis of the joint row space of A and B.
Directions outside that row space are annihilated by both matrices and carry no
information, so w is always restricted to span(Q). This also turns a wide
pencil into a tall one.

The search scans a fixed grid below the target, refines every interior local
minimum by golden-section search with a fixed iteration count, and accepts a
minimum when f <= accept_rtol * (||A||_F + ||B||_F). The largest accepted mu
wins. With accept_rtol = 1e-6 only (numerically) exact eigenvalues pass; larger
values accept the eigenvalue of the nearest perturbed pencil
(minimal perturbation reading).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

log = logging.getLogger(__name__)

CONVERGED = 'converged'
NO_EIGENVALUE = 'no_eigenvalue_below_one'
DEGENERATE = 'degenerate_normalization'

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverConfig:
    """Search constants. The interval is [target - search_width, target - target_gap]."""
    grid_points: int = 400
    search_width: float = 2.0
    target_gap: float = 1e-6
    refine_width: float = 1e-10
    accept_rtol: float = 1e-6
    normalize_rtol: float = 1e-8
    rank_rtol: float = None

    def __post_init__(self):
        if self.grid_points < 3:
            raise ValueError(f"grid_points must be >= 3, got {self.grid_points}")
        if not self.search_width > self.target_gap > 0:
            raise ValueError("need search_width > target_gap > 0")
        if not self.refine_width > 0:
            raise ValueError("refine_width must be > 0")
        if not self.accept_rtol > 0:
            raise ValueError("accept_rtol must be > 0")


@dataclass(frozen=True, eq=False)
class PencilSolution:
    """Eigenpair (mu, w) with w[-1] = -1 when converged; s = w[:-1]."""
    mu: float
    w: np.ndarray
    residual: float
    status: str
    sigma_min: float = float('nan')

    @property
    def s(self):
        return self.w[:-1]

    @property
    def converged(self):
        return self.status == CONVERGED

    def to_dict(self):
        return {
            'mu': float(self.mu),
            'residual': float(self.residual),
            'status': self.status,
            'sigma_min': float(self.sigma_min),
            'w': [float(x) for x in self.w],
        }


def residual(p, mu, w):
    """||(A - mu B) w|| / ((||A||_F + |mu| ||B||_F) ||w||)."""
    A, B = p.A_full, p.B_full
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (A.shape[1],):
        raise ValueError(f"w must have length {A.shape[1]}, got {w.shape}")
    wn = np.linalg.norm(w)
    if wn == 0.0:
        raise ValueError("zero vector")
    num = np.linalg.norm(A @ w - mu * (B @ w))
    den = (np.linalg.norm(A, 'fro') + abs(mu) * np.linalg.norm(B, 'fro')) * wn
    if num == 0.0:
        return 0.0
    return float(num / den) if den > 0 else float('inf')


def joint_row_basis(A, B, rank_rtol=None):
    """Orthonormal basis (C x q) of the row space of [A; B]."""
    stacked = np.vstack([A, B])
    _, sv, Vt = la.svd(stacked, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((A.shape[1], 0))
    tol = rank_rtol if rank_rtol is not None else max(stacked.shape) * np.finfo(float).eps
    q = int(np.sum(sv > tol * sv[0]))
    return Vt[:q].T


def _golden_min(f, a, b, width):
    """Golden-section minimum of f on [a, b]; iteration count depends only on
    the bracket width."""
    span = b - a
    iters = 0
    if span > width:
        iters = math.ceil(math.log(width / span) / math.log(_INV_PHI))
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    mu = 0.5 * (a + b)
    return mu, f(mu)


def _local_minima(values):
    """Interior indices i with values[i-1] >= values[i] < values[i+1]."""
    v = np.asarray(values)
    idx = np.flatnonzero((v[1:-1] <= v[:-2]) & (v[1:-1] < v[2:])) + 1
    return idx.tolist()


def solve_pencil(p, target=1.0, cfg=None):
    """Eigenpair of the pencil with the largest admissible mu strictly below
    *target*, or a diagnostic solution with a non-converged status."""
    cfg = cfg or SolverConfig()
    A = np.asarray(p.A_full, dtype=np.float64)
    B = np.asarray(p.B_full, dtype=np.float64)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("pencil has non-finite entries")
    C = A.shape[1]
    scale = np.linalg.norm(A, 'fro') + np.linalg.norm(B, 'fro')

    Q = joint_row_basis(A, B, cfg.rank_rtol)
    if Q.shape[1] == 0:
        log.warning("pencil is identically zero")
        return PencilSolution(float('nan'), np.full(C, np.nan),
                              float('nan'), NO_EIGENVALUE)
    AQ, BQ = A @ Q, B @ Q
    k = min(AQ.shape[0], AQ.shape[1])

    def f(mu):
        return la.svdvals(AQ - mu * BQ)[k - 1]

    lo, hi = target - cfg.search_width, target - cfg.target_gap
    h = (hi - lo) / (cfg.grid_points - 1)
    grid = lo + h * np.arange(-1, cfg.grid_points + 1)
    values = np.array([f(mu) for mu in grid])

    candidates = []
    for i in _local_minima(values):
        mu, fmu = _golden_min(f, grid[i - 1], grid[i + 1], cfg.refine_width)
        if mu < target:
            candidates.append((mu, fmu))

    threshold = cfg.accept_rtol * scale
    accepted = [c for c in candidates if c[1] <= threshold]
    if accepted:
        mu, fmu = max(accepted, key=lambda c: c[0])
        status = CONVERGED
    else:
        if candidates:
            mu, fmu = min(candidates, key=lambda c: (c[1], -c[0]))
        else:
            i = int(np.argmin(values[1:-1])) + 1
            mu, fmu = float(grid[i]), float(values[i])
        status = NO_EIGENVALUE
        log.debug("no eigenvalue below %g: best sigma_k %.3e at mu=%.6f "
                  "(threshold %.3e)", target, fmu, mu, threshold)

    _, _, Vt = la.svd(AQ - mu * BQ, full_matrices=False)
    w = Q @ Vt[k - 1]
    wn = np.linalg.norm(w)
    if abs(w[-1]) < cfg.normalize_rtol * wn:
        if status == CONVERGED:
            status = DEGENERATE
        w = w / wn
    else:
        w = -w / w[-1]

    res = residual(p, mu, w)
    log.debug("solve_pencil: mu=%.10f sigma_k=%.3e residual=%.3e status=%s",
              mu, fmu, res, status)
    return PencilSolution(float(mu), w, res, status, float(fmu))
