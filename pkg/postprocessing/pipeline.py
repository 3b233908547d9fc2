"""Supervised dimensionality reduction with spectral feature scaling.

fit_scaling() learns the diagonal scaling from training data:
    local scales -> binary splits -> balance b -> pencils -> eigenpairs
    -> integrated S^(1/2)
run_pipeline() wraps it in stratified k-fold cross-validation. Each outer
fold picks the embedding dimension ell and the split orientations by an inner
k-fold search on its training portion, then embeds train + test together and
classifies the test rows.
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from _version import __version__
from calculators.eigensolve import SolverConfig, solve_pencil
from calculators.embed import apply_scaling, embedding_checks, spectral_embed
from calculators.pencil import (SPLIT_MODES, assemble_pencil, balance_param,
                                make_splits, stack_pencils)
from calculators.scaling import (INTEGRATION_METHODS, identity_scaling,
                                 integrate_solutions)
from postprocessing.classifiers import (knn_predict, knn_predict_many,
                                        logistic_predict)
from postprocessing.metrics import aa, nmi, oa, per_class_accuracy
from preprocessing.data import Dataset, kfold_split
from preprocessing.graph import build_graph, local_scales

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_ELL_GRID = (1, 2, 3, 5, 8, 13, 21, 34)
CLASSIFIERS = ('knn', 'logistic')
SCALING_MODES = ('sfs', 'identity')
SOLVE_MODES = ('per_split', 'stacked')


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that determines a run. Flat so it serialises to one JSON object."""
    split_mode: str = 'one_per_class'
    integration: str = 'rms'
    scaling: str = 'sfs'
    solve_mode: str = 'per_split'
    balance: object = 1.0
    search_orientation: bool = True
    standardize: bool = False
    k_local: int = 7
    sparsify_k: int = 7
    ell: int = None
    ell_grid: tuple = DEFAULT_ELL_GRID
    outer_folds: int = 5
    inner_folds: int = 4
    classifier: str = 'knn'
    knn_k: int = 1
    knn_sweep: tuple = ()
    seed: int = 0
    solver_grid_points: int = 400
    solver_search_width: float = 2.0
    solver_refine_width: float = 1e-10
    solver_accept_rtol: float = 1.0

    def __post_init__(self):
        for name, allowed in (('split_mode', SPLIT_MODES),
                              ('integration', INTEGRATION_METHODS),
                              ('scaling', SCALING_MODES),
                              ('solve_mode', SOLVE_MODES),
                              ('classifier', CLASSIFIERS)):
            if getattr(self, name) not in allowed:
                raise ValueError(
                    f"{name} must be one of {allowed}, got '{getattr(self, name)}'")
        if self.balance != 'auto':
            try:
                b = float(self.balance)
            except (TypeError, ValueError):
                raise ValueError(
                    f"balance must be 'auto' or a positive number, got {self.balance!r}") from None
            if not b > 0:
                raise ValueError(f"balance must be > 0, got {b}")
            object.__setattr__(self, 'balance', b)
        if self.ell is not None and self.ell < 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        grid = tuple(sorted({int(x) for x in self.ell_grid}))
        if not grid or grid[0] < 1:
            raise ValueError("ell_grid must contain positive integers")
        object.__setattr__(self, 'ell_grid', grid)
        object.__setattr__(self, 'knn_sweep',
                           tuple(sorted({int(k) for k in self.knn_sweep})))
        if self.knn_sweep and self.knn_sweep[0] < 1:
            raise ValueError("knn_sweep values must be >= 1")
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("outer_folds and inner_folds must be >= 2")
        if self.knn_k < 1 or self.k_local < 1 or self.sparsify_k < 1:
            raise ValueError("knn_k, k_local and sparsify_k must be >= 1")

    @property
    def fixed_balance(self):
        return self.balance != 'auto'

    @property
    def orientation_matters(self):
        """False when flipping a split only negates its pencil: automatic b
        (v -> -v/b) or b = 1 (v -> -v)."""
        return self.fixed_balance and self.balance != 1.0

    def solver_config(self):
        return SolverConfig(grid_points=self.solver_grid_points,
                            search_width=self.solver_search_width,
                            refine_width=self.solver_refine_width,
                            accept_rtol=self.solver_accept_rtol)


# --------------------------------------------------------- Learning the scaling

@dataclass(frozen=True, eq=False)
class ScalingFit:
    """Outcome of fit_scaling(). scaling is None when a pencil solve failed."""
    scaling: object
    solutions: tuple = ()
    splits: tuple = ()
    diagnostic: str = ''

    @property
    def converged(self):
        return self.scaling is not None

    def to_dict(self):
        return {
            'converged': self.converged,
            'diagnostic': self.diagnostic,
            'splits': [{'positive_classes': sorted(s.positive_classes),
                        'b': float(s.b)} for s in self.splits],
            'solutions': [{k: v for k, v in sol.to_dict().items() if k != 'w'}
                          for sol in self.solutions],
            'scaling': self.scaling.to_dict() if self.scaling is not None else None,
        }


def _oriented_splits(X, labels, K, cfg, flips):
    scheme = make_splits(labels, K, cfg.split_mode)
    classes = range(1, K + 1)
    splits = [s.flipped(classes) if p in flips else s
              for p, s in enumerate(scheme.splits)]
    if cfg.fixed_balance:
        return [s.with_balance(cfg.balance) for s in splits]
    g0 = build_graph(X, k_local=cfg.k_local)
    return [s.with_balance(balance_param(s, g0)) for s in splits]


def fit_scaling(X, labels, K, cfg, flips=frozenset()):
    """Learn S^(1/2) from training samples X (n x m) with class ids 1..K.

    *flips* holds the indices of the splits whose orientation is reversed.
    """
    X = np.asarray(X, dtype=np.float64)
    if cfg.scaling == 'identity':
        return ScalingFit(identity_scaling(X.shape[1]))

    sigma = local_scales(X, cfg.k_local)
    splits = _oriented_splits(X, labels, K, cfg, flips)
    pencils = [assemble_pencil(X, s.v, sigma, s) for s in splits]
    if cfg.solve_mode == 'stacked':
        pencils = [stack_pencils(pencils)]

    solver = cfg.solver_config()
    solutions = tuple(solve_pencil(p, 1.0, solver) for p in pencils)
    failed = [i for i, sol in enumerate(solutions) if not sol.converged]
    if failed:
        i = failed[0]
        sol = solutions[i]
        diag = (f"pencil {i + 1} of {len(solutions)}: {sol.status} "
                f"(best mu={sol.mu:.6f}, sigma_min={sol.sigma_min:.3e})")
        return ScalingFit(None, solutions, tuple(splits), diag)

    result = integrate_solutions([sol.s for sol in solutions], cfg.integration)
    log.debug("fit_scaling: mu=%s", [round(sol.mu, 6) for sol in solutions])
    return ScalingFit(result, solutions, tuple(splits))


# --------------------------------------------------------- Embedding + classification

def _standardize(X_train, X_test):
    mean = X_train.mean(axis=0)
    scale = X_train.std(axis=0)
    scale[scale == 0] = 1.0
    return (X_train - mean) / scale, (X_test - mean) / scale


def _classify(emb, y_train, ell, cfg):
    """Predicted labels of the test rows of emb truncated to ell columns."""
    e = emb.truncate(ell)
    if cfg.classifier == 'logistic':
        return logistic_predict(e.train, y_train, e.test)
    return knn_predict(e.train, y_train, e.test, cfg.knn_k)


def _embed(X_train, X_test, s_half, ell_max, cfg):
    Z = apply_scaling(X_train, X_test, s_half)
    ell_max = min(ell_max, Z.shape[0] - 2)
    return spectral_embed(Z, ell_max, cfg.k_local, cfg.sparsify_k,
                          n_train=X_train.shape[0])


def ell_candidates(m, n_train, cfg):
    """Searched ell values: grid within [1, m] if m < n_train else [1, n_train]."""
    if cfg.ell is not None:
        return (cfg.ell,)
    cap = m if m < n_train else n_train
    ells = tuple(e for e in cfg.ell_grid if e <= cap)
    return ells or (1,)


class _InnerSearch:
    """Inner k-fold scores per orientation, cached by the set of flipped splits."""

    def __init__(self, X, y, K, cfg, ells, seed):
        self.X, self.y, self.K, self.cfg = X, y, K, cfg
        self.ells = ells
        self.seed = seed
        self.cache = {}

    def scores(self, flips):
        flips = frozenset(flips)
        if flips not in self.cache:
            self.cache[flips] = self._evaluate(flips)
        return self.cache[flips]

    def _evaluate(self, flips):
        cfg = self.cfg
        plan = kfold_split(Dataset(self.X, self.y), cfg.inner_folds, self.seed)
        totals = {e: [] for e in self.ells}
        for _, tr, va in plan.folds():
            fit = fit_scaling(self.X[tr], self.y[tr], self.K, cfg, flips)
            if not fit.converged:
                log.debug("inner fold rejected flips %s: %s",
                          sorted(flips), fit.diagnostic)
                return None
            emb = _embed(self.X[tr], self.X[va], fit.scaling.integrated,
                         max(self.ells), cfg)
            for e in self.ells:
                pred = _classify(emb, self.y[tr], min(e, emb.ell), cfg)
                totals[e].append(oa(self.y[va], pred))
        return {e: float(np.mean(v)) for e, v in totals.items()}

    def score(self, flips, ell):
        s = self.scores(flips)
        return -math.inf if s is None else s[ell]

    def orient(self, flips, ell, r):
        """One greedy pass over the splits, keeping flips that raise inner OA."""
        flips = set(flips)
        best = self.score(flips, ell)
        for p in range(r):
            trial = flips ^ {p}
            sc = self.score(trial, ell)
            if sc > best:
                flips, best = trial, sc
        return frozenset(flips)

    def best_ell(self, flips, ells):
        s = self.scores(flips)
        if s is None:
            return ells[0]
        # ties -> smaller ell
        return max(ells, key=lambda e: (s[e], -e))


def select_hyperparameters(X, y, K, cfg, seed):
    """Inner-CV search: orientation at ell = K - 1, then ell, then orientation.

    Returns (ell, flips, inner OA at the chosen setting, orientation note).
    """
    n_train, m = X.shape
    ells = ell_candidates(m, n_train, cfg)
    ell0 = min(max(K - 1, 1), max(ells))
    search = _InnerSearch(X, y, K, cfg, tuple(sorted(set(ells) | {ell0})), seed)
    r = len(make_splits(y, K, cfg.split_mode).splits)

    orient = (cfg.scaling == 'sfs' and cfg.search_orientation
              and cfg.orientation_matters)
    if cfg.scaling != 'sfs':
        note = 'not applicable'
    elif not cfg.search_orientation:
        note = 'disabled'
    elif not cfg.fixed_balance:
        note = 'skipped (automatic balance)'
    elif not cfg.orientation_matters:
        note = 'skipped (unit balance)'
    else:
        note = 'searched'

    flips = frozenset()
    if not orient and len(ells) == 1:
        return ells[0], flips, float('nan'), note
    if orient:
        flips = search.orient(flips, ell0, r)
    ell = search.best_ell(flips, ells)
    if orient:
        flips = search.orient(flips, ell, r)
    return ell, flips, search.score(flips, ell), note


# --------------------------------------------------------- Reports

@dataclass(eq=False)
class FoldResult:
    fold: int
    status: str
    train_size: int
    test_size: int
    oa: float = float('nan')
    aa: float = float('nan')
    nmi: float = float('nan')
    per_class: list = field(default_factory=list)
    ell: int = None
    flips: list = field(default_factory=list)
    orientation_search: str = ''
    inner_oa: float = float('nan')
    scaling: dict = None
    embedding_checks: dict = None
    knn_sweep: dict = field(default_factory=dict)
    diagnostic: str = ''
    seconds: float = 0.0
    # plot data, not serialised
    test_index: np.ndarray = None
    train_index: np.ndarray = None
    coords: np.ndarray = None
    predicted: np.ndarray = None

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items()
             if k not in ('test_index', 'train_index', 'coords', 'predicted')}
        d['knn_sweep'] = {str(k): v for k, v in self.knn_sweep.items()}
        return d


def _mean_std(values):
    v = np.array([x for x in values if x is not None and not math.isnan(x)])
    if v.size == 0:
        return float('nan'), float('nan')
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), std


@dataclass(eq=False)
class EvalReport:
    folds: list
    config: dict
    seed: int
    seconds: float = 0.0
    dataset: dict = field(default_factory=dict)
    config_echo: dict = None

    @property
    def completed(self):
        return [f for f in self.folds if f.status == 'complete']

    @property
    def aborted(self):
        return [f for f in self.folds if f.status != 'complete']

    def summary(self, metric):
        return _mean_std([getattr(f, metric) for f in self.completed])

    def knn_sweep_summary(self):
        ks = sorted({k for f in self.completed for k in f.knn_sweep})
        return {k: _mean_std([f.knn_sweep[k] for f in self.completed
                              if k in f.knn_sweep]) for k in ks}

    def to_dict(self):
        d = {'schema_version': SCHEMA_VERSION, 'version': __version__}
        for metric in ('oa', 'aa', 'nmi'):
            mean, std = self.summary(metric)
            d[f'{metric}_mean'], d[f'{metric}_std'] = mean, std
        d['completed_folds'] = len(self.completed)
        d['aborted_folds'] = len(self.aborted)
        d['seed'] = self.seed
        d['seconds'] = self.seconds
        d['dataset'] = self.dataset
        d['pipeline'] = self.config
        d['knn_sweep'] = [{'k': k, 'oa_mean': mean, 'oa_std': std}
                          for k, (mean, std) in self.knn_sweep_summary().items()]
        d['folds'] = [f.to_dict() for f in self.folds]
        d['config_echo'] = self.config_echo if self.config_echo is not None else {}
        return d


# --------------------------------------------------------- Cross-validated run

def _run_fold(ds, fold, train, test, cfg):
    t0 = time.perf_counter()
    X_tr, X_te = ds.X[train], ds.X[test]
    y_tr, y_te = ds.labels[train], ds.labels[test]
    if cfg.standardize:
        X_tr, X_te = _standardize(X_tr, X_te)
    result = FoldResult(fold=fold, status='complete', train_size=len(train),
                        test_size=len(test), train_index=train, test_index=test)

    ell, flips, inner_oa, note = select_hyperparameters(
        X_tr, y_tr, ds.K, cfg, cfg.seed + fold)
    result.ell, result.flips = ell, sorted(flips)
    result.orientation_search, result.inner_oa = note, inner_oa

    fit = fit_scaling(X_tr, y_tr, ds.K, cfg, flips)
    if not fit.converged:
        result.status = 'aborted'
        result.diagnostic = fit.diagnostic
        result.scaling = fit.to_dict()
        result.seconds = time.perf_counter() - t0
        log.warning("fold %d aborted: %s", fold, fit.diagnostic)
        return result
    result.scaling = fit.to_dict()

    emb = _embed(X_tr, X_te, fit.scaling.integrated, ell, cfg)
    ell = min(ell, emb.ell)
    result.ell = ell
    pred = _classify(emb, y_tr, ell, cfg)
    result.oa = oa(y_te, pred)
    result.aa = aa(y_te, pred, ds.K)
    result.nmi = nmi(y_te, pred)
    result.per_class = per_class_accuracy(y_te, pred, ds.K)
    result.embedding_checks = embedding_checks(emb.truncate(ell))
    result.coords = emb.truncate(ell).U
    result.predicted = pred

    ks = [k for k in cfg.knn_sweep if k <= len(train)]
    if ks:
        e = emb.truncate(ell)
        sweep = knn_predict_many(e.train, y_tr, e.test, ks)
        result.knn_sweep = {k: oa(y_te, p) for k, p in sweep.items()}

    result.seconds = time.perf_counter() - t0
    log.info("fold %d: OA %.2f AA %.2f NMI %.2f (ell=%d, flips=%s)",
             fold, result.oa, result.aa, result.nmi, ell, result.flips)
    return result


def run_pipeline(ds, cfg, config_echo=None):
    """Outer stratified k-fold evaluation of the full method on *ds*."""
    t0 = time.perf_counter()
    plan = kfold_split(ds, cfg.outer_folds, cfg.seed)
    folds = [_run_fold(ds, f, train, test, cfg) for f, train, test in plan.folds()]
    if not any(f.status == 'complete' for f in folds):
        raise RuntimeError(
            f"all {len(folds)} folds aborted; first: {folds[0].diagnostic}")
    report = EvalReport(folds=folds, config=asdict(cfg), seed=cfg.seed,
                        seconds=time.perf_counter() - t0,
                        dataset={'n': ds.n, 'm': ds.m, 'K': ds.K,
                                 'feature_names': list(ds.feature_names),
                                 'label_names': list(ds.label_names)},
                        config_echo=config_echo)
    mean, std = report.summary('oa')
    log.info("OA %.2f +- %.2f over %d folds (%d aborted)",
             mean, std, len(report.completed), len(report.aborted))
    return report
