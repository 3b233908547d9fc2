import math

import numpy as np
import pytest

import postprocessing.pipeline as pipeline
from calculators.embed import embedding_checks, spectral_embed
from postprocessing.pipeline import (PipelineConfig, ell_candidates,
                                     fit_scaling, run_pipeline)
from preprocessing.data import Dataset, RingConfig, generate_rings

SMALL = dict(outer_folds=3, inner_folds=2, ell_grid=(1, 2, 3),
             solver_grid_points=120)


def small_rings(noise_variance=1.0, seed=0):
    return generate_rings(RingConfig(samples_per_class=20, num_features=5,
                                     noise_variance=noise_variance, seed=seed))


def test_config_validation():
    with pytest.raises(ValueError, match="integration must be one of"):
        PipelineConfig(integration='median')
    with pytest.raises(ValueError, match="balance"):
        PipelineConfig(balance='often')
    with pytest.raises(ValueError, match="balance must be > 0"):
        PipelineConfig(balance=-1)
    cfg = PipelineConfig(balance='2.5', ell_grid=[3, 1, 3], knn_sweep=[5, 1])
    assert cfg.balance == 2.5 and cfg.fixed_balance
    assert cfg.ell_grid == (1, 3)
    assert cfg.knn_sweep == (1, 5)


def test_ell_candidates_follow_the_search_range():
    cfg = PipelineConfig()
    assert ell_candidates(10, 480, cfg) == (1, 2, 3, 5, 8)
    assert ell_candidates(2000, 49, cfg) == (1, 2, 3, 5, 8, 13, 21, 34)
    assert ell_candidates(2000, 20, cfg) == (1, 2, 3, 5, 8, 13)
    assert ell_candidates(10, 480, PipelineConfig(ell=4)) == (4,)


def test_fit_scaling_on_rings():
    ds = small_rings()
    fit = fit_scaling(ds.X, ds.labels, ds.K, PipelineConfig(solver_grid_points=120))
    assert fit.converged
    assert len(fit.solutions) == 3
    assert len(fit.splits) == 3
    s = fit.scaling.integrated
    assert s.shape == (5,)
    assert np.all(np.isfinite(s)) and np.all(s >= 0)
    assert fit.scaling.candidates.shape == (5, 3)
    for sol in fit.solutions:
        assert sol.mu < 1.0
        assert sol.w[-1] == -1.0


def test_stacked_mode_yields_one_candidate_column():
    ds = small_rings()
    cfg = PipelineConfig(solve_mode='stacked', solver_grid_points=120)
    fit = fit_scaling(ds.X, ds.labels, ds.K, cfg)
    assert fit.converged
    assert fit.scaling.candidates.shape == (5, 1)


def test_flipping_a_split_with_fixed_balance():
    ds = small_rings()
    cfg = PipelineConfig(balance=1.0, solver_grid_points=120)
    fit = fit_scaling(ds.X, ds.labels, ds.K, cfg, flips={1})
    assert set(fit.splits[1].positive_classes) == {1, 3}
    assert set(fit.splits[0].positive_classes) == {1}
    assert all(s.b == 1.0 for s in fit.splits)


def test_identity_scaling_reduces_to_spectral_clustering():
    ds = small_rings()
    X, Y = ds.X[:40], ds.X[40:]
    fit = fit_scaling(X, ds.labels[:40], ds.K, PipelineConfig(scaling='identity'))
    emb = pipeline._embed(X, Y, fit.scaling.integrated, 3, PipelineConfig())
    plain = spectral_embed(ds.X, 3, n_train=40)
    assert np.max(np.abs(emb.U - plain.U)) <= 1e-10
    checks = embedding_checks(emb)
    assert checks['residual'] <= 1e-8


def test_run_pipeline_report_schema_and_determinism():
    ds = small_rings()
    cfg = PipelineConfig(**SMALL)
    a = run_pipeline(ds, cfg).to_dict()
    b = run_pipeline(ds, cfg).to_dict()
    for key in ('oa_mean', 'oa_std', 'aa_mean', 'aa_std', 'nmi_mean', 'nmi_std',
                'folds', 'config_echo', 'seed', 'schema_version'):
        assert key in a
    assert len(a['folds']) == 3
    for fa, fb in zip(a['folds'], b['folds']):
        assert fa['oa'] == fb['oa']
        assert fa['ell'] == fb['ell']
        assert fa['scaling'] == fb['scaling']
    assert 0.0 <= a['oa_mean'] <= 100.0
    assert a['aa_mean'] <= 100.0
    for f in a['folds']:
        assert f['status'] == 'complete'
        assert f['ell'] in (1, 2, 3)
        assert f['orientation_search'] == 'skipped (unit balance)'
        assert len(f['per_class']) == 3
        assert f['embedding_checks']['orthonormality'] <= 1e-8


def test_orientation_search_with_fixed_balance():
    ds = small_rings()
    report = run_pipeline(ds, PipelineConfig(balance=2.0, **SMALL))
    for f in report.folds:
        assert f.orientation_search == 'searched'
        assert set(f.flips) <= {0, 1, 2}
        assert not math.isnan(f.inner_oa)


def test_orientation_is_not_searched_when_flips_only_negate_the_pencil():
    assert PipelineConfig().balance == 1.0
    assert not PipelineConfig().orientation_matters
    assert not PipelineConfig(balance='auto').orientation_matters
    assert PipelineConfig(balance=0.5).orientation_matters

    ds = small_rings()
    X, y = ds.X[:40], ds.labels[:40]
    for balance, note in ((1.0, 'skipped (unit balance)'),
                          ('auto', 'skipped (automatic balance)')):
        cfg = PipelineConfig(balance=balance, ell=2, **SMALL)
        ell, flips, inner_oa, got = pipeline.select_hyperparameters(X, y, ds.K, cfg, 0)
        assert got == note
        assert ell == 2 and flips == frozenset()
        assert math.isnan(inner_oa)


def test_flipped_split_with_unit_balance_gives_the_same_scaling():
    ds = small_rings()
    cfg = PipelineConfig(solver_grid_points=120)
    plain = fit_scaling(ds.X, ds.labels, ds.K, cfg)
    flipped = fit_scaling(ds.X, ds.labels, ds.K, cfg, flips={0, 2})
    np.testing.assert_allclose(flipped.scaling.integrated, plain.scaling.integrated,
                               rtol=1e-8)


def test_knn_sweep_and_logistic_classifier():
    ds = small_rings()
    report = run_pipeline(ds, PipelineConfig(classifier='logistic', knn_sweep=(1, 3),
                                             ell=2, **SMALL))
    summary = report.knn_sweep_summary()
    assert sorted(summary) == [1, 3]
    for f in report.folds:
        assert sorted(f.knn_sweep) == [1, 3]
        assert f.ell == 2


def test_aborted_fold_is_reported(monkeypatch):
    real = pipeline.fit_scaling
    calls = []

    def failing_first(X, labels, K, cfg, flips=frozenset()):
        calls.append(1)
        fit = real(X, labels, K, cfg, flips)
        if len(calls) == 1:
            return pipeline.ScalingFit(None, fit.solutions, fit.splits,
                                       "pencil 1 of 3: no_eigenvalue_below_one")
        return fit

    monkeypatch.setattr(pipeline, 'fit_scaling', failing_first)
    report = run_pipeline(small_rings(), PipelineConfig(ell=2, **SMALL))
    assert [f.status for f in report.folds] == ['aborted', 'complete', 'complete']
    assert 'no_eigenvalue_below_one' in report.folds[0].diagnostic
    assert len(report.completed) == 2
    mean, _ = report.summary('oa')
    assert mean == pytest.approx(np.mean([f.oa for f in report.completed]))
    assert report.to_dict()['aborted_folds'] == 1


def test_all_folds_aborted_raises(monkeypatch):
    def never(X, labels, K, cfg, flips=frozenset()):
        return pipeline.ScalingFit(None, (), (), "forced failure")

    monkeypatch.setattr(pipeline, 'fit_scaling', never)
    with pytest.raises(RuntimeError, match="all 3 folds aborted"):
        run_pipeline(small_rings(), PipelineConfig(ell=2, **SMALL))


# --------------------------------------------------------- Long-running experiments

def assert_embedding_invariants(report):
    for f in report.completed:
        assert f.embedding_checks['orthonormality'] <= 1e-8
        assert f.embedding_checks['constraint'] <= 1e-8
        assert f.embedding_checks['residual'] <= 1e-8


@pytest.mark.slow
def test_rings_unit_variance_accuracy():
    ds = generate_rings(RingConfig(noise_variance=1.0, seed=0))
    report = run_pipeline(ds, PipelineConfig(integration='rms', classifier='knn', knn_k=1))
    assert report.summary('oa')[0] >= 85.0
    assert_embedding_invariants(report)


@pytest.mark.slow
def test_noise_features_get_small_factors():
    ds = generate_rings(RingConfig(noise_variance=25.0, seed=0))
    report = run_pipeline(ds, PipelineConfig(integration='rms'))
    good = 0
    for f in report.completed:
        s = np.abs(f.scaling['scaling']['integrated'])
        if s[3:].mean() <= 0.5 * s[:3].mean():
            good += 1
    assert good >= 4
    assert_embedding_invariants(report)


@pytest.mark.slow
def test_accuracy_degrades_gracefully_with_noise():
    oa = {}
    for variance in (1.0, 9.0, 25.0):
        ds = generate_rings(RingConfig(noise_variance=variance, seed=0))
        report = run_pipeline(ds, PipelineConfig(integration='rms'))
        assert_embedding_invariants(report)
        oa[variance] = report.summary('oa')[0]
    assert oa[1.0] - oa[25.0] <= 15.0


@pytest.mark.slow
def test_shuffled_labels_give_chance_accuracy():
    ds = generate_rings(RingConfig(noise_variance=1.0, seed=0))
    rng = np.random.default_rng(0)
    shuffled = Dataset(ds.X, rng.permutation(ds.labels))
    report = run_pipeline(shuffled, PipelineConfig(integration='rms'))
    assert abs(report.summary('oa')[0] - 100.0 / 3) <= 10.0
