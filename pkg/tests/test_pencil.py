import numpy as np
import pytest

from calculators.pencil import (BinarySplit, PencilPair, assemble_pencil,
                                balance_param, make_splits, stack_pencils)
from preprocessing.graph import SimilarityGraph, local_scales


def linearized_graph(X, sigma, s):
    """Straightforward W_lin(s), D_lin(s): 1 - s^T x_ij / (sigma_i sigma_j) off the diagonal."""
    n = X.shape[0]
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                W[i, j] = 1.0 - s @ (X[i] - X[j]) ** 2 / (sigma[i] * sigma[j])
    return W, np.diag(W.sum(axis=1))


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 16))
    m = int(rng.integers(2, 9))
    K = int(rng.choice([2, 3]))
    labels = np.concatenate([np.arange(1, K + 1), rng.integers(1, K + 1, n - K)])
    X = rng.normal(size=(n, m)) * rng.uniform(0.5, 3.0, m)
    sigma = local_scales(X, k=min(7, n - 1))
    scheme = make_splits(labels, K, 'one_per_class')
    split = scheme.splits[int(rng.integers(scheme.r))].with_balance(rng.uniform(0.3, 3.0))
    return rng, X, sigma, split


def test_two_sample_pencil_literal():
    p = assemble_pencil(np.array([[0.0], [1.0]]), np.array([1.0, -1.0]),
                        np.array([1.0, 1.0]))
    np.testing.assert_array_equal(p.A_full, [[-1, -1], [1, 1], [0, 0]])
    np.testing.assert_array_equal(p.B_full, [[1, 1], [-1, -1], [0, 0]])


@pytest.mark.parametrize("seed", range(50))
def test_pencil_reproduces_linearized_laplacian(seed):
    rng, X, sigma, split = random_instance(seed)
    v = split.v
    p = assemble_pencil(X, v, sigma, split)
    n, m = X.shape
    assert p.shape == (n + 1, m + 1)
    for _ in range(5):
        s = rng.uniform(-1.0, 2.0, m)
        w = np.append(s, -1.0)
        W, D = linearized_graph(X, sigma, s)
        Aw, Bw = p.A_full @ w, p.B_full @ w
        wv, dv = W @ v, D @ v
        assert np.linalg.norm(Aw[:n] + wv) <= 1e-10 * max(1.0, np.linalg.norm(wv))
        assert np.linalg.norm(Bw[:n] + dv) <= 1e-10 * max(1.0, np.linalg.norm(dv))
        # constraint row: -1^T D_lin v
        assert Aw[n] == pytest.approx(-dv.sum(), rel=1e-10, abs=1e-10)
        assert Bw[n] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_column_sums_of_pencil_blocks_cancel(seed):
    _, X, sigma, split = random_instance(seed)
    p = assemble_pencil(X, split.v, sigma, split)
    n = X.shape[0]
    diff = (p.A_full[:n] - p.B_full[:n]).sum(axis=0)
    assert np.max(np.abs(diff)) <= 1e-10 * np.linalg.norm(p.A_full)
    np.testing.assert_allclose(p.A_full[n], p.A_full[:n].sum(axis=0),
                               rtol=1e-10, atol=1e-10 * np.linalg.norm(p.A_full))
    assert np.all(p.B_full[n] == 0)


def test_non_finite_pencil_is_rejected():
    X = np.array([[0.0], [1.0], [2.0]])
    with pytest.raises(ValueError, match="non-finite"):
        assemble_pencil(X, np.array([1.0, -1.0, -1.0]), np.array([1.0, 0.0, 1.0]))


def test_one_per_class_splits():
    labels = np.array([1, 2, 3, 1, 2, 3])
    scheme = make_splits(labels, 3)
    assert scheme.r == 3
    assert [set(s.positive_classes) for s in scheme.splits] == [{1}, {2}, {3}]
    np.testing.assert_array_equal(scheme.splits[1].t, [-1, 1, -1, -1, 1, -1])


def test_two_classes_give_a_single_split():
    scheme = make_splits(np.array([1, 1, 2, 2]), 2)
    assert scheme.r == 1
    assert set(scheme.splits[0].positive_classes) == {1}


def test_binary_code_splits_high_bit_first():
    labels = np.array([1, 2, 3, 4])
    scheme = make_splits(labels, 4, 'binary_code')
    assert [set(s.positive_classes) for s in scheme.splits] == [{3, 4}, {2, 4}]
    scheme = make_splits(np.array([1, 2, 3]), 3, 'binary_code')
    assert [set(s.positive_classes) for s in scheme.splits] == [{3}, {2}]


def test_binary_code_single_signed_split_is_rejected():
    with pytest.raises(ValueError, match="single-signed"):
        make_splits(np.array([1, 1, 2, 2]), 4, 'binary_code')


def test_unknown_split_mode():
    with pytest.raises(ValueError, match="split mode"):
        make_splits(np.array([1, 2]), 2, 'all_pairs')


def test_indicator_vector_and_flip():
    split = BinarySplit(frozenset({1}), np.array([1, 1, -1, -1, -1]), b=2.0)
    np.testing.assert_array_equal(split.v, [1, 1, -2, -2, -2])
    flipped = split.flipped({1, 2})
    assert set(flipped.positive_classes) == {2}
    assert flipped.b == pytest.approx(0.5)
    np.testing.assert_allclose(flipped.v, -split.v / split.b)


def test_balance_param_is_the_degree_ratio():
    g = SimilarityGraph(W=np.zeros((4, 4)), d=np.array([2.0, 2.0, 1.0, 1.0]),
                        sigma=np.ones(4))
    split = BinarySplit(frozenset({1}), np.array([1, 1, -1, -1]))
    assert balance_param(split, g) == pytest.approx(2.0)
    assert balance_param(split.flipped({1, 2}), g) == pytest.approx(0.5)
    equal = SimilarityGraph(W=np.zeros((4, 4)), d=np.ones(4), sigma=np.ones(4))
    assert balance_param(split, equal) == pytest.approx(1.0)


def test_stack_pencils():
    X, sigma = np.array([[0.0], [1.0]]), np.array([1.0, 1.0])
    p1 = assemble_pencil(X, np.array([1.0, -1.0]), sigma)
    p2 = assemble_pencil(X, np.array([-1.0, 1.0]), sigma)
    assert stack_pencils([p1]) is p1
    stacked = stack_pencils([p1, p2])
    assert stacked.shape == (6, 2)
    np.testing.assert_array_equal(stacked.A_full[:3], p1.A_full)
    np.testing.assert_array_equal(stacked.B_full[3:], p2.B_full)


def test_stack_pencils_rejects_mismatched_columns():
    a = PencilPair(np.zeros((3, 2)), np.zeros((3, 2)))
    b = PencilPair(np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError, match="mismatched column counts"):
        stack_pencils([a, b])
