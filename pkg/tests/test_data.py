import numpy as np
import pytest

from preprocessing.data import (Dataset, RingConfig, generate_rings,
                                kfold_split, load_csv, write_csv)


def test_dataset_rejects_non_finite_values():
    X = np.array([[0.0, 1.0], [np.nan, 2.0]])
    with pytest.raises(ValueError, match="non-finite value at row 2, column 1"):
        Dataset(X, [1, 2])


def test_dataset_rejects_gaps_in_class_ids():
    with pytest.raises(ValueError, match=r"class ids \[2\] have no samples"):
        Dataset(np.zeros((3, 1)), [1, 3, 3])


def test_dataset_needs_two_classes():
    with pytest.raises(ValueError, match="fewer than 2 classes"):
        Dataset(np.zeros((3, 1)), [1, 1, 1])


def test_dataset_arrays_are_read_only():
    ds = Dataset(np.eye(3), [1, 2, 2])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5.0
    assert ds.feature_names == ('f1', 'f2', 'f3')
    assert ds.label_names == ('1', '2')
    assert list(ds.class_counts()) == [1, 2]


def test_csv_reload_is_bit_identical(tmp_path):
    ds = generate_rings(RingConfig(samples_per_class=10, num_features=4, seed=3))
    path = tmp_path / "rings.csv"
    write_csv(ds, path)
    back = load_csv(str(path))
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.labels, ds.labels)
    assert back.feature_names == ds.feature_names


def test_load_csv_encodes_labels_by_first_appearance(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,species,b\n1,setosa,2\n3,virginica,4\n5,setosa,6\n",
                    encoding='utf-8')
    ds = load_csv(str(path), label_column='species')
    assert list(ds.labels) == [1, 2, 1]
    assert ds.label_names == ('setosa', 'virginica')
    assert ds.feature_names == ('a', 'b')
    np.testing.assert_array_equal(ds.X, [[1, 2], [3, 4], [5, 6]])


def test_load_csv_reports_the_bad_cell(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,label\n1.5,a\nfoo,b\n", encoding='utf-8')
    with pytest.raises(ValueError, match="non-numeric value 'foo' at row 2, column x"):
        load_csv(str(path))


def test_load_csv_missing_label_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y\n1,2\n", encoding='utf-8')
    with pytest.raises(ValueError, match="label column 'label' not found"):
        load_csv(str(path))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="File not found"):
        load_csv(str(tmp_path / "nope.csv"))


def test_rings_shape_and_label_blocks():
    ds = generate_rings(RingConfig())
    assert ds.X.shape == (600, 10)
    assert list(ds.labels[:200]) == [1] * 200
    assert list(ds.labels[-200:]) == [3] * 200


def test_rings_are_reproducible_from_the_seed():
    a = generate_rings(RingConfig(noise_variance=25.0, seed=7))
    b = generate_rings(RingConfig(noise_variance=25.0, seed=7))
    c = generate_rings(RingConfig(noise_variance=25.0, seed=8))
    assert np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_rings_feature_variances():
    ds = generate_rings(RingConfig(samples_per_class=4000, noise_variance=4.0, seed=1))
    var = ds.X.var(axis=0)
    np.testing.assert_allclose(var[:3], [0.35, 2.01, 0.19], rtol=0.08)
    np.testing.assert_allclose(var[3:], 4.0, rtol=0.08)


def test_ring_config_validation():
    with pytest.raises(ValueError, match="num_features must be >= 3"):
        RingConfig(num_features=2)
    with pytest.raises(ValueError, match="noise_variance"):
        RingConfig(noise_variance=0.0)


def test_kfold_split_is_stratified_and_deterministic():
    ds = generate_rings(RingConfig(samples_per_class=23, num_features=3))
    plan = kfold_split(ds, 5, seed=4)
    again = kfold_split(ds, 5, seed=4)
    assert np.array_equal(plan.assignments, again.assignments)
    assert set(plan.assignments) == {1, 2, 3, 4, 5}
    for c in range(1, 4):
        sizes = np.bincount(plan.assignments[ds.labels == c], minlength=6)[1:]
        assert sizes.max() - sizes.min() <= 1

    seen = []
    for fold, train, test in plan.folds():
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == ds.n
        seen.extend(test.tolist())
    assert sorted(seen) == list(range(ds.n))


def test_kfold_split_rejects_small_classes():
    ds = generate_rings(RingConfig(samples_per_class=3, num_classes=10, num_features=3))
    with pytest.raises(ValueError, match="class 1 has 3 samples, fewer than k=5 folds"):
        kfold_split(ds, 5)
