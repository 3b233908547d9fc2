"""Classifiers applied to embedded coordinates.

- knn_predict(): k-nearest neighbours, Euclidean
- logistic_predict(): multinomial logistic regression (ridge-regularised,
  scikit-learn lbfgs on standardised coordinates)
"""
import logging
import warnings

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, softmax
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.preprocessing import StandardScaler

log = logging.getLogger(__name__)


def _coords(a):
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def _vote(labels, dist, nearest, k):
    pred = np.empty(nearest.shape[0], dtype=labels.dtype)
    for i, idx in enumerate(nearest[:, :k]):
        votes = {}
        for lab, d in zip(labels[idx].tolist(), dist[i, idx].tolist()):
            count, total = votes.get(lab, (0, 0.0))
            votes[lab] = (count + 1, total + d)
        pred[i] = min(votes, key=lambda c: (-votes[c][0], votes[c][1], c))
    return pred


def knn_predict_many(train_coords, train_labels, test_coords, ks):
    """{k: predicted labels} for every k in *ks* from one distance matrix.

    Ties in the vote go to the class with the smallest summed distance, then
    to the smallest class id. Neighbours at equal distance are taken in
    training-row order.
    """
    train = _coords(train_coords)
    test = _coords(test_coords)
    labels = np.asarray(train_labels)
    n = train.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    if labels.shape != (n,):
        raise ValueError(f"train_labels must have length {n}")
    ks = [int(k) for k in ks]
    for k in ks:
        if not 1 <= k <= n:
            raise ValueError(f"need 1 <= k <= {n} training samples, got k={k}")
    if test.shape[0] == 0:
        return {k: np.empty(0, dtype=labels.dtype) for k in ks}

    dist = cdist(test, train)
    nearest = np.argsort(dist, axis=1, kind='stable')[:, :max(ks)]
    return {k: _vote(labels, dist, nearest, k) for k in ks}


def knn_predict(train_coords, train_labels, test_coords, k=1):
    """Majority label among the k nearest training rows (Euclidean)."""
    return knn_predict_many(train_coords, train_labels, test_coords, [k])[k]


def _gradient_norm(model, Xs, labels):
    """Norm of the gradient of mean cross-entropy + ridge/2 ||coef||^2 at the
    fitted coefficients (the objective LogisticRegression minimises, scaled
    by 1 / (C n))."""
    n = Xs.shape[0]
    ridge = 1.0 / (model.C * n)
    Z = model.decision_function(Xs)
    if model.coef_.shape[0] == 1:
        R = (expit(Z) - (labels == model.classes_[1]))[:, None]
    else:
        Y = labels[:, None] == model.classes_[None, :]
        R = softmax(Z, axis=1) - Y
    g_coef = R.T @ Xs / n + ridge * model.coef_
    g_icpt = R.sum(axis=0) / n
    return float(np.sqrt(np.sum(g_coef ** 2) + np.sum(g_icpt ** 2)))


def logistic_predict(train_coords, train_labels, test_coords, ridge=1e-6,
                     tol=1e-8, max_iter=1000, grad_tol=1e-6):
    """Fit multinomial logistic regression on standardised coordinates and
    return the argmax-probability class of each test row."""
    train = _coords(train_coords)
    test = _coords(test_coords)
    labels = np.asarray(train_labels)
    if np.unique(labels).size < 2:
        raise ValueError("logistic regression needs >= 2 classes in the training labels")

    scaler = StandardScaler().fit(train)
    Xs = scaler.transform(train)
    n = Xs.shape[0]
    model = LogisticRegression(C=1.0 / (ridge * n), tol=tol, max_iter=max_iter)
    with warnings.catch_warnings():
        # the iteration cap is checked below
        warnings.simplefilter('ignore', ConvergenceWarning)
        model.fit(Xs, labels)

    iters = int(np.max(model.n_iter_))
    gnorm = _gradient_norm(model, Xs, labels)
    if iters >= max_iter and not gnorm <= grad_tol:
        raise RuntimeError(
            f"logistic regression did not converge after {iters} iterations "
            f"(gradient norm {gnorm:.3e})")
    log.debug("logistic regression: %d iterations, gradient norm %.2e", iters, gnorm)
    return model.predict(scaler.transform(test))
