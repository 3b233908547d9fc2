"""Classification metrics in percent: OA, AA and NMI."""
import numpy as np
from scipy import stats
from sklearn.metrics import normalized_mutual_info_score


def _pair(true_labels, pred_labels):
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(
            f"label vectors must be 1-D of equal length, got {t.shape} and {p.shape}")
    if t.size == 0:
        raise ValueError("empty label vectors")
    return t, p


def oa(true_labels, pred_labels):
    """Overall accuracy: correctly classified / all samples * 100."""
    t, p = _pair(true_labels, pred_labels)
    return 100.0 * float(np.mean(t == p))


def aa(true_labels, pred_labels, K):
    """Average of the per-class accuracies over the classes present in
    *true_labels*, * 100."""
    t, p = _pair(true_labels, pred_labels)
    for name, v in (('true', t), ('predicted', p)):
        bad = v[(v < 1) | (v > K)]
        if bad.size:
            raise ValueError(f"{name} label {bad[0]} outside 1..{K}")
    per_class = [np.mean(p[t == c] == c) for c in range(1, K + 1) if np.any(t == c)]
    return 100.0 * float(np.mean(per_class))


def _entropy(labels):
    _, counts = np.unique(labels, return_counts=True)
    return float(stats.entropy(counts))


def nmi(true_labels, pred_labels):
    """I(T;P) / sqrt(H(T) H(P)) * 100; NaN when either labelling is constant."""
    t, p = _pair(true_labels, pred_labels)
    if _entropy(t) == 0.0 or _entropy(p) == 0.0:
        return float('nan')
    return 100.0 * float(normalized_mutual_info_score(
        t, p, average_method='geometric'))


def per_class_accuracy(true_labels, pred_labels, K):
    """Accuracy of each class 1..K in percent (NaN for absent classes)."""
    t, p = _pair(true_labels, pred_labels)
    return [100.0 * float(np.mean(p[t == c] == c)) if np.any(t == c) else float('nan')
            for c in range(1, K + 1)]
