"""Evaluation metrics: AUC/ROC for link prediction, NMI for clusterings,
factor-based labeling and dense reconstruction."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from .core import EvalReport, LatentState, SideInfo
from .optim import predict

RECONSTRUCT_MAX_N = 5000


def _check_binary_labels(scores: np.ndarray, labels: np.ndarray) -> Tuple[int, int]:
    if scores.shape != labels.shape:
        raise ValueError(
            f"scores and labels lengths differ: {scores.size} vs {labels.size}"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = int(labels.sum())
    neg = int(labels.size - pos)
    if pos == 0 or neg == 0:
        raise ValueError("need at least one positive and one negative label")
    return pos, neg


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outranks a random negative,
    counting ties as one half (the Mann-Whitney statistic)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos, neg = _check_binary_labels(scores, labels)
    ranks = rankdata(scores, method="average")
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def roc(
    scores: Sequence[float], labels: Sequence[int]
) -> Tuple[Tuple[float, float], ...]:
    """(fpr, tpr) points of the threshold sweep, descending by score.

    Tied scores enter together as a single point, so the trapezoidal area
    over the points equals the tie-aware AUC. Starts at (0, 0), ends at
    (1, 1), both coordinates non-decreasing.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos, neg = _check_binary_labels(scores, labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last position of each distinct score group
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    group_ends = np.concatenate([boundary, [scores.size - 1]])
    tp = np.cumsum(sorted_labels)[group_ends]
    fp = group_ends + 1 - tp
    points = [(0.0, 0.0)]
    points.extend((float(f) / neg, float(t) / pos) for f, t in zip(fp, tp))
    return tuple(points)


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def nmi(a: Sequence[int], b: Sequence[int]) -> float:
    """Mutual information between two labelings, normalized by the
    arithmetic mean of their entropies (natural logs).

    1.0 for labelings identical up to permutation; 0.0 when either
    labeling carries no information (including the degenerate case of
    two constant labelings).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("labelings must be equal-length nonempty vectors")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    joint = np.bincount(ai * kb + bi, minlength=ka * kb).astype(np.float64)
    joint = joint.reshape(ka, kb)
    h_a = _entropy(joint.sum(axis=1))
    h_b = _entropy(joint.sum(axis=0))
    if h_a + h_b == 0.0:
        return 0.0
    h_joint = _entropy(joint.ravel())
    mutual = h_a + h_b - h_joint
    return float(np.clip(mutual / ((h_a + h_b) / 2.0), 0.0, 1.0))


def factor_labels(U: np.ndarray) -> np.ndarray:
    """Cluster labels from a factor matrix: per-row argmax column, ties to
    the lowest column index."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] < 1:
        raise ValueError("factor matrix must be n x d with d >= 1")
    return np.argmax(U, axis=1)


def reconstruct(state: LatentState, side: Optional[SideInfo] = None) -> np.ndarray:
    """Dense n x n matrix of link probabilities sigma(H_ij)."""
    n = state.n
    if n > RECONSTRUCT_MAX_N:
        raise ValueError(
            f"refusing to materialize a {n} x {n} matrix (limit {RECONSTRUCT_MAX_N})"
        )
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pairs = np.column_stack([ii.ravel(), jj.ravel()])
    return predict(state, pairs, side).reshape(n, n)


def holdout_report(
    state: LatentState,
    test: Sequence[Tuple[int, int, int]],
    side: Optional[SideInfo] = None,
    nmi_value: Optional[float] = None,
) -> EvalReport:
    """Score held-out labeled entries: AUC, ROC points and the total
    Bernoulli log-likelihood of the test set (probabilities clamped away
    from 0 and 1)."""
    pairs = [(i, j) for i, j, _ in test]
    labels = np.asarray([s for _, _, s in test])
    scores = predict(state, pairs, side)
    ll = float(np.sum(np.where(labels == 1, np.log(scores), np.log1p(-scores))))
    return EvalReport(
        auc=auc(scores, labels),
        roc=roc(scores, labels),
        holdout_log_likelihood=ll,
        nmi=nmi_value,
    )
