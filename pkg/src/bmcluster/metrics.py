"""Misclassification counts under the best matching of cluster labels."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import DimensionMismatch
from .model import Partition

EXHAUSTIVE_MAX_K = 8


def _labels(part):
    return part.labels if isinstance(part, Partition) else np.asarray(part, dtype=np.intp)


@dataclass(frozen=True)
class ErrorReport:
    """Result of matching estimated labels to true labels.

    ``best_perm[k]`` is the estimated label matched with true cluster ``k``.
    """

    mismatches: int
    rate: float
    best_perm: tuple

    def relabel(self, estimate):
        """Rename estimated labels to the true cluster they were matched with."""
        est = _labels(estimate)
        inverse = np.full(max(len(self.best_perm), est.max() + 1), -1, dtype=np.intp)
        for k, j in enumerate(self.best_perm):
            inverse[j] = k
        return inverse[est]


def agreement_matrix(truth, estimate, K):
    C = np.zeros((K, K), dtype=np.int64)
    np.add.at(C, (truth, estimate), 1)
    return C


def misclassification(truth, estimate):
    """Number of states outside their true cluster after optimally renaming estimated labels."""
    t, e = _labels(truth), _labels(estimate)
    if t.shape != e.shape:
        raise DimensionMismatch(f"truth has {t.size} states, estimate has {e.size}")
    K = int(max(t.max(), e.max())) + 1
    for part in (truth, estimate):
        if isinstance(part, Partition):
            K = max(K, part.K)
    C = agreement_matrix(t, e, K)
    if K <= EXHAUSTIVE_MAX_K:
        perms = np.array(list(permutations(range(K))))
        agree = C[np.arange(K), perms].sum(axis=1)
        best = perms[int(np.argmax(agree))]
    else:
        _, best = linear_sum_assignment(C, maximize=True)
    mismatches = int(t.size - C[np.arange(K), best].sum())
    return ErrorReport(mismatches, mismatches / t.size, tuple(int(j) for j in best))


def baseline_rates(alpha, K=None):
    """Error of random assignment and of putting every state in the smallest cluster."""
    alpha = np.asarray(alpha, dtype=float)
    K = alpha.size if K is None else K
    return 1.0 - 1.0 / K, 1.0 - float(alpha.min())
