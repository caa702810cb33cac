"""Likelihood-based refinement of a state partition.

Each step re-estimates block parameters from the current partition and moves
every state to the cluster maximising its log-likelihood score. All states
are updated from the same estimates (a parallel update).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, EmptyCluster, ValidationError, ZeroRowWarning
from .metrics import misclassification
from .model import Partition
from .simulate import CountMatrix


@dataclass(frozen=True, eq=False)
class ClusterEstimates:
    p_hat: np.ndarray
    pi_hat: np.ndarray
    alpha_hat: np.ndarray
    floor: float


def _as_counts(counts):
    return counts if isinstance(counts, CountMatrix) else CountMatrix(np.asarray(counts))


def block_counts(counts, part):
    """``B[a, b]`` = number of observed jumps from cluster ``a`` to cluster ``b``."""
    Z = part.indicator()
    return Z.T @ counts.counts @ Z


def estimate_parameters(counts, part):
    """Block kernel, cluster visit frequencies and cluster fractions implied by ``part``.

    Kernel entries below ``1/(2T)`` are raised to that floor and rows
    renormalised so that logarithms stay finite.
    """
    counts = _as_counts(counts)
    if not part.is_complete:
        raise EmptyCluster(f"cannot estimate from empty clusters, sizes {part.sizes.tolist()}")
    T = counts.T
    if T < 1:
        raise ValidationError("need at least one observed transition")
    B = block_counts(counts, part)
    leaving = B.sum(axis=1)
    p_hat = np.empty_like(B)
    zero = leaving == 0
    if zero.any():
        warnings.warn(
            f"clusters {np.flatnonzero(zero).tolist()} were never left; using uniform rows",
            ZeroRowWarning,
            stacklevel=2,
        )
        p_hat[zero] = 1.0 / part.K
    p_hat[~zero] = B[~zero] / leaving[~zero, None]
    floor = 1.0 / (2.0 * T)
    p_hat = np.maximum(p_hat, floor)
    p_hat /= p_hat.sum(axis=1, keepdims=True)
    return ClusterEstimates(p_hat, leaving / T, part.sizes / part.n, floor)


def objective_matrix(counts, part, estimates):
    """All scores ``u[x, c]`` at once; see :func:`objective`."""
    counts = _as_counts(counts)
    p_hat, alpha_hat = estimates.p_hat, estimates.alpha_hat
    if np.any(p_hat <= 0) or np.any(alpha_hat <= 0):
        raise DomainError("estimates must be strictly positive before taking logs")
    Z = part.indicator()
    N = counts.counts.astype(float)
    to_clusters = N @ Z
    from_clusters = N.T @ Z
    log_p = np.log(p_hat)
    U = to_clusters @ log_p.T + from_clusters @ log_p
    U -= from_clusters.sum(axis=1, keepdims=True) * np.log(alpha_hat)[None, :]
    U -= (counts.T / counts.n) * (estimates.pi_hat / alpha_hat)[None, :]
    return U


def objective(counts, part, estimates, x, c):
    """Log-likelihood score of placing state ``x`` in cluster ``c``."""
    return float(objective_matrix(counts, part, estimates)[x, c])


@dataclass
class StepResult:
    partition: Partition
    scores: np.ndarray
    empty: bool


def improvement_step(counts, part, K=None):
    """One parallel reassignment of every state to its best-scoring cluster.

    Ties go to the lowest cluster index. The output may contain empty
    clusters; ``StepResult.empty`` flags this.
    """
    counts = _as_counts(counts)
    K = part.K if K is None else K
    if K != part.K:
        raise ValidationError(f"partition has K={part.K}, expected {K}")
    U = objective_matrix(counts, part, estimate_parameters(counts, part))
    new = Partition(np.argmax(U, axis=1), K, allow_empty=True)
    return StepResult(new, U, not new.is_complete)


@dataclass
class ImprovementTrace:
    """Per-iteration record: partitions, reassignment counts and, if truth is known, error rates."""

    partitions: list = field(default_factory=list)
    reassignments: list = field(default_factory=list)
    error_rates: list = field(default_factory=list)
    converged: bool = False
    empty_cluster: bool = False

    @property
    def iterations(self):
        return list(zip(self.partitions, self.error_rates or [None] * len(self.partitions), self.reassignments))

    @property
    def final(self):
        return self.partitions[-1]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iter,reassignments,error_rate\n")
            for i, r in enumerate(self.reassignments, start=1):
                err = f"{self.error_rates[i - 1]:.10g}" if self.error_rates else ""
                fh.write(f"{i},{r},{err}\n")


def default_iterations(n):
    return max(1, math.ceil(math.log(n)))


def improve(counts, initial, max_iters=None, truth=None, callback=None):
    """Repeat :func:`improvement_step` until nothing moves, a cluster empties, or ``max_iters``.

    ``callback(step_index, input_partition, step_result)`` is invoked after
    every step, e.g. to audit the scores.
    """
    counts = _as_counts(counts)
    max_iters = default_iterations(counts.n) if max_iters is None else max_iters
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    trace = ImprovementTrace()
    current = initial
    for i in range(max_iters):
        step = improvement_step(counts, current)
        if callback is not None:
            callback(i, current, step)
        moved = int(np.count_nonzero(step.partition.labels != current.labels))
        trace.partitions.append(step.partition)
        trace.reassignments.append(moved)
        if truth is not None:
            trace.error_rates.append(misclassification(truth, step.partition).rate)
        if step.empty:
            trace.empty_cluster = True
            break
        if moved == 0:
            trace.converged = True
            break
        current = step.partition
    return trace
