"""scikit-learn style clusterers over the transition counts of a trajectory.

``X`` passed to ``fit`` is an ``n x n`` matrix of observed transition counts
(or a :class:`~bmcluster.simulate.CountMatrix`); the fitted ``labels_`` give
one cluster per state.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count_matrix, check_partition
from .improve import estimate_parameters, improve
from .spectral import spectral_cluster


class SpectralClustering(ClusterMixin, BaseEstimator):
    """Initial state clustering from a trimmed rank-``K`` approximation.

    Parameters
    ----------
    n_clusters : int
        Number of clusters ``K``.
    method : {"kmeans", "neighborhood"}
        How states are grouped from the low-rank profiles.
    random_state : int or None
        Seed for the k-means initialisation.
    """

    def __init__(self, n_clusters=2, method="kmeans", random_state=None):
        self.n_clusters = n_clusters
        self.method = method
        self.random_state = random_state

    def fit(self, X, y=None):
        counts = check_count_matrix(X)
        result = spectral_cluster(counts, self.n_clusters, method=self.method, random_state=self.random_state)
        self.result_ = result
        self.labels_ = result.clusters.labels
        self.singular_values_ = result.singular_values
        self.centers_ = result.centers
        self.retained_ = result.gamma
        return self


class ClusterImprovement(ClusterMixin, BaseEstimator):
    """Likelihood refinement of a given initial partition.

    Parameters
    ----------
    n_clusters : int
    init : array-like of shape (n_states,)
        Initial labels in ``{0, ..., n_clusters - 1}``.
    max_iter : int or None
        Iteration cap; ``None`` means ``ceil(ln n)``.
    """

    def __init__(self, n_clusters=2, init=None, max_iter=None):
        self.n_clusters = n_clusters
        self.init = init
        self.max_iter = max_iter

    def fit(self, X, y=None):
        counts = check_count_matrix(X)
        if self.init is None:
            raise ValueError("init labels are required")
        start = check_partition(self.init, counts.n, self.n_clusters)
        self._refine(counts, start)
        return self

    def _refine(self, counts, start):
        trace = improve(counts, start, self.max_iter)
        self.trace_ = trace
        self.labels_ = trace.final.labels
        self.n_iter_ = len(trace.reassignments)
        self.converged_ = trace.converged
        if trace.final.is_complete:
            est = estimate_parameters(counts, trace.final)
            self.p_hat_, self.pi_hat_, self.alpha_hat_ = est.p_hat, est.pi_hat, est.alpha_hat


class BlockMarkovClustering(ClusterImprovement):
    """Two-stage recovery: spectral initialisation followed by likelihood refinement.

    Parameters
    ----------
    n_clusters : int
    max_iter : int or None
        Refinement iterations; ``0`` keeps the spectral labels.
    spectral_method : {"kmeans", "neighborhood"}
    random_state : int or None
    """

    def __init__(self, n_clusters=2, max_iter=None, spectral_method="kmeans", random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.spectral_method = spectral_method
        self.random_state = random_state

    def fit(self, X, y=None):
        counts = check_count_matrix(X)
        spectral = SpectralClustering(self.n_clusters, self.spectral_method, self.random_state).fit(counts)
        self.spectral_ = spectral
        self.spectral_labels_ = spectral.labels_
        start = spectral.result_.clusters
        if self.max_iter == 0 or not start.is_complete:
            self.labels_ = spectral.labels_
            self.trace_ = None
            self.n_iter_ = 0
            self.converged_ = False
            return self
        self._refine(counts, start)
        return self

    def estimates(self):
        check_is_fitted(self, "labels_")
        return self.p_hat_, self.pi_hat_, self.alpha_hat_
