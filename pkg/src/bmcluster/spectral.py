"""Spectral stage: trimming, rank-K approximation and neighbourhood clustering of states."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DomainError, SvdFailure, TrimClampWarning, ValidationError
from .model import Partition
from .simulate import CountMatrix, expected_count_matrix


def trim_count(n, T, K=1):
    """Number of most-visited states to discard, clamped to ``[0, n - K]``."""
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    ratio = T / n
    # exp(-x ln x) written as x**-x keeps exact powers exact
    r = int(math.floor(n * ratio ** (-ratio)))
    limit = max(n - K, 0)
    if r > limit:
        warnings.warn(
            f"trimming formula removes {r} of {n} states at T/n={ratio:.3g}; clamped to {limit}",
            TrimClampWarning,
            stacklevel=3,
        )
        return limit
    return r


def trim(counts, K=1):
    """Zero the rows and columns of the most-visited states.

    Visits are in-visits plus out-visits; among equally visited states the
    lower index is kept. Returns the retained state indices and the trimmed
    count matrix.
    """
    N = counts.counts
    n = counts.n
    r = trim_count(n, counts.T, K)
    visits = counts.out_visits + counts.in_visits
    # descending visits, higher index first among ties, so lower indices survive
    order = np.lexsort((-np.arange(n), -visits))
    removed = np.sort(order[:r])
    keep = np.ones(n, dtype=bool)
    keep[removed] = False
    trimmed = N.copy()
    trimmed[~keep, :] = 0
    trimmed[:, ~keep] = 0
    return np.flatnonzero(keep), CountMatrix(trimmed)


def rank_k_approx(matrix, K):
    """Best rank-``K`` Frobenius approximation and all singular values, descending."""
    A = np.asarray(matrix.counts if isinstance(matrix, CountMatrix) else matrix, dtype=float)
    if not 1 <= K <= min(A.shape):
        raise ValidationError(f"K={K} must lie in [1, {min(A.shape)}]")
    try:
        U, s, Vt = np.linalg.svd(A)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
    R = (U[:, :K] * s[:K]) @ Vt[:K]
    return R, s


def neighborhood_radius(n, T):
    """Radius ``(1/n) (T/n)^{3/2} (ln T/n)^{4/3}`` of the state neighbourhoods."""
    if T <= n:
        raise DomainError(f"the neighbourhood radius needs T > n, got T={T}, n={n}")
    ratio = T / n
    return ratio**1.5 * math.log(ratio) ** (4.0 / 3.0) / n


def _profile_distances(R):
    # rows of [R, R^T]: each state's outgoing and incoming profile side by side
    profiles = np.hstack([R, R.T])
    return cdist(profiles, profiles)


@dataclass(frozen=True, eq=False)
class SpectralResult:
    gamma: np.ndarray
    rank_k: np.ndarray
    singular_values: np.ndarray
    centers: np.ndarray
    clusters: Partition
    h_n: float


def _neighborhood_clusters(dist, K, h):
    n = dist.shape[0]
    near = dist <= h
    assigned = np.zeros(n, dtype=bool)
    labels = np.full(n, -1, dtype=np.intp)
    centers = np.empty(K, dtype=np.intp)
    for k in range(K):
        gain = (near & ~assigned[None, :]).sum(axis=1)
        z = int(np.argmax(gain))
        if gain[z] == 0:
            # every state is already covered: fall back to the state farthest
            # from the centers chosen so far so that cluster k is not empty
            spread = dist[:, centers[:k]].min(axis=1)
            spread[centers[:k]] = -np.inf
            z = int(np.argmax(spread))
            labels[z] = k
            assigned[z] = True
        else:
            new = near[z] & ~assigned
            labels[new] = k
            assigned |= new
        centers[k] = z
    rest = np.flatnonzero(labels < 0)
    if rest.size:
        labels[rest] = np.argmin(dist[np.ix_(rest, centers)], axis=1)
    return labels, centers


def _kmeans_clusters(R, K, random_state):
    from sklearn.cluster import KMeans

    profiles = np.hstack([R, R.T])
    km = KMeans(n_clusters=K, n_init=10, random_state=random_state).fit(profiles)
    centers = np.array([int(np.argmin(((profiles - c) ** 2).sum(axis=1))) for c in km.cluster_centers_])
    return km.labels_.astype(np.intp), centers


def spectral_cluster(counts, K, method="neighborhood", random_state=None):
    """Initial clustering from the rank-``K`` approximation of the trimmed counts.

    ``method="neighborhood"`` grows clusters around greedily chosen centers
    and sends leftovers to the nearest center; ``method="kmeans"`` runs
    Lloyd's algorithm on the same state profiles instead.
    """
    if not isinstance(counts, CountMatrix):
        counts = CountMatrix(np.asarray(counts))
    n = counts.n
    if K == 1:
        R, s = rank_k_approx(counts, 1)
        return SpectralResult(np.arange(n), R, s, np.array([0]), Partition(np.zeros(n, dtype=np.intp), 1), np.nan)
    gamma, trimmed = trim(counts, K)
    R, s = rank_k_approx(trimmed, K)
    h = neighborhood_radius(n, counts.T)
    if method == "neighborhood":
        labels, centers = _neighborhood_clusters(_profile_distances(R), K, h)
    elif method == "kmeans":
        labels, centers = _kmeans_clusters(R, K, random_state)
    else:
        raise ValidationError(f"unknown clustering method {method!r}")
    return SpectralResult(gamma, R, s, centers, Partition(labels, K, allow_empty=True), h)


def spectral_noise_norm(counts, kernel, K=None):
    """Spectral norm of the trimmed counts minus their equilibrium mean."""
    if K is None:
        K = kernel.partition.K if kernel.partition is not None else 1
    _, trimmed = trim(counts, K)
    diff = trimmed.counts - expected_count_matrix(kernel, counts.T)
    try:
        return float(np.linalg.norm(diff, 2))
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
