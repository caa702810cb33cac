"""Detectability quantities of a block Markov chain.

``information_quantity`` returns the rate governing how fast the
misclassification error of any algorithm can decay; it vanishes exactly when
two clusters are statistically indistinguishable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, DomainError, NoSignChange, SamePair, ValidationError
from .model import solve_stationary_block

ZERO_TOL = 1e-9


def _check(alpha, p):
    alpha = np.asarray(alpha, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape != (alpha.size, alpha.size):
        raise DimensionMismatch(f"p has shape {p.shape}, alpha has {alpha.size} entries")
    if np.any(alpha <= 0) or np.any(p <= 0):
        raise ValidationError("alpha and p must be strictly positive")
    return alpha, p


def _pair_values(alpha, p, pi):
    K = alpha.size
    logp = np.log(p)
    loga = np.log(alpha)
    out = np.full((K, K), np.inf)
    for a in range(K):
        for b in range(K):
            if a == b:
                continue
            leaving = pi[a] * p[a] * (logp[a] - logp[b])
            entering = pi * p[:, a] * (logp[:, a] + loga[b] - logp[:, b] - loga[a])
            out[a, b] = (leaving + entering).sum() / alpha[a] + pi[b] / alpha[b] - pi[a] / alpha[a]
    return out


def information_pair(alpha, p, a, b):
    """Divergence-like rate of confusing a state of cluster ``a`` for one of cluster ``b``."""
    if a == b:
        raise SamePair(f"cluster pair must be distinct, got ({a}, {b})")
    alpha, p = _check(alpha, p)
    return float(_pair_values(alpha, p, solve_stationary_block(p))[a, b])


def _separation(alpha, p, pi):
    K = alpha.size
    best = np.inf
    for a in range(K):
        for b in range(K):
            if a == b:
                continue
            out_diff = (pi[a] * p[a] / alpha[a] - pi[b] * p[b] / alpha[b]) / alpha
            in_diff = pi * (p[:, a] / alpha[a] - p[:, b] / alpha[b]) / alpha
            best = min(best, float(np.sum(out_diff**2 + in_diff**2)))
    return best


@dataclass(frozen=True)
class InfoReport:
    I: float
    pairwise: np.ndarray
    argmin_pair: tuple
    D: float
    pi: np.ndarray

    def to_dict(self):
        K = self.pairwise.shape[0]
        return {
            "I": self.I,
            "D": self.D,
            "argmin_pair": list(self.argmin_pair),
            "pi": self.pi.tolist(),
            "pairwise": [[None if a == b else float(self.pairwise[a, b]) for b in range(K)] for a in range(K)],
        }


def information_quantity(alpha, p):
    """Minimum pairwise information ``I``, all pairwise values, and the separation ``D``."""
    alpha, p = _check(alpha, p)
    pi = solve_stationary_block(p)
    if alpha.size == 1:
        return InfoReport(np.inf, np.full((1, 1), np.inf), (0, 0), np.inf, pi)
    pairwise = _pair_values(alpha, p, pi)
    a, b = np.unravel_index(np.argmin(pairwise), pairwise.shape)
    return InfoReport(float(pairwise[a, b]), pairwise, (int(a), int(b)), _separation(alpha, p, pi), pi)


def check_zero_condition(alpha, p, tol=ZERO_TOL):
    """Return ``(True, (i, j))`` if clusters ``i`` and ``j`` cannot be told apart, else ``(False, None)``.

    Two clusters are indistinguishable when they have identical outgoing rows
    and their incoming columns agree after dividing by cluster size.
    """
    alpha, p = _check(alpha, p)
    K = alpha.size
    for i in range(K):
        for j in range(i + 1, K):
            same_out = np.all(np.abs(p[i] - p[j]) <= tol)
            same_in = np.all(np.abs(p[:, i] / alpha[i] - p[:, j] / alpha[j]) <= tol)
            if same_out and same_in:
                return True, (i, j)
    return False, None


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Transition rates of a single re-wired state.

    ``q_to[k]`` scales the rate from cluster ``k`` into the state, ``q_from``
    is the distribution of its outgoing jumps over clusters.
    """

    q_to: np.ndarray
    q_from: np.ndarray

    def __post_init__(self):
        q_to = np.asarray(self.q_to, dtype=float)
        q_from = np.asarray(self.q_from, dtype=float)
        if q_to.shape != q_from.shape or q_to.ndim != 1:
            raise DimensionMismatch("q_to and q_from must be 1-D of equal length")
        if np.any(q_to <= 0) or np.any(q_from <= 0):
            raise DomainError("perturbation entries must be > 0")
        if abs(q_from.sum() - 1.0) > 1e-9:
            raise DomainError(f"q_from sums to {q_from.sum()!r}, not 1")
        object.__setattr__(self, "q_to", q_to)
        object.__setattr__(self, "q_from", q_from)

    @classmethod
    def of_cluster(cls, alpha, p, c):
        """The rates a typical member of cluster ``c`` already has."""
        p = np.asarray(p, dtype=float)
        return cls(p[:, c] / alpha[c], p[c])

    def mix(self, other, lam):
        return Perturbation(lam * self.q_to + (1 - lam) * other.q_to, lam * self.q_from + (1 - lam) * other.q_from)


def perturbation_functional(q, alpha, p, a, pi=None):
    """Leading-order expected log-likelihood ratio of re-wiring a cluster-``a`` state to ``q``."""
    alpha, p = _check(alpha, p)
    if not 0 <= a < alpha.size:
        raise DomainError(f"cluster index {a} out of range")
    if pi is None:
        pi = solve_stationary_block(p)
    if np.any(q.q_to <= 0) or np.any(q.q_from <= 0):
        raise DomainError("log argument must be positive")
    inflow = float(pi @ q.q_to)
    out_term = inflow * q.q_from * (np.log(q.q_from) - np.log(p[a]))
    in_term = pi * q.q_to * (np.log(q.q_to) + np.log(alpha[a]) - np.log(p[:, a]))
    return float(np.sum(out_term + in_term) + pi[a] / alpha[a] - inflow)


@dataclass(frozen=True)
class BalancedPerturbation:
    q: Perturbation
    lam: float
    value: float
    gap: float


def find_balanced_perturbation(alpha, p, a, b, tol=1e-9, max_iter=200):
    """Bisect along the segment between the native rates of ``a`` and ``b`` for equal functionals.

    Returns the perturbation together with the mixing weight on cluster
    ``a``'s rates, the common functional value and the residual gap.
    """
    if a == b:
        raise SamePair(f"cluster pair must be distinct, got ({a}, {b})")
    alpha, p = _check(alpha, p)
    pi = solve_stationary_block(p)
    qa = Perturbation.of_cluster(alpha, p, a)
    qb = Perturbation.of_cluster(alpha, p, b)

    def g(lam):
        q = qa.mix(qb, lam)
        return perturbation_functional(q, alpha, p, a, pi) - perturbation_functional(q, alpha, p, b, pi)

    lo, hi = 0.0, 1.0
    g_lo, g_hi = g(lo), g(hi)
    if g_lo * g_hi > 0:
        raise NoSignChange(f"g(0)={g_lo:.3g} and g(1)={g_hi:.3g} share a sign")
    lam = lo if abs(g_lo) < abs(g_hi) else hi
    g_mid = min(g_lo, g_hi, key=abs)
    for _ in range(max_iter):
        if abs(g_mid) < tol:
            break
        lam = 0.5 * (lo + hi)
        g_mid = g(lam)
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = lam, g_mid
        else:
            hi = lam
    q = qa.mix(qb, lam)
    return BalancedPerturbation(q, lam, perturbation_functional(q, alpha, p, a, pi), abs(g_mid))


def two_cluster_p(p12, p21):
    return np.array([[1.0 - p12, p12], [p21, 1.0 - p21]])


def feasibility_raster(alpha, grid_resolution, threshold=1.0):
    """Evaluate ``I`` on a grid of two-cluster kernels.

    Cell ``(i, j)`` sits at ``p12 = (i + 0.5) / res`` and ``p21 = (j + 0.5) / res``.
    Returns the grid coordinates, the ``I`` values and the mask ``I > threshold``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size != 2:
        raise DimensionMismatch("the raster is defined for two clusters")
    if grid_resolution < 2:
        raise ValidationError("grid_resolution must be >= 2")
    axis = (np.arange(grid_resolution) + 0.5) / grid_resolution
    values = np.empty((grid_resolution, grid_resolution))
    for i, p12 in enumerate(axis):
        for j, p21 in enumerate(axis):
            values[i, j] = information_quantity(alpha, two_cluster_p(p12, p21)).I
    return axis, values, values > threshold
