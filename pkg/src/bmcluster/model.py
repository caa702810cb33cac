"""Block Markov chain models, state partitions and stationary distributions.

States and clusters are indexed from zero throughout the package.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import (
    ClusterTooSmall,
    DimensionMismatch,
    DomainError,
    EmptyCluster,
    Reducible,
    SingularSystem,
    ValidationError,
)

STOCHASTIC_TOL = 1e-12
ALPHA_TOL = 1e-9


def _separability(p):
    # largest ratio between two entries sharing a row or sharing a column
    rows = (p.max(axis=1) / p.min(axis=1)).max()
    cols = (p.max(axis=0) / p.min(axis=0)).max()
    return float(max(rows, cols))


@dataclass(frozen=True, eq=False)
class BmcModel:
    """Block-level parameters of a block Markov chain.

    Parameters
    ----------
    alpha : array-like of shape (K,)
        Limiting cluster fractions; strictly positive and summing to one.
    p : array-like of shape (K, K)
        Row-stochastic block transition kernel with strictly positive entries.
    """

    alpha: np.ndarray
    p: np.ndarray
    eta: float = field(init=False)

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        p = np.array(self.p, dtype=float)
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValidationError("alpha must be a non-empty 1-D array", field="alpha")
        K = alpha.size
        if p.shape != (K, K):
            raise DimensionMismatch(
                f"p must have shape ({K}, {K}) to match alpha, got {p.shape}", field="p"
            )
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValidationError("every alpha_k must be > 0", field="alpha")
        if abs(alpha.sum() - 1.0) > ALPHA_TOL:
            raise ValidationError(f"alpha sums to {alpha.sum()!r}, not 1", field="alpha")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValidationError("every entry of p must be > 0", field="p")
        dev = np.abs(p.sum(axis=1) - 1.0).max()
        if dev > STOCHASTIC_TOL:
            raise ValidationError(f"rows of p deviate from 1 by {dev:.3g}", field="p")
        alpha.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "eta", _separability(p))

    @property
    def K(self):
        return self.alpha.size

    @cached_property
    def pi(self):
        """Stationary distribution of the block kernel ``p``."""
        return solve_stationary_block(self.p)

    def partition(self, n):
        return Partition.from_fractions(n, self.alpha)

    def kernel(self, n):
        """State-level kernel on ``n`` states with the default sorted partition."""
        return build_transition_matrix(self, self.partition(n))

    def to_dict(self):
        return {"K": self.K, "alpha": self.alpha.tolist(), "p": self.p.tolist()}

    @classmethod
    def from_dict(cls, data):
        """Build a model from a mapping with keys ``alpha``, ``p`` and optionally ``K``, ``n``."""
        for key in ("alpha", "p"):
            if key not in data:
                raise ValidationError(f"model is missing required key {key!r}", field=key)
        model = cls(data["alpha"], data["p"])
        if "K" in data and int(data["K"]) != model.K:
            raise DimensionMismatch(
                f"K={data['K']} but alpha has {model.K} entries", field="K"
            )
        if "n" in data:
            n = data["n"]
            if not isinstance(n, int) or n < 2 * model.K:
                raise ValidationError(f"n must be an integer >= 2K, got {n!r}", field="n")
        return model


class Partition:
    """Assignment of ``n`` states to ``K`` clusters.

    ``labels[x]`` is the cluster of state ``x``. Empty clusters are rejected
    unless ``allow_empty`` is set; clustering algorithms may legitimately
    produce them.
    """

    def __init__(self, labels, K=None, *, allow_empty=False):
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a non-empty 1-D array", field="labels")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.mod(labels, 1) == 0):
                raise ValidationError("labels must be integers", field="labels")
        labels = labels.astype(np.intp)
        if labels.min() < 0:
            raise ValidationError("labels must be nonnegative", field="labels")
        if K is None:
            K = int(labels.max()) + 1
        if labels.max() >= K:
            raise DimensionMismatch(f"label {labels.max()} out of range for K={K}", field="labels")
        labels.setflags(write=False)
        self.labels = labels
        self.K = int(K)
        if not allow_empty and not self.is_complete:
            empty = [k for k in range(self.K) if self.sizes[k] == 0]
            raise EmptyCluster(f"clusters {empty} are empty", field="labels")

    @property
    def n(self):
        return self.labels.size

    @cached_property
    def sizes(self):
        return np.bincount(self.labels, minlength=self.K)

    @cached_property
    def members(self):
        """Tuple of index arrays, one per cluster, each sorted ascending."""
        order = np.argsort(self.labels, kind="stable")
        return tuple(np.split(order, np.cumsum(self.sizes)[:-1]))

    @property
    def is_complete(self):
        return bool(np.all(self.sizes > 0))

    def indicator(self):
        """One-hot ``(n, K)`` membership matrix."""
        Z = np.zeros((self.n, self.K))
        Z[np.arange(self.n), self.labels] = 1.0
        return Z

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.K == other.K and np.array_equal(self.labels, other.labels)

    def __repr__(self):
        return f"Partition(n={self.n}, K={self.K}, sizes={self.sizes.tolist()})"

    @classmethod
    def from_fractions(cls, n, alpha):
        """Sorted partition with sizes ``floor(n * alpha_k)``.

        Leftover states go one each to the clusters with the largest
        fractional parts (lower index first on ties).
        """
        alpha = np.asarray(alpha, dtype=float)
        if n < alpha.size:
            raise ValidationError(f"n={n} is smaller than K={alpha.size}", field="n")
        exact = n * alpha
        sizes = np.floor(exact).astype(int)
        leftover = n - sizes.sum()
        frac = exact - sizes
        order = np.lexsort((np.arange(alpha.size), -frac))
        sizes[order[:leftover]] += 1
        return cls(np.repeat(np.arange(alpha.size), sizes), alpha.size)

    @classmethod
    def from_members(cls, members, n=None):
        members = [np.asarray(m, dtype=np.intp) for m in members]
        total = sum(m.size for m in members)
        n = total if n is None else n
        labels = np.full(n, -1, dtype=np.intp)
        for k, m in enumerate(members):
            if np.any(labels[m] >= 0):
                raise ValidationError("member lists overlap", field="members")
            labels[m] = k
        if np.any(labels < 0):
            raise ValidationError("member lists do not cover every state", field="members")
        return cls(labels, len(members))


@dataclass(frozen=True, eq=False)
class StateKernel:
    """State-level transition matrix ``P`` with its exact stationary law ``Pi``."""

    P: np.ndarray
    Pi: np.ndarray
    partition: Partition | None = None

    @property
    def n(self):
        return self.P.shape[0]


def is_irreducible(p):
    """Breadth-first reachability on the support of ``p`` in both directions."""
    support = np.asarray(p) > 0
    K = support.shape[0]

    def reaches_all(adj):
        seen = np.zeros(K, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(adj[i] & ~seen):
                seen[j] = True
                queue.append(j)
        return seen.all()

    return reaches_all(support) and reaches_all(support.T)


def _balance_solve(M, weights):
    # x^T M = x^T with weights . x = 1, last balance equation replaced by normalization
    K = M.shape[0]
    A = M.T - np.eye(K)
    A[-1] = weights
    b = np.zeros(K)
    b[-1] = 1.0
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"balance equations are singular: {exc}") from exc
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise SingularSystem("balance solve produced a non-positive solution")
    return x


def solve_stationary_block(p):
    """Stationary distribution ``pi`` of a ``K x K`` stochastic matrix."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"p must be square, got shape {p.shape}", field="p")
    if not is_irreducible(p):
        raise Reducible("p is not irreducible")
    return _balance_solve(p, np.ones(p.shape[0]))


def build_transition_matrix(model, part):
    """State-level kernel of the chain defined by ``model`` on partition ``part``."""
    if part.K != model.K:
        raise DimensionMismatch(f"partition has K={part.K}, model has K={model.K}")
    sizes = part.sizes
    if np.any(sizes < 2):
        raise ClusterTooSmall(f"every cluster needs >= 2 states, sizes are {sizes.tolist()}")
    s = part.labels
    same = s[:, None] == s[None, :]
    P = model.p[s[:, None], s[None, :]] / (sizes[s][None, :] - same)
    np.fill_diagonal(P, 0.0)
    Pi = solve_stationary_exact(P, part)
    return StateKernel(P, Pi, part)


def solve_stationary_exact(P, part):
    """Exact stationary law of a block-structured kernel via the reduced K x K system.

    States in one cluster share a stationary mass, so the balance equations
    collapse to one per cluster. The result is exactly constant on clusters.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (part.n, part.n):
        raise DimensionMismatch(f"P has shape {P.shape}, partition has n={part.n}")
    reps = np.array([m[0] for m in part.members])
    # M[k, l] = total rate from the states of cluster k into one state of cluster l
    M = np.stack([np.bincount(part.labels, weights=P[:, y], minlength=part.K) for y in reps], axis=1)
    cluster_mass = _balance_solve(M, part.sizes.astype(float))
    return cluster_mass[part.labels]


def mixing_time_bound(eta, epsilon):
    """Upper bound ``-c_mix * ln(epsilon)`` on the mixing time, ``c_mix = -1/ln(1 - 1/(2 eta))``."""
    if not (eta >= 1 and math.isfinite(eta)):
        raise DomainError(f"eta must be a finite real >= 1, got {eta!r}")
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    c_mix = -1.0 / math.log1p(-1.0 / (2.0 * eta))
    return -c_mix * math.log(epsilon)


def load_model(path):
    """Read a model from a JSON or TOML file and validate it.

    Returns the model and the optional ``n`` stored alongside it.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        import tomli

        data = tomli.loads(text)
    else:
        data = json.loads(text)
    model = BmcModel.from_dict(data)
    return model, data.get("n")


# Parameter sets used by the bundled experiments.
PRESETS = {
    # strongly diagonal, easy to cluster
    "demo": BmcModel([0.15, 0.35, 0.5], [[0.92, 0.045, 0.035], [0.0125, 0.8975, 0.09], [0.0175, 0.02, 0.9625]]),
    # harder three-cluster model used for the spectral sweep
    "spectral": BmcModel([0.15, 0.35, 0.5], [[0.50, 0.20, 0.30], [0.10, 0.70, 0.20], [0.35, 0.05, 0.60]]),
    # equal sizes, dominant off-diagonal transitions
    "improvement": BmcModel([1 / 3, 1 / 3, 1 / 3], [[0.1, 0.4, 0.5], [0.7, 0.1, 0.2], [0.6, 0.3, 0.1]]),
}
