import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch, ValidationError
from .model import Partition
from .simulate import CountMatrix, Trajectory, count_matrix


def check_count_matrix(X, n_states=None):
    """Coerce ``X`` to a :class:`CountMatrix`.

    Accepts a ``CountMatrix``, a square array of nonnegative integer counts,
    or a ``Trajectory`` (which then requires ``n_states``).
    """
    if isinstance(X, CountMatrix):
        return X
    if isinstance(X, Trajectory):
        if n_states is None:
            raise ValidationError("n_states is required to count a trajectory")
        return count_matrix(X, n_states)
    A = check_array(X, dtype=None, ensure_min_samples=2, ensure_min_features=2)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"count matrix must be square, got {A.shape}")
    if np.any(A < 0) or np.any(np.mod(A, 1) != 0):
        raise ValidationError("count matrix entries must be nonnegative integers")
    return CountMatrix(A.astype(np.int64))


def check_partition(labels, n, K):
    if isinstance(labels, Partition):
        part = labels
    else:
        part = Partition(np.asarray(labels), K)
    if part.n != n:
        raise DimensionMismatch(f"partition covers {part.n} states, counts have {n}")
    if part.K != K:
        raise DimensionMismatch(f"partition has K={part.K}, expected {K}")
    return part
