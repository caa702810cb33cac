"""Equilibrium trajectories of a state kernel and their transition counts."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatch, StateOutOfRange, ValidationError

_CHUNK = 1 << 16


def make_rng(seed):
    """Counter-based generator; distinct seeds give independent streams."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    seed: int | None = None

    @property
    def T(self):
        return self.states.size - 1

    def dump(self, path, n):
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"# n={n} T={self.T} seed={self.seed}\n")
            np.savetxt(fh, self.states, fmt="%d")

    @classmethod
    def load(cls, path):
        """Read a dump written by :meth:`dump`; returns ``(trajectory, n)``."""
        path = Path(path)
        with path.open() as fh:
            header = fh.readline()
            if not header.startswith("#"):
                raise ValidationError(f"{path}: missing '# n=... T=... seed=...' header")
            meta = dict(tok.split("=", 1) for tok in header[1:].split())
            states = np.loadtxt(fh, dtype=np.int64, ndmin=1)
        seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
        traj = cls(states, seed)
        if "T" in meta and int(meta["T"]) != traj.T:
            raise ValidationError(f"{path}: header says T={meta['T']}, file has {traj.T}")
        return traj, int(meta["n"])


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Observed transition counts ``counts[x, y]`` of one trajectory."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DimensionMismatch(f"counts must be square, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValidationError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self):
        return self.counts.shape[0]

    @cached_property
    def out_visits(self):
        return self.counts.sum(axis=1)

    @cached_property
    def in_visits(self):
        return self.counts.sum(axis=0)

    @property
    def T(self):
        # rounding keeps real-valued (expected) count matrices at their intended total
        return int(round(float(self.counts.sum())))

    def to_csv(self, path):
        np.savetxt(path, self.counts, fmt="%d", delimiter=",")

    @classmethod
    def from_csv(cls, path):
        return cls(np.loadtxt(path, dtype=np.int64, delimiter=",", ndmin=2))


def _cumulative_rows(P):
    cum = np.cumsum(P, axis=1)
    cum /= cum[:, -1:]
    return [row.tolist() for row in cum]


def _walk(kernel, T, seed):
    """Yield chunks of consecutive states, starting with ``X_0`` drawn from ``Pi``."""
    if T < 0:
        raise ValidationError(f"T must be nonnegative, got {T}")
    rng = make_rng(seed)
    start = np.cumsum(kernel.Pi)
    x = min(int(np.searchsorted(start / start[-1], rng.random(), side="right")), kernel.n - 1)
    rows = _cumulative_rows(kernel.P)
    yield np.array([x])
    remaining = T
    while remaining:
        u = rng.random(min(remaining, _CHUNK)).tolist()
        out = np.empty(len(u), dtype=np.int64)
        for i, ui in enumerate(u):
            x = bisect_right(rows[x], ui)
            out[i] = x
        remaining -= len(u)
        yield out


def simulate_trajectory(kernel, T, seed):
    """Sample ``X_0, ..., X_T`` from ``kernel`` started in equilibrium."""
    return Trajectory(np.concatenate(list(_walk(kernel, T, seed))), seed)


def simulate_counts(kernel, T, seed):
    """Transition counts of :func:`simulate_trajectory` without keeping the path.

    Bit-identical to ``count_matrix(simulate_trajectory(kernel, T, seed), n)``.
    """
    n = kernel.n
    flat = np.zeros(n * n, dtype=np.int64)
    prev = None
    for chunk in _walk(kernel, T, seed):
        if prev is not None:
            src = np.concatenate(([prev], chunk[:-1]))
            flat += np.bincount(src * n + chunk, minlength=n * n)
        prev = chunk[-1]
    return CountMatrix(flat.reshape(n, n))


def count_matrix(traj, n):
    states = np.asarray(traj.states if isinstance(traj, Trajectory) else traj, dtype=np.int64)
    if states.size and (states.min() < 0 or states.max() >= n):
        raise StateOutOfRange(f"trajectory visits states outside [0, {n})")
    idx = states[:-1] * n + states[1:]
    return CountMatrix(np.bincount(idx, minlength=n * n).reshape(n, n))


def expected_count_matrix(kernel, T):
    """Mean transition counts ``T * Pi_x * P[x, y]`` under equilibrium."""
    return T * kernel.Pi[:, None] * kernel.P
