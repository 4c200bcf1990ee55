"""Exact sampling of the hidden chain and observations, and empirical triple law.

The hidden chain starts from its stationary distribution; observations are
conditionally independent given the hidden states.  All sampling is driven
by numpy ``SeedSequence`` so that replica r of a sweep uses the derived
seed ``SeedSequence([master_seed, r])`` and results are reproducible
regardless of scheduling.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .params import ThetaParams, stationary_dist
from .triple_law import TripleLaw


@dataclass(frozen=True, eq=False)
class PathSample:
    """One simulated trajectory: hidden states in {0,1}, symbols in {1..K}."""

    hidden: np.ndarray
    observed: np.ndarray
    seed: object

    def __post_init__(self):
        h = np.asarray(self.hidden, dtype=np.int64)
        y = np.asarray(self.observed, dtype=np.int64)
        if h.shape != y.shape or h.ndim != 1:
            raise ValidationError("hidden and observed must be equal-length vectors")
        h.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "hidden", h)
        object.__setattr__(self, "observed", y)

    def __len__(self) -> int:
        return self.hidden.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(self.hidden, self.observed):
            w.writerow([int(x), int(y)])
        return buf.getvalue()


def derive_seed(master_seed, *keys) -> np.random.SeedSequence:
    """Child seed for a replica or stage, stable across thread scheduling."""
    return np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_path(theta: ThetaParams, n: int, seed) -> PathSample:
    """Stationary trajectory of length n; deterministic given the seed."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    batch = sample_paths(theta, n, 1, seed)
    return PathSample(hidden=batch.hidden[0], observed=batch.observed[0], seed=seed)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """R trajectories of common length n, stacked row-wise."""

    hidden: np.ndarray
    observed: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.hidden.shape[0]

    @property
    def length(self) -> int:
        return self.hidden.shape[1]


def sample_paths(theta: ThetaParams, n: int, count: int, seed) -> PathBatch:
    """Vectorized sampler: `count` independent stationary paths of length n."""
    if n < 0 or count < 0:
        raise ValidationError("n and count must be >= 0")
    rng = _rng(seed)
    hidden = np.empty((count, n), dtype=np.int64)
    observed = np.empty((count, n), dtype=np.int64)
    if n == 0 or count == 0:
        return PathBatch(hidden=hidden, observed=observed)
    pi1 = stationary_dist(theta.p, theta.q)[1]
    state = (rng.random(count) < pi1).astype(np.int64)
    hidden[:, 0] = state
    for k in range(1, n):
        u = rng.random(count)
        state = np.where(state == 1, (u >= theta.q), (u < theta.p)).astype(np.int64)
        hidden[:, k] = state
    cdf = np.vstack([np.cumsum(theta.f0), np.cumsum(theta.f1)])
    cdf[:, -1] = 1.0
    u = rng.random((count, n))
    for x in (0, 1):
        mask = hidden == x
        observed[mask] = np.searchsorted(cdf[x], u[mask], side="right") + 1
    return PathBatch(hidden=hidden, observed=observed)


def empirical_triple_law(observed, K: int) -> TripleLaw:
    """p_hat(a,b,c) = (#consecutive triples equal to (a,b,c)) / n.

    The divisor is n, not n - 2, so the total mass is (n-2)/n exactly;
    downstream distance computations never renormalize.
    """
    y = np.asarray(observed, dtype=np.int64)
    n = y.size
    if n < 3:
        raise InsufficientDataError(f"need at least 3 observations, got {n}")
    if y.min() < 1 or y.max() > K:
        raise ValidationError("observed symbols out of range {1..K}")
    idx = (y[:-2] - 1) * K * K + (y[1:-1] - 1) * K + (y[2:] - 1)
    counts = np.bincount(idx, minlength=K**3).astype(float)
    return TripleLaw(probs=(counts / n).reshape(K, K, K))


__all__ = [
    "PathSample",
    "PathBatch",
    "derive_seed",
    "sample_path",
    "sample_paths",
    "empirical_triple_law",
]
