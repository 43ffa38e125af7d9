"""Grouped multivariate samples and their mean/covariance estimators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import direct_sum


class DataError(ValueError):
    """Malformed grouped data (shapes, non-finite entries, too few groups)."""


class InsufficientSampleError(DataError):
    """A group has fewer than two observations."""


@dataclass(frozen=True)
class Dataset:
    """``a`` groups of ``d``-variate observations, one ``(n_i, d)`` array per group."""

    groups: tuple
    labels: tuple = field(default=None)

    def __post_init__(self):
        groups = tuple(np.array(g, dtype=float, ndmin=2) for g in self.groups)
        if len(groups) < 2:
            raise DataError(f"need at least 2 groups, got {len(groups)}")
        d = groups[0].shape[1]
        for i, g in enumerate(groups):
            if g.ndim != 2 or g.shape[1] != d:
                raise DataError(f"group {i} has shape {g.shape}, expected (n, {d})")
            if g.shape[0] < 2:
                raise InsufficientSampleError(
                    f"group {i} has {g.shape[0]} observation(s); at least 2 are required"
                )
            if not np.all(np.isfinite(g)):
                raise DataError(f"group {i} contains missing or non-finite values")
            g.setflags(write=False)
        labels = self.labels
        if labels is None:
            labels = tuple(str(i + 1) for i in range(len(groups)))
        elif len(labels) != len(groups):
            raise DataError("number of labels does not match number of groups")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "labels", tuple(str(x) for x in labels))

    @property
    def a(self) -> int:
        return len(self.groups)

    @property
    def d(self) -> int:
        return self.groups[0].shape[1]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.shape[0] for g in self.groups])

    @property
    def N(self) -> int:
        return int(self.sizes.sum())


@dataclass(frozen=True)
class GroupStats:
    group_means: np.ndarray   # (a, d)
    group_covs: np.ndarray    # (a, d, d), divisor n_i - 1
    sizes: np.ndarray         # (a,)

    @property
    def a(self) -> int:
        return self.group_means.shape[0]

    @property
    def d(self) -> int:
        return self.group_means.shape[1]

    @property
    def N(self) -> int:
        return int(self.sizes.sum())

    @property
    def stacked_mean(self) -> np.ndarray:
        return self.group_means.reshape(-1)

    @property
    def pooled_cov(self) -> np.ndarray:
        """N * (direct sum of Sigma_i / n_i), an (ad, ad) block-diagonal matrix."""
        return direct_sum([(self.N / n) * S for n, S in zip(self.sizes, self.group_covs)])


def compute_stats(data: Dataset) -> GroupStats:
    """Group means and unbiased group covariances."""
    means = np.stack([g.mean(axis=0) for g in data.groups])
    covs = np.stack([np.atleast_2d(np.cov(g, rowvar=False, ddof=1)) for g in data.groups])
    return GroupStats(group_means=means, group_covs=covs, sizes=data.sizes)


def _check_component(stats_or_d, j: int) -> None:
    d = stats_or_d if isinstance(stats_or_d, (int, np.integer)) else stats_or_d.d
    if not 0 <= j < d:
        raise IndexError(f"component index {j} out of range for d={d}")


def componentwise_mean(stats: GroupStats, j: int) -> np.ndarray:
    """Vector of the a group means of component ``j`` (0-based)."""
    _check_component(stats, j)
    return stats.group_means[:, j].copy()


def componentwise_cov(stats: GroupStats, j: int) -> np.ndarray:
    """N * diag(var_1j / n_1, ..., var_aj / n_a) for component ``j`` (0-based)."""
    _check_component(stats, j)
    return np.diag(stats.N * stats.group_covs[:, j, j] / stats.sizes)


def selector_matrix(a: int, d: int, j: int) -> np.ndarray:
    """0/1 matrix of shape (a, a*d) extracting component ``j`` of every group mean."""
    if a < 1 or d < 1:
        raise ValueError("a and d must be positive")
    _check_component(d, j)
    A = np.zeros((a, a * d))
    A[np.arange(a), np.arange(a) * d + j] = 1.0
    return A
