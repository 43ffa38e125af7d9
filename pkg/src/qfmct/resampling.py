"""Replicate generation: Gaussian Monte-Carlo, parametric and wild bootstrap.

Random numbers are drawn in fixed-size chunks of replicates. Chunk ``c``
always uses the substream ``SeedSequence(seed, spawn_key=(tag, c))``, so the
replicate matrix is a pure function of the inputs, the seed and ``B`` and does
not depend on how many workers produced it.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset, GroupStats, compute_stats
from .hypotheses import HypothesisPartition
from .linalg import DEFAULT_RTOL, sym_sqrt
from .quadform import QFKind, q_from_moments, weight_matrix

CHUNK = 128

TAG_MC, TAG_PB, TAG_WB = 1, 2, 3

SQRT5 = np.sqrt(5.0)
MAMMEN_LOW = -(SQRT5 - 1.0) / 2.0
MAMMEN_HIGH = (SQRT5 + 1.0) / 2.0
MAMMEN_P_LOW = (SQRT5 + 1.0) / (2.0 * SQRT5)


class WeightDist(str, Enum):
    NORMAL = "normal"
    RADEMACHER = "rademacher"
    MAMMEN = "mammen"

    @classmethod
    def parse(cls, value) -> "WeightDist":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown wild-bootstrap weights {value!r}; choose from "
                             f"{[w.value for w in cls]}") from None


@dataclass(frozen=True)
class ReplicateMatrix:
    values: np.ndarray   # (B, L)
    method: str          # "mc", "pb" or "wb:<weights>"
    kind: QFKind
    master_seed: int

    @property
    def B(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]


def draw_weights(dist, size, rng: np.random.Generator) -> np.ndarray:
    """Mean-zero, unit-variance multiplier weights."""
    dist = WeightDist.parse(dist)
    if dist is WeightDist.NORMAL:
        return rng.standard_normal(size)
    u = rng.random(size)
    if dist is WeightDist.RADEMACHER:
        return np.where(u < 0.5, -1.0, 1.0)
    return np.where(u < MAMMEN_P_LOW, MAMMEN_LOW, MAMMEN_HIGH)


def mvn_sample(Sigma, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw(s) from N(0, Sigma) as Sigma^1/2 z."""
    R = sym_sqrt(Sigma)
    p = R.shape[0]
    shape = (p,) if size is None else (size, p)
    return rng.standard_normal(shape) @ R


def _chunk_rng(seed: int, tag: int, c: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, c)))


def _run_chunks(fn, B: int, seed: int, tag: int, L: int, workers: int) -> np.ndarray:
    if B < 1:
        raise ValueError("B must be at least 1")
    bounds = [(s, min(s + CHUNK, B)) for s in range(0, B, CHUNK)]
    out = np.empty((B, L))

    def job(c):
        s, e = bounds[c]
        out[s:e] = fn(_chunk_rng(seed, tag, c), e - s)

    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(job, range(len(bounds))))
    else:
        for c in range(len(bounds)):
            job(c)
    return out


def monte_carlo_from_cov(Sigma, partition: HypothesisPartition, kind, B: int, seed: int,
                         workers: int = 1, rtol: float = DEFAULT_RTOL) -> ReplicateMatrix:
    """Replicates of the Gaussian limit vector for a fixed covariance ``Sigma``.

    M and v are computed once from ``Sigma``; each replicate draws
    Z ~ N(0, Sigma) and evaluates (C Z)' M (C Z) / sqrt(v) per block.
    """
    kind = QFKind.parse(kind)
    Sigma = np.asarray(Sigma, dtype=float)
    R = sym_sqrt(Sigma, rtol)
    blocks = []
    for C, _ in partition.blocks:
        M = weight_matrix(C, Sigma, kind, rtol)
        K = C.T @ M @ C @ Sigma
        v = 2.0 * np.trace(K @ K)
        blocks.append((C, M, v))
    p = Sigma.shape[0]

    def chunk(rng, b):
        Z = rng.standard_normal((b, p)) @ R
        res = np.zeros((b, len(blocks)))
        for l, (C, M, v) in enumerate(blocks):
            if v > 0:
                y = Z @ C.T
                res[:, l] = np.einsum("bi,ij,bj->b", y, M, y) / np.sqrt(v)
        return np.maximum(res, 0.0)

    vals = _run_chunks(chunk, B, seed, TAG_MC, partition.L, workers)
    return ReplicateMatrix(vals, "mc", kind, int(seed))


def monte_carlo_replicates(stats: GroupStats, partition: HypothesisPartition, kind, B: int,
                           seed: int, workers: int = 1) -> ReplicateMatrix:
    return monte_carlo_from_cov(stats.pooled_cov, partition, kind, B, seed, workers)


def _pooled_batch(sizes, covs_by_group) -> np.ndarray:
    """Stack of block-diagonal N * (+) Sigma_i / n_i from per-group ``(b, d, d)`` stacks."""
    N = float(np.sum(sizes))
    b, d = covs_by_group[0].shape[0], covs_by_group[0].shape[1]
    a = len(covs_by_group)
    out = np.zeros((b, a * d, a * d))
    for i, (n, S) in enumerate(zip(sizes, covs_by_group)):
        out[:, i * d:(i + 1) * d, i * d:(i + 1) * d] = (N / n) * S
    return out


def _q_batch(partition, means, covs, N, kind, rtol) -> np.ndarray:
    return np.column_stack([q_from_moments(C, None, means, covs, N, kind, rtol)
                            for C, _ in partition.blocks])


def pb_moment_sampler(data: Dataset, rtol: float = DEFAULT_RTOL):
    """Chunk sampler ``(rng, b) -> (means, pooled_covs)`` for the parametric bootstrap.

    Bootstrap samples are X*_ik ~ N(0, Sigma_i hat). With X* = Y Sigma_i^1/2 and
    standard normal Y, the bootstrap mean and covariance are those of Y
    mapped through Sigma_i^1/2, which avoids materialising X*.
    """
    stats = compute_stats(data)
    roots = [sym_sqrt(S, rtol) for S in stats.group_covs]
    sizes, d = stats.sizes, stats.d

    def sample(rng, b):
        means, covs = [], []
        for n, R in zip(sizes, roots):
            Y = rng.standard_normal((b, n, d))
            m = Y.mean(axis=1)
            Yc = Y - m[:, None, :]
            cov_y = np.swapaxes(Yc, 1, 2) @ Yc / (n - 1)
            means.append(m @ R)
            covs.append(R @ cov_y @ R)
        return np.concatenate(means, axis=1), _pooled_batch(sizes, covs)

    return sample


def wb_moment_sampler(data: Dataset, wdist="normal"):
    """Chunk sampler for the wild bootstrap X+_ik = W_ik (X_ik - Xbar_i)."""
    wdist = WeightDist.parse(wdist)
    centred = [g - g.mean(axis=0) for g in data.groups]
    outer = [(E[:, :, None] * E[:, None, :]).reshape(E.shape[0], -1) for E in centred]
    sizes, d = data.sizes, data.d

    def sample(rng, b):
        means, covs = [], []
        for n, E, EE in zip(sizes, centred, outer):
            W = draw_weights(wdist, (b, n), rng)
            m = W @ E / n
            second = ((W * W) @ EE).reshape(b, d, d)
            means.append(m)
            covs.append((second - n * m[:, :, None] * m[:, None, :]) / (n - 1))
        return np.concatenate(means, axis=1), _pooled_batch(sizes, covs)

    return sample


def resample_statistic(sampler, statistic, B: int, seed: int, width: int, tag: int,
                       workers: int = 1) -> np.ndarray:
    """Apply ``statistic(means, covs) -> (b, width)`` to B bootstrap draws."""
    return _run_chunks(lambda rng, b: statistic(*sampler(rng, b)), B, seed, tag, width, workers)


def parametric_bootstrap_replicates(data: Dataset, partition: HypothesisPartition, kind,
                                    B: int, seed: int, workers: int = 1,
                                    rtol: float = DEFAULT_RTOL) -> ReplicateMatrix:
    """Parametric bootstrap Q-vectors, M and v recomputed from each bootstrap covariance."""
    kind = QFKind.parse(kind)
    N = data.N
    vals = resample_statistic(pb_moment_sampler(data, rtol),
                              lambda m, S: _q_batch(partition, m, S, N, kind, rtol),
                              B, seed, partition.L, TAG_PB, workers)
    return ReplicateMatrix(vals, "pb", kind, int(seed))


def wild_bootstrap_replicates(data: Dataset, partition: HypothesisPartition, kind, B: int,
                              seed: int, wdist="normal", workers: int = 1,
                              rtol: float = DEFAULT_RTOL) -> ReplicateMatrix:
    """Wild bootstrap Q-vectors with i.i.d. mean-zero unit-variance weights."""
    kind = QFKind.parse(kind)
    wdist = WeightDist.parse(wdist)
    N = data.N
    vals = resample_statistic(wb_moment_sampler(data, wdist),
                              lambda m, S: _q_batch(partition, m, S, N, kind, rtol),
                              B, seed, partition.L, TAG_WB, workers)
    return ReplicateMatrix(vals, f"wb:{wdist.value}", kind, int(seed))


def replicates(method: str, data: Dataset, partition: HypothesisPartition, kind, B: int,
               seed: int, wdist="normal", workers: int = 1) -> ReplicateMatrix:
    """Dispatch on ``method`` in {"mc", "pb", "wb"}."""
    method = str(method).lower()
    if method == "mc":
        return monte_carlo_replicates(compute_stats(data), partition, kind, B, seed, workers)
    if method == "pb":
        return parametric_bootstrap_replicates(data, partition, kind, B, seed, workers)
    if method == "wb":
        return wild_bootstrap_replicates(data, partition, kind, B, seed, wdist, workers)
    raise ValueError(f"unknown resampling method {method!r}; choose mc, pb or wb")
