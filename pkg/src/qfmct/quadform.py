"""Standardized quadratic-form statistics and their Gaussian limits.

For a block ``C`` with weight matrix ``M`` the statistic is

    Q = N (C xbar - beta)' M (C xbar - beta) / sqrt(v),   v = 2 tr[(C' M C Sigma)^2],

and Q := 0 whenever v == 0. Because tr[(C'MC Sigma)^2] = tr[(M S)^2] with
``S = C Sigma C'``, every statistic only needs the ``r x r`` matrix S, which
is what the batched routine :func:`q_from_moments` exploits.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import GroupStats
from .hypotheses import HypothesisPartition
from .linalg import (DEFAULT_RTOL, DimensionError, batch_pseudo_inverse, pseudo_inverse,
                     sym_eig, sym_sqrt)


class QFKind(str, Enum):
    ATS = "ats"           # M = I
    ATS_STD = "ats_std"   # M = I / tr(C Sigma C')
    WTS = "wts"           # M = (C Sigma C')^+

    @classmethod
    def parse(cls, value) -> "QFKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown statistic {value!r}; choose from "
                             f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class QStatVector:
    values: np.ndarray
    v_hat: np.ndarray
    kind: QFKind
    labels: tuple

    @property
    def L(self) -> int:
        return self.values.shape[0]


def weight_matrix(C, Sigma, kind, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """The weight matrix M(C, Sigma) of the given statistic kind."""
    kind = QFKind.parse(kind)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (C.shape[1], C.shape[1]):
        raise DimensionError(f"C has {C.shape[1]} columns but Sigma has shape {Sigma.shape}")
    r = C.shape[0]
    if kind is QFKind.ATS:
        return np.eye(r)
    S = C @ Sigma @ C.T
    S = 0.5 * (S + S.T)
    if kind is QFKind.ATS_STD:
        tr = np.trace(S)
        return np.eye(r) / tr if tr > 0 else np.zeros((r, r))
    return pseudo_inverse(S, rtol)


def _standardizer(C, M, Sigma) -> float:
    K = C.T @ M @ C @ Sigma
    return 2.0 * float(np.trace(K @ K))


def q_statistic(C, beta, xbar, Sigma, N, kind, rtol: float = DEFAULT_RTOL) -> tuple[float, float]:
    """Single standardized quadratic form; returns ``(Q, v_hat)``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    beta = np.zeros(C.shape[0]) if beta is None else np.asarray(beta, dtype=float).reshape(-1)
    if xbar.shape[0] != C.shape[1] or beta.shape[0] != C.shape[0]:
        raise DimensionError("inconsistent shapes of C, beta and xbar")
    M = weight_matrix(C, Sigma, kind, rtol)
    v = _standardizer(C, M, np.asarray(Sigma, dtype=float))
    if not v > 0:
        return 0.0, max(v, 0.0)
    y = C @ xbar - beta
    return max(float(N * (y @ M @ y) / np.sqrt(v)), 0.0), v


def q_from_moments(C, beta, means, covs, N, kind, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Vectorised Q for a batch of stacked means ``(B, p)`` and covariances ``(B, p, p)``.

    ``beta`` may be None for the centred (bootstrap) statistic. ``covs`` may
    also be a single ``(p, p)`` matrix shared by the whole batch.
    """
    kind = QFKind.parse(kind)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    y = np.asarray(means, dtype=float) @ C.T
    if beta is not None:
        y = y - np.asarray(beta, dtype=float)
    S = C @ np.asarray(covs, dtype=float) @ C.T
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    if S.ndim == 2:
        S = np.broadcast_to(S, (y.shape[0],) + S.shape)

    if kind is QFKind.WTS:
        Sp = batch_pseudo_inverse(S, rtol)
        num = np.einsum("bi,bij,bj->b", y, Sp, y)
        MS = Sp @ S
        tr2 = np.einsum("bij,bji->b", MS, MS)
    else:
        num = np.einsum("bi,bi->b", y, y)
        tr2 = np.einsum("bij,bij->b", S, S)
        if kind is QFKind.ATS_STD:
            t = np.trace(S, axis1=1, axis2=2)
            pos = t > 0
            inv_t = np.where(pos, 1.0 / np.where(pos, t, 1.0), 0.0)
            num = num * inv_t
            tr2 = tr2 * inv_t ** 2
    v = 2.0 * tr2
    ok = v > 0
    Q = np.zeros_like(num)
    Q[ok] = N * num[ok] / np.sqrt(v[ok])
    return np.maximum(Q, 0.0)


def q_vector(partition: HypothesisPartition, stats: GroupStats, kind,
             rtol: float = DEFAULT_RTOL) -> QStatVector:
    """Observed statistics for every block of a partition."""
    kind = QFKind.parse(kind)
    if partition.n_cols != stats.a * stats.d:
        raise DimensionError(f"partition has {partition.n_cols} columns, data has a*d = "
                             f"{stats.a * stats.d}")
    xbar = stats.stacked_mean
    Sigma = stats.pooled_cov
    vals, vs = [], []
    for C, beta in partition.blocks:
        Q, v = q_statistic(C, beta, xbar, Sigma, stats.N, kind, rtol)
        vals.append(Q)
        vs.append(v)
    return QStatVector(np.array(vals), np.array(vs), kind, partition.labels)


def limit_weights(C, Sigma, kind, rtol: float = DEFAULT_RTOL) -> tuple[np.ndarray, float]:
    """Eigen-weights of the weighted chi-square limit of one block, plus v.

    Returns the ``r`` largest eigenvalues of Sigma^1/2 C' M C Sigma^1/2
    (clipped at zero) and ``v = 2 tr[(C' M C Sigma)^2]``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Sigma = np.asarray(Sigma, dtype=float)
    M = weight_matrix(C, Sigma, kind, rtol)
    R = sym_sqrt(Sigma, rtol)
    K = R @ C.T @ M @ C @ R
    lam = np.clip(sym_eig(0.5 * (K + K.T)).values, 0.0, None)
    r = min(C.shape[0], lam.shape[0])
    return lam[:r], _standardizer(C, M, Sigma)


def sample_limit(weights, v: float, count: int, seed=None) -> np.ndarray:
    """Draws of sum_i w_i chi2_1 / sqrt(v)."""
    if not v > 0:
        raise ValueError("limit law needs v > 0")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    rng = np.random.default_rng(seed)
    chi = rng.chisquare(1.0, size=(count, weights.shape[0]))
    return chi @ weights / np.sqrt(v)


def analytic_cross_covariance(C1, C2, Sigma, kind, rtol: float = DEFAULT_RTOL) -> float:
    """Covariance of two limit components when both local nulls hold.

    Uses 2 tr(A1 Sigma A2 Sigma) / sqrt(v1 v2) with ``A_k = C_k' M_k C_k``.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    C1 = np.atleast_2d(np.asarray(C1, dtype=float))
    C2 = np.atleast_2d(np.asarray(C2, dtype=float))
    A1 = C1.T @ weight_matrix(C1, Sigma, kind, rtol) @ C1
    A2 = C2.T @ weight_matrix(C2, Sigma, kind, rtol) @ C2
    v1 = 2.0 * np.trace(A1 @ Sigma @ A1 @ Sigma)
    v2 = 2.0 * np.trace(A2 @ Sigma @ A2 @ Sigma)
    if not (v1 > 0 and v2 > 0):
        raise ValueError("cross-covariance undefined for a block with zero standardizer")
    return float(2.0 * np.trace(A1 @ Sigma @ A2 @ Sigma) / np.sqrt(v1 * v2))
