"""Simultaneous calibration, the QFMCT decision rule and the baseline tests.

Quantile calibration uses equal local levels: every column gets its
empirical (1 - beta) quantile, and beta is the largest value on the grid
{k/B} for which at most a fraction alpha of replicate rows exceeds any of
the per-column quantiles.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, compute_stats
from .hypotheses import HypothesisPartition, global_partition, tukey_contrast, tukey_labels
from .quadform import QFKind, QStatVector, q_vector
from .resampling import (TAG_PB, TAG_WB, ReplicateMatrix, WeightDist, pb_moment_sampler,
                         replicates, resample_statistic, wb_moment_sampler)

EQUICOORDINATE_DRAWS = 10_000


@dataclass(frozen=True)
class TestResult:
    alpha: float
    local_quantiles: np.ndarray
    local_level: float
    local_reject: np.ndarray
    global_reject: bool
    adjusted_p: np.ndarray
    statistics: np.ndarray
    labels: tuple
    method: str
    B: int
    observed: QStatVector | None = field(default=None, compare=False)

    __test__ = False   # not a pytest class

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "method": self.method,
            "B": self.B,
            "labels": list(self.labels),
            "statistics": self.statistics.tolist(),
            "local_quantiles": self.local_quantiles.tolist(),
            "local_level": self.local_level,
            "local_reject": [bool(x) for x in self.local_reject],
            "global_reject": bool(self.global_reject),
            "adjusted_p": self.adjusted_p.tolist(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "TestResult":
        return cls(alpha=float(rec["alpha"]),
                   local_quantiles=np.array(rec["local_quantiles"], dtype=float),
                   local_level=float(rec["local_level"]),
                   local_reject=np.array(rec["local_reject"], dtype=bool),
                   global_reject=bool(rec["global_reject"]),
                   adjusted_p=np.array(rec["adjusted_p"], dtype=float),
                   statistics=np.array(rec["statistics"], dtype=float),
                   labels=tuple(rec["labels"]), method=str(rec["method"]), B=int(rec["B"]))


def _values(reps) -> np.ndarray:
    X = reps.values if isinstance(reps, ReplicateMatrix) else np.asarray(reps, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _exceed_counts(sorted_cols: np.ndarray, X: np.ndarray) -> np.ndarray:
    """For each entry X[b, l]: number of replicates in column l that are >= it."""
    B = sorted_cols.shape[0]
    return np.column_stack([B - np.searchsorted(sorted_cols[:, l], X[:, l], side="left")
                            for l in range(X.shape[1])])


def _row_levels(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted columns and, per row, the smallest tail count m at which it exceeds.

    Row b exceeds the quantile vector of tail count m (column-wise the
    (B - m)-th order statistic) iff min_l #{x_l >= X[b, l]} <= m.
    """
    S = np.sort(X, axis=0)
    return S, np.sort(_exceed_counts(S, X).min(axis=1))


def _calibrate(X: np.ndarray, alpha: float):
    B = X.shape[0]
    if B < 2:
        raise ValueError("calibration needs at least 2 replicates")
    S, t = _row_levels(X)
    budget = np.floor(alpha * B + 1e-9)
    # largest m in [0, B-1] with #{t_b <= m} <= budget
    m = int(min(t[int(budget)] - 1, B - 1)) if budget < B else B - 1
    return S, t, m


def calibrate_quantiles(reps, alpha: float) -> tuple[np.ndarray, float]:
    """Per-column critical values with joint exceedance rate at most ``alpha``.

    Returns ``(quantiles, beta_star)``.
    """
    _check_alpha(alpha)
    X = _values(reps)
    S, _, m = _calibrate(X, alpha)
    B = X.shape[0]
    return S[B - m - 1].copy(), m / B


def exceeds(Q, q) -> np.ndarray:
    """Decision ``Q / q > 1`` with the convention 0/0 := 1 (so it reduces to Q > q)."""
    return np.asarray(Q, dtype=float) > np.asarray(q, dtype=float)


def adjusted_p_values(reps, observed) -> np.ndarray:
    """Single-step min-p adjusted p-values matching :func:`calibrate_quantiles`.

    With u_l = #{b: Q^b_l >= Q_l} and t_b the smallest per-column exceedance
    count of replicate row b, the adjusted p-value is
    (1 + #{b: t_b <= u_l}) / (B + 1).
    """
    X = _values(reps)
    Q = np.asarray(observed.values if isinstance(observed, QStatVector) else observed,
                   dtype=float).reshape(-1)
    if X.shape[0] < 2:
        raise ValueError("adjusted p-values need at least 2 replicates")
    if Q.shape[0] != X.shape[1]:
        raise ValueError("observed vector and replicate matrix disagree on L")
    S, t = _row_levels(X)
    u = _exceed_counts(S, Q[None, :])[0]
    F = np.searchsorted(t, u, side="right")
    return (1.0 + F) / (X.shape[0] + 1.0)


def decide(reps, observed, alpha: float, method: str = "", labels=None) -> TestResult:
    """Calibrate on ``reps`` and apply the decision rule to ``observed``."""
    _check_alpha(alpha)
    X = _values(reps)
    obs = observed if isinstance(observed, QStatVector) else None
    Q = np.asarray(obs.values if obs is not None else observed, dtype=float)
    q, beta = calibrate_quantiles(X, alpha)
    rej = exceeds(Q, q)
    if labels is None:
        labels = obs.labels if obs is not None else tuple(str(l + 1) for l in range(len(Q)))
    return TestResult(alpha=float(alpha), local_quantiles=q, local_level=beta,
                      local_reject=rej, global_reject=bool(rej.any()),
                      adjusted_p=adjusted_p_values(X, Q), statistics=Q, labels=tuple(labels),
                      method=method, B=X.shape[0], observed=obs)


def qfmct_test(data: Dataset, partition: HypothesisPartition, kind="ats", method="pb",
               alpha: float = 0.05, B: int = 1000, seed: int = 0, wdist="normal",
               workers: int = 1) -> TestResult:
    """Quadratic-form based multiple contrast test.

    ``method`` selects the critical-value engine: "mc" (Gaussian limit with
    the estimated covariance), "pb" (parametric bootstrap) or "wb" (wild
    bootstrap with weights ``wdist``).
    """
    kind = QFKind.parse(kind)
    _check_alpha(alpha)
    observed = q_vector(partition, compute_stats(data), kind)
    reps = replicates(method, data, partition, kind, B, seed, wdist, workers)
    return decide(reps, observed, alpha, method=f"qfmct-{reps.method}-{kind.value}")


def classic_ats_global(data: Dataset, alpha: float = 0.05, B: int = 1000, seed: int = 0,
                       method="pb", wdist="normal", workers: int = 1) -> TestResult:
    """Global ATS test of equal mean vectors with bootstrap critical value."""
    res = qfmct_test(data, global_partition(data.a, data.d), QFKind.ATS, method, alpha, B,
                     seed, wdist, workers)
    return _retag(res, f"ats-{method}")


def _retag(res: TestResult, method: str) -> TestResult:
    return TestResult(**{**res.__dict__, "method": method})


def _t_stats(C: np.ndarray, means: np.ndarray, covs: np.ndarray, N: int) -> np.ndarray:
    """sqrt(N) c'x / sqrt(c' Sigma c) per row c of C; zero where the variance is zero."""
    num = np.sqrt(N) * (means @ C.T)
    var = np.einsum("kp,...pq,kq->...k", C, covs, C)
    pos = var > 0
    return np.where(pos, num / np.sqrt(np.where(pos, var, 1.0)), 0.0)


def _upper_order_stat(x: np.ndarray, alpha: float) -> float:
    """The ceil((1 - alpha) n)-th order statistic of x."""
    x = np.sort(x)
    k = int(np.ceil((1.0 - alpha) * x.shape[0] - 1e-9))
    return float(x[max(k, 1) - 1])


def classic_mct_test(data: Dataset, alpha: float = 0.05, B: int = 1000, method="eq",
                     seed: int = 0, wdist="normal", workers: int = 1,
                     n_draws: int = EQUICOORDINATE_DRAWS) -> TestResult:
    """Max-|t| multiple contrast test over the Tukey-type contrasts.

    ``method="eq"`` uses the Monte-Carlo equicoordinate quantile of
    max|G|, G ~ N(0, R) with R the estimated correlation of the contrasts
    (``n_draws`` draws); "pb" and "wb" bootstrap max|T*| with means and
    covariances recomputed per replicate.
    """
    _check_alpha(alpha)
    stats = compute_stats(data)
    C = tukey_contrast(data.a, data.d)
    Sigma = stats.pooled_cov
    T = np.abs(_t_stats(C, stats.stacked_mean, Sigma, stats.N))
    method = str(method).lower()

    if method == "eq":
        V = C @ Sigma @ C.T
        sd = np.sqrt(np.clip(np.diag(V), 0.0, None))
        inv = np.where(sd > 0, 1.0 / np.where(sd > 0, sd, 1.0), 0.0)
        R = V * np.outer(inv, inv)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4,)))
        G = rng.multivariate_normal(np.zeros(len(T)), R, size=n_draws, method="eigh")
        maxima = np.abs(G).max(axis=1)
    elif method in ("pb", "wb"):
        if method == "pb":
            sampler, tag = pb_moment_sampler(data), TAG_PB
        else:
            sampler, tag = wb_moment_sampler(data, WeightDist.parse(wdist)), TAG_WB
        maxima = resample_statistic(
            sampler, lambda m, S: np.abs(_t_stats(C, m, S, stats.N)).max(axis=1, keepdims=True),
            B, seed, 1, tag, workers)[:, 0]
    else:
        raise ValueError(f"unknown MCT method {method!r}; choose eq, pb or wb")

    q = _upper_order_stat(maxima, alpha)
    rej = T > q
    n = maxima.shape[0]
    adj = (1.0 + (maxima[None, :] >= T[:, None]).sum(axis=1)) / (n + 1.0)
    return TestResult(alpha=float(alpha), local_quantiles=np.full(len(T), q),
                      local_level=float(alpha), local_reject=rej, global_reject=bool(rej.any()),
                      adjusted_p=adj, statistics=T,
                      labels=tuple(tukey_labels(data.a, data.d, list(data.labels))),
                      method=f"mct-{method}", B=n)
