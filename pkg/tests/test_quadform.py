import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from conftest import random_dataset, random_psd, seeds
from qfmct.data import Dataset, compute_stats
from qfmct.hypotheses import (HypothesisPartition, global_partition, pairwise_group_equality,
                              per_component_equality)
from qfmct.linalg import DimensionError
from qfmct.quadform import (QFKind, analytic_cross_covariance, limit_weights, q_from_moments,
                            q_statistic, q_vector, sample_limit, weight_matrix)
from qfmct.resampling import mvn_sample

KINDS = list(QFKind)


def test_two_group_ats_equals_squared_welch_t(rng):
    x, y = rng.normal(0, 1, 9), rng.normal(0.4, 2, 14)
    st_ = compute_stats(Dataset((x[:, None], y[:, None])))
    Q, v = q_statistic([[1.0, -1.0]], None, st_.stacked_mean, st_.pooled_cov, st_.N, "ats")
    t = sps.ttest_ind(x, y, equal_var=False).statistic
    assert Q == pytest.approx(t ** 2 / np.sqrt(2), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, c=st.sampled_from([2.0, -1.0, 1e-3]), kind=st.sampled_from(KINDS))
def test_row_scaling_invariance(seed, c, kind):
    rng = np.random.default_rng(seed)
    st_ = compute_stats(random_dataset(rng, a=3, d=3))
    for C, beta in pairwise_group_equality(3, 3).blocks + per_component_equality(3, 3).blocks:
        Q1, _ = q_statistic(C, beta, st_.stacked_mean, st_.pooled_cov, st_.N, kind)
        Q2, _ = q_statistic(c * C, c * beta, st_.stacked_mean, st_.pooled_cov, st_.N, kind)
        assert Q2 == pytest.approx(Q1, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_ats_identity_equals_ats_standardized(seed):
    rng = np.random.default_rng(seed)
    st_ = compute_stats(random_dataset(rng, a=4, d=3))
    for part in (per_component_equality(4, 3), pairwise_group_equality(4, 3), global_partition(4, 3)):
        np.testing.assert_allclose(q_vector(part, st_, "ats").values,
                                   q_vector(part, st_, "ats_std").values, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, kind=st.sampled_from(KINDS))
def test_batched_route_matches_literal_route(seed, kind):
    rng = np.random.default_rng(seed)
    p = 6
    C = rng.standard_normal((int(rng.integers(1, 4)), p))
    beta = rng.standard_normal(C.shape[0])
    means = rng.standard_normal((5, p))
    covs = np.stack([random_psd(rng, p, rank=int(rng.integers(1, p + 1))) for _ in range(5)])
    got = q_from_moments(C, beta, means, covs, 17, kind)
    for b in range(5):
        Q, _ = q_statistic(C, beta, means[b], covs[b], 17, kind)
        assert got[b] == pytest.approx(Q, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_weight_matrix_symmetric_psd(rng, kind):
    Sigma = random_psd(rng, 6, rank=4)
    M = weight_matrix(rng.standard_normal((3, 6)), Sigma, kind)
    np.testing.assert_allclose(M, M.T, atol=1e-14)
    assert np.linalg.eigvalsh(M).min() > -1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_zero_standardizer_gives_zero(kind):
    # component 2 has no variance at all in either group
    g1 = np.array([[0.0, 1.0], [1.0, 1.0], [3.0, 1.0]])
    g2 = np.array([[2.0, 5.0], [0.0, 5.0]])
    st_ = compute_stats(Dataset((g1, g2)))
    qv = q_vector(per_component_equality(2, 2), st_, kind)
    assert qv.values[1] == 0.0 and qv.v_hat[1] == 0.0
    assert qv.values[0] > 0 and np.all(np.isfinite(qv.values))


def test_shape_errors(rng):
    with pytest.raises(DimensionError):
        q_statistic(np.eye(2), None, np.zeros(3), np.eye(3), 5, "ats")
    st_ = compute_stats(random_dataset(rng, a=2, d=2))
    with pytest.raises(DimensionError):
        q_vector(per_component_equality(3, 2), st_, "ats")
    with pytest.raises(ValueError):
        QFKind.parse("mats")


@settings(max_examples=30, deadline=None)
@given(seed=seeds, kind=st.sampled_from(KINDS))
def test_limit_weights_moments(seed, kind):
    rng = np.random.default_rng(seed)
    Sigma = random_psd(rng, 6)
    C = rng.standard_normal((3, 6))
    lam, v = limit_weights(C, Sigma, kind)
    A = C.T @ weight_matrix(C, Sigma, kind) @ C
    # E[sum lam chi2] = tr(A Sigma), Var = 2 sum lam^2 = v
    assert lam.sum() == pytest.approx(np.trace(A @ Sigma), rel=1e-9)
    assert 2 * np.sum(lam ** 2) == pytest.approx(v, rel=1e-9)


def test_wts_weights_are_ones(rng):
    lam, v = limit_weights(per_component_equality(3, 2).blocks[0][0], random_psd(rng, 6), "wts")
    np.testing.assert_allclose(lam, [1.0, 1.0, 0.0], atol=1e-9)
    assert v == pytest.approx(4.0)


def test_two_route_limit_sampling():
    rng = np.random.default_rng(11)
    Sigma = random_psd(rng, 6)
    C = per_component_equality(3, 2).blocks[0][0]
    for kind in ("ats", "wts"):
        lam, v = limit_weights(C, Sigma, kind)
        a = sample_limit(lam, v, 100_000, seed=1)
        M = weight_matrix(C, Sigma, kind)
        z = mvn_sample(Sigma, np.random.default_rng(2), size=100_000) @ C.T
        b = np.einsum("bi,ij,bj->b", z, M, z) / np.sqrt(v)
        assert sps.ks_2samp(a, b).statistic < 0.02
        assert abs(a.var() - 1.0) < 0.05


def test_sample_limit_rejects_bad_input():
    with pytest.raises(ValueError):
        sample_limit([1.0], 0.0, 10)
    with pytest.raises(ValueError):
        sample_limit([-1.0], 1.0, 10)


def test_cross_covariance_self_and_symmetry(rng):
    Sigma = random_psd(rng, 6)
    C1, C2 = per_component_equality(3, 2).blocks[0][0], per_component_equality(3, 2).blocks[1][0]
    for kind in KINDS:
        assert analytic_cross_covariance(C1, C1, Sigma, kind) == pytest.approx(1.0)
        assert analytic_cross_covariance(C1, C2, Sigma, kind) == pytest.approx(
            analytic_cross_covariance(C2, C1, Sigma, kind))
    # block-diagonal Sigma with independent components -> zero covariance
    assert analytic_cross_covariance(C1, C2, np.eye(6), "ats") == pytest.approx(0.0, abs=1e-14)


def test_beta_shifts_the_centre(rng):
    part = HypothesisPartition(((np.array([[1.0, -1.0]]), [0.7]),), ("d",))
    x = rng.normal(0.7, 1, 40)
    y = rng.normal(0.0, 1, 40)
    st_ = compute_stats(Dataset((x[:, None], y[:, None])))
    diff = x.mean() - y.mean() - 0.7
    expected = st_.N * diff ** 2 / (np.sqrt(2) * st_.pooled_cov.trace())
    assert q_vector(part, st_, "ats").values[0] == pytest.approx(expected)
