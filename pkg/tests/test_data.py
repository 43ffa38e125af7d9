import numpy as np
import pytest
from hypothesis import given, settings

from conftest import random_dataset, seeds
from qfmct.data import (DataError, Dataset, InsufficientSampleError, componentwise_cov,
                        componentwise_mean, compute_stats, selector_matrix)


def test_stats_by_hand():
    g1 = np.array([[0.0, 1.0], [2.0, 3.0]])
    g2 = np.array([[1.0, 1.0], [1.0, 2.0], [4.0, 0.0]])
    st = compute_stats(Dataset((g1, g2)))
    np.testing.assert_allclose(st.group_means, [[1.0, 2.0], [2.0, 1.0]])
    # unbiased covariance of g1: deviations (-1,-1), (1,1) -> sum of outer = 2*[[1,1],[1,1]]
    np.testing.assert_allclose(st.group_covs[0], [[2.0, 2.0], [2.0, 2.0]])
    np.testing.assert_allclose(st.group_covs[1], np.cov(g2, rowvar=False))
    assert st.N == 5
    P = st.pooled_cov
    np.testing.assert_allclose(P[:2, :2], 2.5 * st.group_covs[0])
    np.testing.assert_allclose(P[2:, 2:], (5 / 3) * st.group_covs[1])
    np.testing.assert_array_equal(P[:2, 2:], 0.0)


def test_identical_groups_identical_covariances(rng):
    X = rng.standard_normal((7, 3))
    st = compute_stats(Dataset((X, X.copy(), X.copy())))
    assert np.array_equal(st.group_covs[0], st.group_covs[1])
    assert np.array_equal(st.group_covs[1], st.group_covs[2])


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_pooled_cov_is_psd(seed):
    rng = np.random.default_rng(seed)
    st = compute_stats(random_dataset(rng, a=3, d=4, sizes=[2, 3, 5]))
    assert np.linalg.eigvalsh(st.pooled_cov).min() > -1e-9


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_selector_route_matches_direct(seed):
    rng = np.random.default_rng(seed)
    st = compute_stats(random_dataset(rng, a=3, d=4))
    for j in range(st.d):
        A = selector_matrix(st.a, st.d, j)
        assert np.array_equal(A @ st.stacked_mean, componentwise_mean(st, j))
        np.testing.assert_allclose(A @ st.pooled_cov @ A.T, componentwise_cov(st, j),
                                   rtol=1e-14, atol=0)


def test_validation_errors():
    with pytest.raises(DataError):
        Dataset((np.ones((3, 2)),))
    with pytest.raises(DataError):
        Dataset((np.ones((3, 2)), np.ones((3, 3))))
    with pytest.raises(InsufficientSampleError):
        Dataset((np.ones((3, 2)), np.ones((1, 2))))
    with pytest.raises(DataError):
        Dataset((np.ones((3, 2)), np.array([[1.0, np.nan], [0.0, 1.0]])))
    with pytest.raises(DataError):
        Dataset((np.ones((3, 2)), np.ones((3, 2))), labels=("a",))


def test_component_index_checked():
    st = compute_stats(Dataset((np.eye(3), np.eye(3))))
    with pytest.raises(IndexError):
        componentwise_mean(st, 3)
    with pytest.raises(IndexError):
        selector_matrix(2, 3, -1)


def test_dataset_is_read_only():
    ds = Dataset((np.zeros((2, 1)), np.ones((2, 1))), labels=("x", "y"))
    assert ds.labels == ("x", "y") and ds.a == 2 and ds.d == 1 and ds.N == 4
    with pytest.raises(ValueError):
        ds.groups[0][0, 0] = 5.0
