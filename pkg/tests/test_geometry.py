import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mforge.errors import ParameterError
from mforge.geometry import PointCloud, knn_indices, pairwise_distances, rank_matrix

from conftest import brute_distances


def test_distance_345():
    np.testing.assert_array_equal(pairwise_distances([[0, 0], [3, 4]]), [[0, 5], [5, 0]])


def test_single_point_distance():
    np.testing.assert_array_equal(pairwise_distances([[1.0, 2.0]]), [[0.0]])


def test_distances_match_double_loop(rng):
    x = rng.normal(size=(5, 4))
    np.testing.assert_allclose(pairwise_distances(x), brute_distances(x.tolist()), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 4)),
              elements=st.floats(-100, 100, allow_nan=False)))
def test_distance_matrix_properties(x):
    d = pairwise_distances(x)
    assert np.all(np.diag(d) == 0)
    np.testing.assert_array_equal(d, d.T)
    assert np.all(d >= 0)


def test_knn_on_a_line():
    d = pairwise_distances([[0.0], [1.0], [3.0]])
    np.testing.assert_array_equal(knn_indices(d, 1), [[1], [0], [1]])


def test_knn_tie_prefers_lower_index():
    # equilateral triple with exactly equal entries
    d = np.where(np.eye(3) > 0, 0.0, 1.0)
    np.testing.assert_array_equal(knn_indices(d, 1), [[1], [0], [0]])
    np.testing.assert_array_equal(knn_indices(d, 2), [[1, 2], [0, 2], [0, 1]])


def test_knn_matches_full_sort(rng):
    x = rng.normal(size=(8, 3))
    d = pairwise_distances(x)
    for i in range(8):
        order = sorted((j for j in range(8) if j != i), key=lambda j: (d[i, j], j))
        assert list(knn_indices(d, 3)[i]) == order[:3]


@pytest.mark.parametrize("k", [0, 3])
def test_knn_rejects_bad_k(k):
    with pytest.raises(ParameterError):
        knn_indices(pairwise_distances(np.eye(3)), k)


def test_ranks_on_a_line():
    r = rank_matrix(pairwise_distances([[0.0], [1.0], [3.0]]))
    assert r[0, 1] == 1 and r[0, 2] == 2 and r[0, 0] == 0


def test_ranks_tie_order_follows_index():
    d = np.where(np.eye(4) > 0, 0.0, 2.0)
    r = rank_matrix(d)
    np.testing.assert_array_equal(r[2], [1, 2, 0, 3])


def test_ranks_match_argsort(rng):
    d = pairwise_distances(rng.normal(size=(6, 2)))
    r = rank_matrix(d)
    for i in range(6):
        order = sorted((j for j in range(6) if j != i), key=lambda j: (d[i, j], j))
        for rank, j in enumerate(order, start=1):
            assert r[i, j] == rank


def test_point_cloud_validation():
    with pytest.raises(ParameterError):
        PointCloud(np.array([[np.nan, 0.0]]))
    with pytest.raises(ParameterError):
        PointCloud(np.zeros((3, 2)), labels=np.zeros(2))
    c = PointCloud(np.arange(6.0).reshape(3, 2), labels=np.arange(3.0))
    assert (c.n, c.dim) == (3, 2)
    assert c.subset([2]).labels.tolist() == [2.0]
