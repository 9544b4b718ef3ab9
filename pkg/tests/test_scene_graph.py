import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from svp.descriptor_io import DescriptorSet
from svp.errors import ConfigError, ZeroNormError
from svp.scene_graph import DensityEstimate, SimilarityGraph, density, group_count, similarity_matrix


def _const_graph(n, off):
    s = np.full((n, n), off)
    np.fill_diagonal(s, 1.0)
    return SimilarityGraph(s)


def test_orthogonal_and_parallel():
    s = similarity_matrix(DescriptorSet(np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 4.0], [3.0, 4.0]]))).matrix
    assert s[0, 1] == 0.0
    assert s[2, 3] == pytest.approx(1.0, abs=1e-15)


def test_matches_pairwise_oracle(gen):
    d = gen.standard_normal((5, 16))
    got = similarity_matrix(DescriptorSet(d)).matrix
    for i in range(5):
        for j in range(5):
            dot = sum(d[i, c] * d[j, c] for c in range(16))
            ni = sum(x * x for x in d[i]) ** 0.5
            nj = sum(x * x for x in d[j]) ** 0.5
            assert got[i, j] == pytest.approx(dot / (ni * nj), abs=1e-6)


def test_zero_norm_rows_are_named():
    d = np.ones((5, 3))
    d[1] = 0
    d[4] = 0
    with pytest.raises(ZeroNormError) as err:
        similarity_matrix(DescriptorSet(d))
    assert err.value.frames == [1, 4]
    assert "[1, 4]" in str(err.value)


def test_workers_do_not_change_result(gen):
    d = DescriptorSet(gen.standard_normal((600, 8)))
    a = similarity_matrix(d, workers=1).matrix
    b = similarity_matrix(d, workers=4).matrix
    assert np.array_equal(a, b)


nonzero_rows = hnp.arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(1, 5)), elements=st.floats(-10, 10)).filter(
    lambda d: np.all(np.linalg.norm(d, axis=1) > 1e-3)
)


@given(nonzero_rows, st.data())
def test_graph_invariants_and_scale_invariance(d, data):
    s = similarity_matrix(DescriptorSet(d)).matrix
    assert np.array_equal(s, s.T)
    assert np.all(np.diag(s) == 1.0)
    assert s.min() >= -1.0 and s.max() <= 1.0
    alpha = np.array(data.draw(st.lists(st.floats(0.01, 100), min_size=len(d), max_size=len(d))))
    s2 = similarity_matrix(DescriptorSet(d * alpha[:, None])).matrix
    np.testing.assert_allclose(s2, s, atol=1e-6)


@given(nonzero_rows, st.randoms(), st.floats(-0.9, 0.9))
def test_permutation_conjugates(d, rnd, tau):
    perm = list(range(len(d)))
    rnd.shuffle(perm)
    g = similarity_matrix(DescriptorSet(d))
    gp = similarity_matrix(DescriptorSet(d[perm]))
    np.testing.assert_allclose(gp.matrix, g.matrix[np.ix_(perm, perm)], atol=1e-12)
    e, ep = density(g, tau), density(gp, tau)
    # near-threshold entries may flip under last-bit differences; compare away from the boundary
    if np.all(np.abs(g.matrix - tau) > 1e-9):
        assert e.density == ep.density
        assert group_count(e, 8, len(d)) == group_count(ep, 8, len(d))


def test_density_all_high():
    est = density(_const_graph(4, 0.9), 0.5)
    assert est.per_frame_counts.tolist() == [3, 3, 3, 3]
    assert est.density == 3.0


def test_density_all_zero():
    assert density(_const_graph(3, 0.0), 0.5).density == 0.0


def test_density_two_blocks():
    s = np.full((6, 6), 0.1)
    s[:3, :3] = 0.9
    s[3:, 3:] = 0.9
    np.fill_diagonal(s, 1.0)
    est = density(SimilarityGraph(s), 0.5)
    assert est.per_frame_counts.tolist() == [2] * 6
    assert est.density == 2.0


def test_density_threshold_bounds():
    with pytest.raises(ConfigError):
        density(_const_graph(3, 0.0), 1.0)


@given(hnp.arrays(np.float64, st.integers(2, 7) .map(lambda n: (n, n)), elements=st.floats(-1, 1)), st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_density_monotone_in_threshold(m, t1, t2):
    g = SimilarityGraph(0.5 * (m + m.T))
    lo, hi = sorted((t1, t2))
    assert density(g, hi).density <= density(g, lo).density


def _est(dens, n):
    return DensityEstimate(np.zeros(n, dtype=int), dens, 0.75)


@pytest.mark.parametrize("dens,k_max,n,expected", [(3.0, 8, 100, 3), (23.4, 8, 500, 8), (0.2, 8, 10, 1), (2.5, 8, 10, 3), (7.0, 8, 5, 5)])
def test_group_count(dens, k_max, n, expected):
    assert group_count(_est(dens, n), k_max, n) == expected


def test_group_count_override():
    assert group_count(_est(23.4, 50), 8, 50, override=4) == 4
    with pytest.raises(ConfigError):
        group_count(_est(1.0, 5), 8, 5, override=6)
    with pytest.raises(ConfigError):
        group_count(_est(1.0, 5), 8, 5, override=0)


@given(st.floats(0, 1e4), st.integers(1, 20), st.integers(1, 200))
def test_group_count_bounds(dens, k_max, n):
    k = group_count(_est(dens, n), k_max, n)
    assert 1 <= k <= min(k_max, n)
