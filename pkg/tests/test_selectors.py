import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from spalign.selectors import similarity_map, similarity_scores, top_k

from oracles import naive_top_k


def test_similarity_scores_basis_rows():
    ref = np.array([1.0, 0.0, 0.0])
    local = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(similarity_scores(ref, local), [1.0, 0.0])


def test_similarity_scores_self_row(small_bank):
    local = small_bank.train_local[0, 0].astype(np.float64)
    scores = similarity_scores(local[0], local)
    assert abs(scores[0] - 1.0) < 1e-6


def test_similarity_scores_matches_naive_loop():
    rng = np.random.default_rng(2)
    ref = rng.standard_normal(12)
    local = rng.standard_normal((9, 12))
    scores = similarity_scores(ref, local)
    naive = [float(sum(ref[k] * local[j, k] for k in range(12))) for j in range(9)]
    np.testing.assert_allclose(scores, naive, atol=1e-6)


def test_similarity_scores_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        similarity_scores(np.ones(3), np.ones((4, 5)))


def test_top_k_tie_by_index():
    sel = top_k(np.array([0.2, 0.9, 0.5, 0.9]), 2)
    np.testing.assert_array_equal(sel.indices, [1, 3])
    np.testing.assert_allclose(sel.scores, [0.9, 0.9])


def test_top_k_full():
    sel = top_k(np.array([3.0, 1.0, 2.0]), 3)
    np.testing.assert_array_equal(sel.indices, [0, 1, 2])


@pytest.mark.parametrize("k", [0, 5])
def test_top_k_bad_k(k):
    with pytest.raises(ValueError):
        top_k(np.arange(4.0), k)


def test_top_k_nonfinite_rejected():
    with pytest.raises(ValueError, match="non-finite"):
        top_k(np.array([0.1, np.inf]), 1)


@settings(max_examples=100, deadline=None)
@given(
    scores=hnp.arrays(
        np.float64,
        st.integers(1, 30),
        elements=st.floats(-1e3, 1e3, allow_nan=False),
    ),
    data=st.data(),
)
def test_top_k_matches_sort_oracle(scores, data):
    k = data.draw(st.integers(1, len(scores)))
    sel = top_k(scores, k)
    np.testing.assert_array_equal(sel.indices, naive_top_k(list(scores), k))
    # top-k property: every selected score >= every non-selected score
    rest = np.delete(scores, sel.indices)
    if rest.size:
        assert sel.scores.min() >= rest.max()


def test_top_k_selected_multiset_is_k_largest():
    rng = np.random.default_rng(3)
    for _ in range(50):
        scores = rng.choice([0.1, 0.2, 0.3, 0.4], size=10)  # force ties
        k = int(rng.integers(1, 11))
        sel = top_k(scores, k)
        np.testing.assert_allclose(
            np.sort(sel.scores), np.sort(scores)[-k:], atol=0
        )


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    ref = rng.standard_normal(6)
    local = rng.standard_normal((8, 6))
    perm = rng.permutation(8)
    np.testing.assert_array_equal(
        similarity_scores(ref, local)[perm], similarity_scores(ref, local[perm])
    )


def test_similarity_map_hand_example():
    # scores (0.1, 0.2, 0.3, 0.4) on a 2x2 grid, min-max normalized
    ref = np.array([1.0, 0.0])
    local = np.array([[0.1, 1.0], [0.2, 1.0], [0.3, 1.0], [0.4, 1.0]])
    grid = similarity_map(ref, local, 2, 2, normalized=True)
    np.testing.assert_allclose(grid, [[0.0, 1 / 3], [2 / 3, 1.0]], atol=1e-12)


def test_similarity_map_constant_normalizes_to_zeros():
    ref = np.array([1.0, 0.0])
    local = np.tile([0.5, 0.5], (6, 1))
    grid = similarity_map(ref, local, 2, 3, normalized=True)
    np.testing.assert_array_equal(grid, np.zeros((2, 3)))


def test_similarity_map_single_row_grid():
    rng = np.random.default_rng(5)
    ref = rng.standard_normal(4)
    local = rng.standard_normal((5, 4))
    grid = similarity_map(ref, local, 1, 5)
    np.testing.assert_array_equal(grid[0], similarity_scores(ref, local))


def test_similarity_map_normalized_range():
    rng = np.random.default_rng(6)
    ref = rng.standard_normal(4)
    local = rng.standard_normal((12, 4))
    grid = similarity_map(ref, local, 3, 4, normalized=True)
    assert grid.min() >= 0.0 and grid.max() <= 1.0


def test_similarity_map_shape_mismatch():
    with pytest.raises(ValueError, match="grid"):
        similarity_map(np.ones(3), np.ones((4, 3)), 2, 3)
