"""Tests for cost matrices, DTW and label warping."""

import numpy as np
import pytest

from avrkit.core.align import (
    AlignmentPath,
    CostMatrix,
    Side,
    cost_matrix,
    dtw,
    path_cost,
    skip_still_frames,
    warp_labels,
)
from avrkit.core.context import ContextualizedSequence
from avrkit.core.errors import DimensionError, LabelError

# Backward move codes, ordered by the backtrace preference
_BACK_MOVES = ((1, 1, 0), (1, 0, 1), (0, 1, 2))


def ctx_seq(seq_id, frames):
    frames = np.asarray(frames, dtype=np.float32)
    return ContextualizedSequence(id=seq_id, frames=frames, source_d=frames.shape[1])


def all_paths(n, m):
    """Every monotonic path as (forward tuples, backward move codes)."""
    out = []

    def walk(i, j, cells, codes):
        if (i, j) == (1, 1):
            out.append((tuple(reversed(cells)), tuple(codes)))
            return
        for di, dj, code in _BACK_MOVES:
            if i - di >= 1 and j - dj >= 1:
                walk(i - di, j - dj, cells + [(i - di, j - dj)], codes + [code])

    walk(n, m, [(n, m)], [])
    return out


def oracle(values):
    n, m = values.shape
    best = min(
        (sum(values[i - 1, j - 1] for i, j in cells), codes, cells)
        for cells, codes in all_paths(n, m)
    )
    return best[2], best[0]


@pytest.mark.parametrize('a, b, expected', [
    ([[1, 0]], [[0, 1]], 1.0),
    ([[1, 0]], [[1, 0]], 0.0),
    ([[1, 0]], [[-1, 0]], 2.0),
])
def test_cosine_cost_examples(a, b, expected):
    assert cost_matrix(ctx_seq('a', a), ctx_seq('b', b)).values[0, 0] == pytest.approx(expected)


def test_zero_norm_rows_cost_one():
    c = cost_matrix(ctx_seq('a', [[0, 0], [1, 0]]), ctx_seq('b', [[1, 0], [0, 0]]))
    np.testing.assert_allclose(c.values, [[1.0, 1.0], [0.0, 1.0]])


def test_cost_matrix_width_mismatch():
    with pytest.raises(DimensionError):
        cost_matrix(ctx_seq('a', [[1, 0]]), ctx_seq('b', [[1, 0, 0]]))


def test_cost_matrix_validation():
    with pytest.raises(ValueError):
        CostMatrix(np.array([[0.0, -1.0]]))
    with pytest.raises(ValueError):
        CostMatrix(np.array([[np.nan]]))


def test_dtw_examples():
    path, cost = dtw(CostMatrix(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert path.tuples == ((1, 1), (2, 2))
    assert cost == 0.0

    row = np.array([[0.5, 1.0, 0.25, 2.0]])
    path, cost = dtw(CostMatrix(row))
    assert path.tuples == ((1, 1), (1, 2), (1, 3), (1, 4))
    assert cost == pytest.approx(row.sum())


def test_dtw_identical_sequences_is_diagonal(rng):
    frames = rng.normal(size=(9, 4))
    a = ctx_seq('a', frames)
    path, cost = dtw(cost_matrix(a, a))
    assert path.tuples == tuple((i, i) for i in range(1, 10))
    assert cost == pytest.approx(0.0, abs=1e-6)


def test_dtw_matches_exhaustive_enumeration(rng):
    # Half-integer costs keep every path sum exact, so ties are real ties
    for _ in range(1000):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        values = rng.integers(0, 5, size=(n, m)) / 2.0
        path, cost = dtw(CostMatrix(values))
        expected_path, expected_cost = oracle(values)
        assert cost == expected_cost
        assert path.tuples == expected_path
        assert path.is_valid(n, m)


def test_dtw_is_at_most_any_path_cost(rng):
    for _ in range(50):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        c = CostMatrix(rng.uniform(0, 2, size=(n, m)))
        _, cost = dtw(c)
        for cells, _ in all_paths(n, m):
            assert cost <= path_cost(c, AlignmentPath(cells)) + 1e-12


def test_path_problems():
    assert AlignmentPath(((1, 1), (2, 2))).is_valid(2, 2)
    assert AlignmentPath(((1, 1), (2, 3))).problems(2, 3)
    assert AlignmentPath(((1, 2), (2, 2))).problems(2, 2)
    assert AlignmentPath(((1, 1), (2, 1))).problems(2, 2)


@pytest.mark.parametrize('tuples, keep, expected', [
    (((1, 1), (1, 2), (2, 2)), Side.SECOND, ((1, 1), (1, 2))),
    (((1, 1), (2, 1), (3, 2)), Side.SECOND, ((1, 1), (3, 2))),
    (((1, 1), (2, 1), (3, 2)), Side.FIRST, ((1, 1), (2, 1), (3, 2))),
    (((1, 1), (2, 2), (3, 3)), Side.FIRST, ((1, 1), (2, 2), (3, 3))),
    (((1, 1), (2, 2), (3, 3)), Side.SECOND, ((1, 1), (2, 2), (3, 3))),
])
def test_skip_still_frames(tuples, keep, expected):
    assert skip_still_frames(AlignmentPath(tuples), keep).tuples == expected


def test_warp_labels_examples():
    identity = AlignmentPath(((1, 1), (2, 2), (3, 3)))
    assert warp_labels(identity, ['a', 'b', 'c'], Side.SECOND).values == ('a', 'b', 'c')

    p = AlignmentPath(((1, 1), (2, 1), (3, 2)))
    warped = warp_labels(p, ['a', 'b', 'c'], Side.SECOND)
    assert warped.values == ('a', 'c')
    assert warped.reference_length == 2


def test_warp_labels_cycle_positions():
    # 4 query frames against 3 match frames
    p = AlignmentPath(((1, 1), (2, 2), (3, 2), (4, 3)))
    on_match = warp_labels(p, [1, 2, 3, 4], Side.SECOND).values
    assert on_match == (1, 2, 4)
    back = warp_labels(p, list(on_match), Side.FIRST).values
    assert back == (1, 2, 2, 4)


def test_warp_labels_length_mismatch():
    p = AlignmentPath(((1, 1), (2, 2)))
    with pytest.raises(LabelError):
        warp_labels(p, ['a'], Side.SECOND)


def test_warped_labels_come_from_source(rng):
    for _ in range(20):
        n, m = int(rng.integers(1, 10)), int(rng.integers(1, 10))
        path, _ = dtw(CostMatrix(rng.uniform(0, 2, size=(n, m))))
        labels = list(rng.integers(0, 100, size=n))
        warped = warp_labels(path, labels, Side.SECOND)
        assert warped.reference_length == m
        assert set(warped.values) <= set(labels)


def test_side_helpers():
    assert Side.FIRST.index == 0
    assert Side.SECOND.other is Side.FIRST
