import numpy as np
import pytest

from conftest import row_sign_max
from kquad import CHSH_MATRIX, brute_force_L, generate_chsh_block, generate_random


def test_degenerate_range_gives_zero_matrix():
    M = generate_random(2, 2, 0, 0, seed=3)
    assert M.tolist() == [[0, 0], [0, 0]]


def test_same_seed_same_matrix():
    assert generate_random(10, 10, -100, 100, seed=42) == generate_random(10, 10, -100, 100, seed=42)
    assert generate_random(10, 10, -100, 100, seed=42) != generate_random(10, 10, -100, 100, seed=43)


def test_entries_within_range_and_inclusive():
    M = generate_random(30, 30, -3, 3, seed=1)
    assert M.entries.min() == -3 and M.entries.max() == 3
    assert M.shape == (30, 30)


def test_generate_random_rejects_bad_range():
    with pytest.raises(ValueError):
        generate_random(2, 2, 5, 1, seed=0)


def test_chsh_block_2_is_chsh():
    assert generate_chsh_block(2) == CHSH_MATRIX


@pytest.mark.parametrize("n, expected", [(2, 2), (4, 4), (6, 6), (8, 8)])
def test_chsh_block_values(n, expected):
    M = generate_chsh_block(n)
    assert brute_force_L(M).optimum == expected
    if n <= 4:
        assert row_sign_max(M) == expected


def test_chsh_block_structure():
    M = generate_chsh_block(6).entries
    assert np.count_nonzero(M) == 12
    assert np.array_equal(M[2:4, 2:4], CHSH_MATRIX.entries)


def test_chsh_block_rejects_odd():
    with pytest.raises(ValueError):
        generate_chsh_block(5)
