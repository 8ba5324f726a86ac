"""Named substream behavior: determinism, separation, block layout."""

import numpy as np

from gmethods.streams import BLOCK, block_count, substream


def test_same_address_same_draws():
    a = substream(123, "scenario", "replicate", 4).random(16)
    b = substream(123, "scenario", "replicate", 4).random(16)
    np.testing.assert_array_equal(a, b)


def test_different_names_differ():
    a = substream(123, "alpha").random(8)
    b = substream(123, "beta").random(8)
    assert not np.array_equal(a, b)


def test_different_roots_differ():
    a = substream(1, "x").random(8)
    b = substream(2, "x").random(8)
    assert not np.array_equal(a, b)


def test_int_and_str_labels_are_distinct_addresses():
    # "7" the string and 7 the int must not collide by accident.
    a = substream(9, 7).random(4)
    b = substream(9, "7").random(4)
    # They may theoretically collide, but the construction hashes the
    # repr with a type tag, so equality would be a bug.
    assert not np.array_equal(a, b)


def test_block_count():
    assert block_count(0) == 0
    assert block_count(1) == 1
    assert block_count(BLOCK) == 1
    assert block_count(BLOCK + 1) == 2
