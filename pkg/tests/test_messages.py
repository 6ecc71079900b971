import numpy as np
import pytest

from caqim.lattice import CosetTable, make_lattice
from caqim.messages import (bits_per_symbol, bits_to_indices, format_bits, indices_to_bits,
                            random_bits, read_bits)


def test_msb_first_packing():
    # alpha=4, N=2: bits 10 01 -> symbols (2, 1) -> index 2*4+1
    assert bits_to_indices([1, 0, 0, 1], 4, 2).tolist() == [9]
    t = CosetTable(make_lattice("A2", alpha=4))
    assert t.label([2, 1]) == 9


def test_round_trip():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 16 * 10)
    for alpha, dim in [(2, 1), (4, 2), (4, 8), (8, 4)]:
        n = bits_per_symbol(alpha) * dim
        b = bits[: (bits.size // n) * n]
        np.testing.assert_array_equal(indices_to_bits(bits_to_indices(b, alpha, dim),
                                                      alpha, dim), b)


def test_errors():
    with pytest.raises(ValueError):
        bits_per_symbol(3)
    with pytest.raises(ValueError):
        bits_to_indices([1, 0, 1], 4, 2)
    with pytest.raises(ValueError):
        random_bits(5, 1.5, np.random.default_rng())


def test_biased_bits():
    b = random_bits(100_000, 0.9, np.random.default_rng(1))
    assert abs(np.mean(b == 0) - 0.9) < 0.005


def test_bit_file(tmp_path):
    p = tmp_path / "b.txt"
    p.write_text("0101\n 11\n")
    assert read_bits(p).tolist() == [0, 1, 0, 1, 1, 1]
    assert format_bits([1, 0, 1]) == "101"
    p.write_text("012")
    with pytest.raises(ValueError):
        read_bits(p)
