"""Bit streams <-> message symbols <-> coset indices."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["bits_per_symbol", "random_bits", "bits_to_indices", "indices_to_bits",
           "read_bits", "format_bits"]


def bits_per_symbol(alpha: int) -> int:
    b = int(round(math.log2(alpha)))
    if 2 ** b != alpha:
        raise ValueError(f"bit interface needs alpha to be a power of two, got {alpha}")
    return b


def random_bits(count: int, p0: float, rng) -> np.ndarray:
    """i.i.d. bits equal to 0 with probability ``p0``."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError("p0 must lie in [0, 1]")
    return (rng.random(count) >= p0).astype(np.uint8)


def bits_to_indices(bits, alpha: int, dim: int) -> np.ndarray:
    """Pack bits MSB-first into symbols, ``dim`` symbols per message index."""
    b = bits_per_symbol(alpha)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    per_msg = b * dim
    if bits.size % per_msg:
        raise ValueError(f"bit count {bits.size} is not a multiple of {per_msg}")
    # with alpha = 2^b, the mixed-radix index is just the bit string read MSB-first
    weights = 1 << np.arange(per_msg - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, per_msg) @ weights


def indices_to_bits(indices, alpha: int, dim: int) -> np.ndarray:
    b = bits_per_symbol(alpha)
    per_msg = b * dim
    idx = np.asarray(indices, dtype=np.int64).ravel()
    shifts = np.arange(per_msg - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def read_bits(path) -> np.ndarray:
    """Read a text file of '0'/'1' characters; whitespace is ignored."""
    text = Path(path).read_text(encoding="ascii")
    chars = "".join(text.split())
    if any(c not in "01" for c in chars):
        raise ValueError(f"{path}: bit file may only contain 0 and 1")
    return np.frombuffer(chars.encode("ascii"), dtype=np.uint8) - ord("0")


def format_bits(bits) -> str:
    return "".join("1" if v else "0" for v in np.asarray(bits).ravel())
