"""8x8 block DCT, zig-zag bands and carrier packing for grayscale planes."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BLOCK",
    "BANDS",
    "BandSelector",
    "dct_matrix",
    "forward_dct8",
    "inverse_dct8",
    "zigzag_order",
    "check_plane",
    "plane_to_coeffs",
    "coeffs_to_plane",
    "carrier_positions",
    "carriers_from_coeffs",
    "carriers_into_coeffs",
    "extract_carriers",
    "inject_carriers",
]

BLOCK = 8
LEVEL_SHIFT = 128.0

# zig-zag positions (inclusive) of each band; position 0 is DC
BANDS = {
    "low": (1, 21),
    "mid": (22, 42),
    "high": (43, 63),
    "full": (1, 63),
}

# (Gamma index, sign) per entry of the transform matrix, Gamma(k) = cos(k pi / 16)
_T_PATTERN = [
    [4, 4, 4, 4, 4, 4, 4, 4],
    [1, 3, 5, 7, -7, -5, -3, -1],
    [2, 6, -6, -2, -2, -6, 6, 2],
    [3, -7, -1, -5, 5, 1, 7, -3],
    [4, -4, -4, 4, 4, -4, -4, 4],
    [5, -1, 7, 3, -3, -7, 1, -5],
    [6, -2, 2, -6, -6, 2, -2, 6],
    [7, -5, 3, -1, 1, -3, 5, -7],
]


@functools.lru_cache(maxsize=1)
def _dct_matrix() -> np.ndarray:
    pat = np.array(_T_PATTERN)
    T = np.sign(pat) * np.cos(np.abs(pat) * math.pi / 16.0)
    T = T / 2.0   # unit-norm rows
    T.setflags(write=False)
    return T


def dct_matrix() -> np.ndarray:
    """Orthonormal 8x8 DCT-II matrix (rows are basis functions)."""
    return _dct_matrix().copy()


def forward_dct8(block) -> np.ndarray:
    X = np.asarray(block, dtype=float)
    if X.shape[-2:] != (BLOCK, BLOCK):
        raise ValueError("expected 8x8 block(s)")
    T = _dct_matrix()
    return T @ X @ T.T


def inverse_dct8(coeffs) -> np.ndarray:
    Y = np.asarray(coeffs, dtype=float)
    if Y.shape[-2:] != (BLOCK, BLOCK):
        raise ValueError("expected 8x8 block(s)")
    T = _dct_matrix()
    return T.T @ Y @ T


@functools.lru_cache(maxsize=1)
def _zigzag() -> tuple[tuple[int, int], ...]:
    order = sorted(((r, c) for r in range(BLOCK) for c in range(BLOCK)),
                   key=lambda rc: (rc[0] + rc[1],
                                   rc[0] if (rc[0] + rc[1]) % 2 else rc[1]))
    return tuple(order)


def zigzag_order() -> list[tuple[int, int]]:
    """JPEG zig-zag scan as (row, col) pairs, position 0 first."""
    return list(_zigzag())


@dataclass(frozen=True)
class BandSelector:
    band: str = "low"
    k: int = 1

    def __post_init__(self):
        if self.band not in BANDS:
            raise ValueError(f"unknown band {self.band!r}")
        if self.k < 1:
            raise ValueError("messages per block must be >= 1")

    @property
    def capacity(self) -> int:
        lo, hi = BANDS[self.band]
        return hi - lo + 1

    def check(self, dim: int):
        if self.k * dim > self.capacity:
            raise ValueError(
                f"capacity exceeded: {self.k} x {dim} coefficients > {self.capacity} "
                f"in band {self.band!r} (k <= {self.capacity // dim})")


def check_plane(plane) -> np.ndarray:
    p = np.asarray(plane)
    if p.ndim != 2:
        raise ValueError("image plane must be 2-D")
    h, w = p.shape
    if h == 0 or w == 0 or h % BLOCK or w % BLOCK:
        raise ValueError(f"image {w}x{h} is not aligned to 8x8 blocks")
    if np.issubdtype(p.dtype, np.integer) and (p.min() < 0 or p.max() > 255):
        raise ValueError("pixel values outside [0, 255]")
    return p


def _to_blocks(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    return a.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def _from_blocks(b: np.ndarray) -> np.ndarray:
    bh, bw = b.shape[:2]
    return b.swapaxes(1, 2).reshape(bh * BLOCK, bw * BLOCK)


def plane_to_coeffs(plane) -> np.ndarray:
    """Level-shifted block DCT; returns an array of shape (H/8, W/8, 8, 8)."""
    p = check_plane(plane).astype(float) - LEVEL_SHIFT
    return forward_dct8(_to_blocks(p))


def coeffs_to_plane(coeffs, as_float: bool = False) -> np.ndarray:
    """Inverse of :func:`plane_to_coeffs`.

    By default pixels are rounded half away from zero, clamped to [0, 255]
    and returned as ``uint8``.
    """
    x = _from_blocks(inverse_dct8(coeffs)) + LEVEL_SHIFT
    if as_float:
        return x
    x = np.copysign(np.floor(np.abs(x) + 0.5), x)
    return np.clip(x, 0, 255).astype(np.uint8)


def carrier_positions(selector: BandSelector, dim: int) -> np.ndarray:
    """(row, col) of the coefficients used, shape (k, dim, 2)."""
    selector.check(dim)
    lo, _ = BANDS[selector.band]
    zz = _zigzag()
    idx = lo + np.arange(selector.k * dim)
    return np.array([zz[i] for i in idx], dtype=np.int64).reshape(selector.k, dim, 2)


def carriers_from_coeffs(coeffs, selector: BandSelector, dim: int) -> np.ndarray:
    """Carrier vectors in row-major block order, k per block: shape (blocks*k, dim)."""
    pos = carrier_positions(selector, dim)
    vals = coeffs[..., pos[..., 0], pos[..., 1]]           # (bh, bw, k, dim)
    return vals.reshape(-1, dim)


def carriers_into_coeffs(coeffs, selector: BandSelector, dim: int, carriers) -> np.ndarray:
    pos = carrier_positions(selector, dim)
    out = np.array(coeffs, dtype=float, copy=True)
    bh, bw = out.shape[:2]
    carriers = np.asarray(carriers, dtype=float)
    expected = bh * bw * selector.k
    if carriers.shape != (expected, dim):
        raise ValueError(f"expected {expected} carriers of dimension {dim}")
    out[..., pos[..., 0], pos[..., 1]] = carriers.reshape(bh, bw, selector.k, dim)
    return out


def extract_carriers(plane, selector: BandSelector, dim: int) -> np.ndarray:
    return carriers_from_coeffs(plane_to_coeffs(plane), selector, dim)


def inject_carriers(plane, selector: BandSelector, dim: int, carriers) -> np.ndarray:
    coeffs = carriers_into_coeffs(plane_to_coeffs(plane), selector, dim, carriers)
    return coeffs_to_plane(coeffs)
