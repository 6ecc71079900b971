"""Lattice arithmetic for nested-lattice QIM.

Generators store basis vectors as matrix *columns*; a lattice point is
``G @ z`` for an integer vector ``z``.  The coarse lattice is always the
self-nested ``alpha * L_f``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LATTICE_NAMES",
    "LatticeSpec",
    "CosetTable",
    "make_lattice",
    "round_half_away",
    "nearest_point_oracle",
    "nearest_point_fast",
    "nearest_point",
    "quantize_coarse",
    "integer_coords",
    "dist_to_coset",
    "neighbor",
    "nearest_coset",
    "short_vectors",
    "second_moment_mc",
]

LATTICE_NAMES = ("Zn", "A2", "D2Example", "D4", "E8")
FAST_NAMES = ("Zn", "A2", "D4", "E8")

_ALIASES = {
    "z": "Zn", "zn": "Zn",
    "a2": "A2",
    "d2example": "D2Example", "d2ex": "D2Example", "d2": "D2Example",
    "d4": "D4",
    "e8": "E8",
}

_E8_ROWS = [
    [2, 0, 0, 0, 0, 0, 0, 0],
    [-1, 1, 0, 0, 0, 0, 0, 0],
    [0, -1, 1, 0, 0, 0, 0, 0],
    [0, 0, -1, 1, 0, 0, 0, 0],
    [0, 0, 0, -1, 1, 0, 0, 0],
    [0, 0, 0, 0, -1, 1, 0, 0],
    [0, 0, 0, 0, 0, -1, 1, 0],
    [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
]


def _base_generator(name: str, dim: int) -> np.ndarray:
    if name == "Zn":
        return np.eye(dim)
    if name == "A2":
        return np.array([[1.0, 0.5], [0.0, math.sqrt(3.0) / 2.0]])
    if name == "D2Example":
        # printed as rows (1,0),(1,2); acts on column integer vectors
        return np.array([[1.0, 0.0], [1.0, 2.0]])
    if name == "D4":
        return np.array([
            [1.0, 0.0, 0.0, 0.0],
            [-1.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 1.0, 1.0],
            [0.0, 0.0, -1.0, 1.0],
        ])
    if name == "E8":
        return np.array(_E8_ROWS, dtype=float).T
    raise ValueError(f"unknown lattice name {name!r}")


# (d_min, kissing) of the unscaled generator
def _base_constants(name: str, dim: int) -> tuple[float, int]:
    return {
        "Zn": (1.0, 2 * dim),
        "A2": (1.0, 6),
        "D2Example": (math.sqrt(2.0), 4),
        "D4": (math.sqrt(2.0), 24),
        "E8": (math.sqrt(2.0), 240),
    }[name]


def canonical_name(name: str) -> str:
    if name in LATTICE_NAMES:
        return name
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown lattice name {name!r}") from None


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """A fine lattice ``delta * G`` and its coarse sublattice ``alpha * L_f``."""

    name: str
    dim: int
    generator: np.ndarray
    delta: float
    alpha: int
    d_min: float
    kissing: int
    generator_inv: np.ndarray = field(repr=False)

    @property
    def r_pack(self) -> float:
        return self.d_min / 2.0

    @property
    def volume(self) -> float:
        """Volume of the fine Voronoi cell, ``|det G|``."""
        return abs(float(np.linalg.det(self.generator)))

    @property
    def coarse_volume(self) -> float:
        return self.volume * self.alpha ** self.dim

    @property
    def num_cosets(self) -> int:
        return self.alpha ** self.dim

    def __eq__(self, other):
        if not isinstance(other, LatticeSpec):
            return NotImplemented
        return (self.name, self.dim, self.delta, self.alpha) == (
            other.name, other.dim, other.delta, other.alpha)

    def __hash__(self):
        return hash((self.name, self.dim, self.delta, self.alpha))

    def scaled(self, factor: float) -> "LatticeSpec":
        return make_lattice(self.name, alpha=self.alpha, delta=self.delta * factor,
                            dim=self.dim)


def make_lattice(name: str, alpha: int = 4, delta: float = 1.0,
                 dim: int | None = None) -> LatticeSpec:
    """Build a named lattice.

    ``dim`` is only meaningful for ``Zn`` (default 1); the other lattices have
    a fixed dimension.
    """
    name = canonical_name(name)
    fixed = {"A2": 2, "D2Example": 2, "D4": 4, "E8": 8}
    if name == "Zn":
        dim = 1 if dim is None else int(dim)
        if not 1 <= dim <= 8:
            raise ValueError("Zn dimension must be in 1..8")
    else:
        if dim is not None and dim != fixed[name]:
            raise ValueError(f"{name} has dimension {fixed[name]}, got {dim}")
        dim = fixed[name]
    alpha = int(alpha)
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    delta = float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    _verify_constants(name, dim)
    base = _base_generator(name, dim)
    d_min, kissing = _base_constants(name, dim)
    gen = base * delta
    gen.setflags(write=False)
    inv = np.linalg.inv(gen)
    inv.setflags(write=False)
    return LatticeSpec(name=name, dim=dim, generator=gen, delta=delta, alpha=alpha,
                       d_min=d_min * delta, kissing=kissing, generator_inv=inv)


@functools.lru_cache(maxsize=None)
def _verify_constants(name: str, dim: int) -> None:
    gen = _base_generator(name, dim)
    if abs(np.linalg.det(gen)) <= 0:
        raise ValueError(f"{name}: singular generator")
    d_min, kissing = _base_constants(name, dim)
    vecs = short_vectors(gen, 1.5 * d_min)
    norms = np.sqrt(np.sum(vecs ** 2, axis=1))
    shortest = norms.min()
    count = int(np.sum(np.isclose(norms, shortest, rtol=1e-9, atol=0.0)))
    if not math.isclose(shortest, d_min, rel_tol=1e-9) or count != kissing:
        raise RuntimeError(
            f"{name}: enumerated d_min={shortest}, kissing={count}; "
            f"expected {d_min}, {kissing}")


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


# ---------------------------------------------------------------------------
# exact enumeration

def _enumerate(R: np.ndarray, y: np.ndarray, radius2: float, shrink: bool,
               tol: float):
    """Depth-first Schnorr-Euchner search for integer z with ``|y - R z|^2 <= radius2``.

    ``R`` is upper triangular.  With ``shrink`` the radius tightens to the
    best distance found (plus ``tol``) and all points within that radius are
    returned; otherwise every point within the initial radius is returned.
    """
    n = R.shape[0]
    Rl = R.tolist()
    yl = [float(v) for v in y]
    diag2 = [Rl[i][i] * Rl[i][i] for i in range(n)]
    z = [0] * n
    centers = [0.0] * n
    partial = [0.0] * (n + 1)
    step = [0] * n
    found: list[tuple[float, tuple[int, ...]]] = []
    r2 = radius2

    def center(i):
        s = yl[i]
        row = Rl[i]
        for j in range(i + 1, n):
            s -= row[j] * z[j]
        return s / row[i]

    i = n - 1
    centers[i] = center(i)
    z[i] = math.floor(centers[i] + 0.5)
    step[i] = 0
    while True:
        d = centers[i] - z[i]
        p = partial[i + 1] + diag2[i] * d * d
        if p <= r2:
            if i == 0:
                found.append((p, tuple(z)))
                if shrink and p + tol < r2:
                    r2 = p + tol
                # next sibling at level 0
                _next_sibling(z, centers, step, 0)
                continue
            partial[i] = p
            i -= 1
            centers[i] = center(i)
            z[i] = math.floor(centers[i] + 0.5)
            step[i] = 0
        else:
            i += 1
            if i >= n:
                break
            _next_sibling(z, centers, step, i)
    if shrink:
        found = [f for f in found if f[0] <= r2]
    return found


def _next_sibling(z, centers, step, i):
    # zig-zag around the center: c0, c0+1, c0-1, c0+2, ... (direction toward c first)
    c = centers[i]
    base = math.floor(c + 0.5)
    step[i] += 1
    k = step[i]
    first = 1 if c >= base else -1
    off = (k + 1) // 2
    z[i] = base + (first * off if k % 2 == 1 else -first * off)


@functools.lru_cache(maxsize=64)
def _qr_cached(key: bytes, n: int):
    gen = np.frombuffer(key, dtype=float).reshape(n, n)
    Q, R = np.linalg.qr(gen)
    sign = np.sign(np.diag(R))
    sign[sign == 0] = 1.0
    return Q * sign, (R.T * sign).T


def short_vectors(generator: np.ndarray, radius: float) -> np.ndarray:
    """All non-zero lattice vectors of norm <= ``radius``."""
    gen = np.ascontiguousarray(generator, dtype=float)
    n = gen.shape[0]
    Q, R = _qr_cached(gen.tobytes(), n)
    tol = 1e-9 * radius * radius
    pts = _enumerate(R, np.zeros(n), radius * radius + tol, shrink=False, tol=0.0)
    zs = np.array([z for _, z in pts if any(z)], dtype=float).reshape(-1, n)
    return zs @ gen.T


def _check_dim(spec: LatticeSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (spec.dim,):
        raise ValueError(f"expected trailing dimension {spec.dim}, got shape {x.shape}")
    return x


def nearest_point_oracle(spec: LatticeSpec, x) -> np.ndarray:
    """Exact closest lattice point by sphere search.

    Ties at equal distance go to the lexicographically smallest integer
    coordinate vector.  Accepts a single vector or a stack of vectors.
    """
    x = _check_dim(spec, x)
    if x.ndim > 1:
        flat = x.reshape(-1, spec.dim)
        out = np.array([nearest_point_oracle(spec, v) for v in flat])
        return out.reshape(x.shape)
    gen = np.ascontiguousarray(spec.generator)
    Q, R = _qr_cached(gen.tobytes(), spec.dim)
    y = Q.T @ x
    babai = round_half_away(spec.generator_inv @ x)
    r2 = float(np.sum((x - gen @ babai) ** 2))
    scale2 = spec.d_min ** 2
    tol = 1e-12 * scale2
    found = _enumerate(R, y, r2 * (1 + 1e-9) + tol, shrink=True, tol=tol)
    best = min(found)[0]
    ties = sorted(z for d, z in found if d <= best + tol)
    return gen @ np.array(ties[0], dtype=float)


# ---------------------------------------------------------------------------
# specialised decoders (unscaled, vectorised over leading axes)

def _decode_zn(x):
    return round_half_away(x)


def _decode_dn(x):
    f = round_half_away(x)
    odd = (np.sum(f, axis=-1) % 2) != 0
    if np.any(odd):
        err = x - f
        k = np.argmax(np.abs(err), axis=-1)
        rows = np.nonzero(odd)
        kk = k[odd]
        e = err[rows + (kk,)]
        f[rows + (kk,)] += np.where(e >= 0, 1.0, -1.0)
    return f


def _decode_e8(x):
    y0 = _decode_dn(x)
    y1 = _decode_dn(x - 0.5) + 0.5
    d0 = np.sum((x - y0) ** 2, axis=-1)
    d1 = np.sum((x - y1) ** 2, axis=-1)
    return np.where((d1 < d0)[..., None], y1, y0)


_A2 = _base_generator("A2", 2)
_A2_INV = np.linalg.inv(_A2)
_A2_OFFSETS = np.array([(a, b) for a in (-1, 0, 1, 2) for b in (-1, 0, 1, 2)], dtype=float)


def _decode_a2_coords(x):
    u = x @ _A2_INV.T
    base = np.floor(u)
    cands = base[..., None, :] + _A2_OFFSETS  # (..., 16, 2)
    pts = cands @ _A2.T
    d = np.sum((x[..., None, :] - pts) ** 2, axis=-1)
    best = np.argmin(d, axis=-1)
    return np.take_along_axis(cands, best[..., None, None], axis=-2)[..., 0, :]


def nearest_point_fast(spec: LatticeSpec, x) -> np.ndarray:
    """Closest lattice point via the structure of Zn, A2, D4 or E8."""
    if spec.name not in FAST_NAMES:
        raise ValueError(f"no specialised decoder for {spec.name}")
    x = _check_dim(spec, x)
    u = x / spec.delta
    if spec.name == "Zn":
        return _decode_zn(u) * spec.delta
    if spec.name == "D4":
        return _decode_dn(u) * spec.delta
    if spec.name == "E8":
        return _decode_e8(u) * spec.delta
    z = _decode_a2_coords(u)
    return z @ spec.generator.T


def nearest_point(spec: LatticeSpec, x) -> np.ndarray:
    """Closest point of the fine lattice, using the fastest exact route."""
    if spec.name in FAST_NAMES:
        return nearest_point_fast(spec, x)
    if spec.name == "D2Example":
        # the checkerboard lattice D2: the Dn decoder applies in the standard frame
        x = _check_dim(spec, x)
        return _decode_dn(x / spec.delta) * spec.delta
    return nearest_point_oracle(spec, x)


def quantize_coarse(spec: LatticeSpec, x) -> np.ndarray:
    """Closest point of ``alpha * L_f``."""
    x = np.asarray(x, dtype=float)
    return spec.alpha * nearest_point(spec, x / spec.alpha)


def integer_coords(spec: LatticeSpec, points) -> np.ndarray:
    """Integer coordinates ``z`` with ``points = G z`` (rounded)."""
    points = np.asarray(points, dtype=float)
    return round_half_away(points @ spec.generator_inv.T).astype(np.int64)


# ---------------------------------------------------------------------------
# cosets

class CosetTable:
    """Coset representatives ``d_i = G phi(m_i)`` of ``L_f / alpha L_f``.

    Messages are vectors in ``Z_alpha^N``; the index is their mixed-radix
    value with the first symbol most significant.  Representatives are
    computed on demand so large tables (E8 with alpha=4 has 65536 cosets)
    stay cheap.
    """

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.alpha = spec.alpha
        self.dim = spec.dim
        self.size = spec.alpha ** spec.dim
        self._weights = spec.alpha ** np.arange(spec.dim - 1, -1, -1, dtype=np.int64)

    def __len__(self):
        return self.size

    def label(self, m) -> np.ndarray | int:
        """Message vector(s) -> coset index."""
        m = np.asarray(m, dtype=np.int64)
        if m.shape[-1:] != (self.dim,):
            raise ValueError(f"message must have {self.dim} symbols")
        if np.any((m < 0) | (m >= self.alpha)):
            raise ValueError(f"message symbols must lie in [0, {self.alpha})")
        idx = m @ self._weights
        return int(idx) if idx.ndim == 0 else idx

    def delabel(self, index) -> np.ndarray:
        """Coset index -> message vector(s)."""
        index = np.asarray(index, dtype=np.int64)
        if np.any((index < 0) | (index >= self.size)):
            raise IndexError("coset index out of range")
        return (index[..., None] // self._weights) % self.alpha

    def rep(self, index) -> np.ndarray:
        return self.delabel(index).astype(float) @ self.spec.generator.T

    @property
    def reps(self) -> np.ndarray:
        if self.size > 1 << 16:
            raise MemoryError("coset table too large to materialise")
        return self.rep(np.arange(self.size))

    def index_of_point(self, points) -> np.ndarray | int:
        """Coset index of fine-lattice point(s)."""
        z = integer_coords(self.spec, points) % self.alpha
        idx = z @ self._weights
        return int(idx) if idx.ndim == 0 else idx


def dist_to_coset(spec: LatticeSpec, table: CosetTable, y, i: int) -> float:
    if not 0 <= i < table.size:
        raise IndexError("coset index out of range")
    y = _check_dim(spec, y)
    shifted = y - table.rep(i)
    return float(np.linalg.norm(shifted - quantize_coarse(spec, shifted)))


_EXHAUSTIVE_LIMIT = 4096


def neighbor(spec: LatticeSpec, table: CosetTable, s) -> int:
    """Index of the coset closest to ``s``; ties go to the smallest index.

    Tables larger than 4096 cosets are resolved through the fine-lattice
    decoder (equivalent except on measure-zero tie sets).
    """
    s = _check_dim(spec, s)
    if table.size > _EXHAUSTIVE_LIMIT:
        return int(nearest_coset(spec, table, s))
    shifted = s[None, :] - table.reps
    d = np.sum((shifted - quantize_coarse(spec, shifted)) ** 2, axis=1)
    best = d.min()
    tol = 1e-12 * max(spec.d_min ** 2, best)
    return int(np.nonzero(d <= best + tol)[0][0])


def nearest_coset(spec: LatticeSpec, table: CosetTable, s) -> np.ndarray | int:
    """Vectorised neighbour: coset index of ``Q_f(s)``."""
    return table.index_of_point(nearest_point(spec, s))


def second_moment_mc(spec: LatticeSpec, samples: int = 10**6, seed: int = 0,
                     chunk: int = 200_000) -> float:
    """Monte-Carlo normalised second moment of the fine lattice."""
    if samples < 10**4:
        raise ValueError("need at least 1e4 samples")
    rng = np.random.default_rng(seed)
    total = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        x = rng.random((n, spec.dim)) @ spec.generator.T
        e = x - nearest_point(spec, x)
        total += float(np.sum(e * e))
        done += n
    return total / samples / (spec.dim * spec.volume ** (2.0 / spec.dim))
