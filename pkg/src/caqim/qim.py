"""Embedding and detection for QIM, CA-QIM, MD-QIM and CAMD-QIM.

All functions accept a single carrier of shape ``(N,)`` or a stack of
shape ``(M, N)``.  The content-aware variants take a permutation ``gamma``
where ``gamma[i]`` is the coset used for message index ``i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lattice import (CosetTable, LatticeSpec, integer_coords, nearest_coset,
                      nearest_point, quantize_coarse)

__all__ = [
    "SchemeKind",
    "Scheme",
    "coset_quantize",
    "embed_qim",
    "embed_ca",
    "embed_md",
    "embed_camd",
    "embed_indices",
    "detect",
    "detect_indices",
    "default_epsilon",
]


class SchemeKind(str, enum.Enum):
    QIM = "qim"
    CA_QIM = "ca"
    MD_QIM = "md"
    CAMD_QIM = "camd"

    @property
    def content_aware(self) -> bool:
        return self in (SchemeKind.CA_QIM, SchemeKind.CAMD_QIM)

    @property
    def minimum_distortion(self) -> bool:
        return self in (SchemeKind.MD_QIM, SchemeKind.CAMD_QIM)


def default_epsilon(spec: LatticeSpec) -> float:
    return 1e-3 * spec.d_min


@dataclass(frozen=True)
class Scheme:
    kind: SchemeKind
    epsilon: float | None = None

    def resolved_epsilon(self, spec: LatticeSpec) -> float:
        eps = default_epsilon(spec) if self.epsilon is None else float(self.epsilon)
        _check_epsilon(spec, eps)
        return eps


def _check_epsilon(spec: LatticeSpec, eps: float):
    if not 0 < eps < spec.r_pack:
        raise ValueError(f"epsilon must lie in (0, {spec.r_pack}), got {eps}")


def _as_gamma(gamma, size: int) -> np.ndarray:
    if gamma is None:
        raise ValueError("content-aware scheme requires a codebook permutation")
    g = np.asarray(getattr(gamma, "gamma", gamma), dtype=np.int64)
    if g.shape != (size,):
        raise ValueError(f"permutation must have {size} entries")
    return g


def coset_quantize(spec: LatticeSpec, table: CosetTable, s, index) -> np.ndarray:
    """``Q_c(s - d_i) + d_i``: closest point of coset ``index`` to ``s``."""
    s = np.asarray(s, dtype=float)
    d = table.rep(index)
    return quantize_coarse(spec, s - d) + d


def _md_move(spec: LatticeSpec, s: np.ndarray, q: np.ndarray, eps: float) -> np.ndarray:
    """Pull ``s`` toward the target point ``q`` only as far as needed.

    Carriers already in the fine Voronoi cell of ``q`` are left alone; the
    others land at distance ``r_pack - eps`` from ``q`` along ``s - q``.
    """
    inside = np.all(integer_coords(spec, nearest_point(spec, s))
                    == integer_coords(spec, q), axis=-1)
    p = q - s
    norm = np.linalg.norm(p, axis=-1, keepdims=True)
    moving = ~inside
    if np.any(moving & (norm[..., 0] == 0)):
        raise AssertionError("carrier coincides with target point but fails Voronoi test")
    safe = np.where(norm == 0, 1.0, norm)
    moved = q - p / safe * (spec.r_pack - eps)
    return np.where(inside[..., None], s, moved)


def embed_indices(spec: LatticeSpec, table: CosetTable, s, indices, scheme: Scheme,
                  gamma=None) -> np.ndarray:
    """Embed message indices with any of the four schemes."""
    s = np.asarray(s, dtype=float)
    indices = np.asarray(indices, dtype=np.int64)
    kind = SchemeKind(scheme.kind)
    target = _as_gamma(gamma, table.size)[indices] if kind.content_aware else indices
    q = coset_quantize(spec, table, s, target)
    if kind.minimum_distortion:
        return _md_move(spec, s, q, scheme.resolved_epsilon(spec))
    return q


def embed_qim(spec: LatticeSpec, table: CosetTable, s, m) -> np.ndarray:
    return embed_indices(spec, table, s, table.label(m), Scheme(SchemeKind.QIM))


def embed_ca(spec: LatticeSpec, table: CosetTable, assignment, s, m) -> np.ndarray:
    return embed_indices(spec, table, s, table.label(m), Scheme(SchemeKind.CA_QIM),
                         gamma=assignment)


def embed_md(spec: LatticeSpec, table: CosetTable, s, m, epsilon=None) -> np.ndarray:
    return embed_indices(spec, table, s, table.label(m),
                         Scheme(SchemeKind.MD_QIM, epsilon))


def embed_camd(spec: LatticeSpec, table: CosetTable, assignment, s, m,
               epsilon=None) -> np.ndarray:
    return embed_indices(spec, table, s, table.label(m),
                         Scheme(SchemeKind.CAMD_QIM, epsilon), gamma=assignment)


def detect_indices(spec: LatticeSpec, table: CosetTable, y, gamma=None) -> np.ndarray:
    """Blind detection: nearest coset, mapped back through ``gamma^-1``."""
    j = np.asarray(nearest_coset(spec, table, y), dtype=np.int64)
    if gamma is None:
        return j
    g = _as_gamma(gamma, table.size)
    inverse = np.empty_like(g)
    inverse[g] = np.arange(g.size)
    return inverse[j]


def detect(spec: LatticeSpec, table: CosetTable, y, assignment=None) -> np.ndarray:
    """Recover message vector(s) from received carrier(s)."""
    return table.delabel(detect_indices(spec, table, y, assignment))
