"""Learning the content-aware codebook permutation.

``W[j, i]`` counts training pairs whose carrier sits nearest to coset ``j``
while carrying message index ``i``.  The permutation ``gamma`` maximises
``sum_i W[gamma[i], i]``.
"""

from __future__ import annotations

import io
import itertools
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import min_weight_full_bipartite_matching

from .lattice import LATTICE_NAMES, CosetTable, LatticeSpec, canonical_name, nearest_coset

__all__ = [
    "CodebookAssignment",
    "KeyFile",
    "DENSE_LIMIT",
    "adjacency_from_indices",
    "build_adjacency",
    "max_weight_matching",
    "brute_force_matching",
    "hungarian_min_cost",
    "save_assignment",
    "load_assignment",
    "KeyFormatError",
]

# tables above this size keep W sparse
DENSE_LIMIT = 1024


class KeyFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CodebookAssignment:
    gamma: np.ndarray
    source_W: object
    total_weight: int

    @property
    def size(self) -> int:
        return int(self.gamma.size)


def adjacency_from_indices(neighbors, messages, size: int):
    """Count matrix from parallel streams of neighbour and message indices.

    Dense ``int64`` for ``size <= DENSE_LIMIT``, otherwise CSR.
    """
    j = np.asarray(neighbors, dtype=np.int64).ravel()
    i = np.asarray(messages, dtype=np.int64).ravel()
    if j.shape != i.shape:
        raise ValueError("neighbour and message streams differ in length")
    if j.size and (j.min() < 0 or j.max() >= size or i.min() < 0 or i.max() >= size):
        raise ValueError("index out of range")
    if size <= DENSE_LIMIT:
        W = np.zeros((size, size), dtype=np.int64)
        np.add.at(W, (j, i), 1)
        return W
    W = sp.coo_matrix((np.ones(j.size, dtype=np.int64), (j, i)), shape=(size, size))
    return W.tocsr()


def build_adjacency(spec: LatticeSpec, table: CosetTable, carriers, messages):
    """Adjacency counts for (carrier, message-index) training pairs."""
    carriers = np.asarray(carriers, dtype=float).reshape(-1, spec.dim)
    messages = np.asarray(messages, dtype=np.int64).ravel()
    if carriers.shape[0] == 0:
        return adjacency_from_indices([], [], table.size)
    return adjacency_from_indices(nearest_coset(spec, table, carriers), messages,
                                  table.size)


def _total(W, gamma) -> int:
    cols = np.arange(gamma.size)
    if sp.issparse(W):
        return int(np.asarray(W.tocsr()[gamma, cols]).sum())
    return int(np.asarray(W)[gamma, cols].sum())


def hungarian_min_cost(cost: np.ndarray):
    """Shortest-augmenting-path Hungarian method on a square cost matrix.

    Returns ``(row_of_col, u, v)`` with row/column potentials ``u``, ``v``
    such that ``cost[r, c] - u[r] - v[c] >= 0`` and equality on the matching.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError("cost matrix must be square")
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)     # p[col] = row (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free[1:], minv[1:], inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free[1:]] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return p[1:] - 1, u[1:], v[1:]


def _lexicographic_refine(tight: np.ndarray, row_of_col: np.ndarray) -> np.ndarray:
    """Smallest gamma (in column order) among perfect matchings of ``tight``."""
    n = row_of_col.size
    row_of_col = row_of_col.copy()
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[row_of_col] = np.arange(n)
    fixed_row = np.zeros(n, dtype=bool)
    for c in range(n):
        for r in np.nonzero(tight[:, c] & ~fixed_row)[0]:
            if row_of_col[c] == r:
                break
            path = _alternating_path(tight, row_of_col, col_of_row, fixed_row,
                                     start_col=col_of_row[r], target_row=row_of_col[c],
                                     avoid_row=r, avoid_col=c)
            if path is None:
                continue
            for col, row in path:
                row_of_col[col] = row
                col_of_row[row] = col
            row_of_col[c] = r
            col_of_row[r] = c
            break
        fixed_row[row_of_col[c]] = True
    return row_of_col


def _alternating_path(tight, row_of_col, col_of_row, fixed_row, start_col,
                      target_row, avoid_row, avoid_col):
    # breadth-first over columns: find start_col a new row, displacing along
    # matched edges until some column takes target_row
    n = tight.shape[0]
    open_row = ~fixed_row
    open_row[avoid_row] = False
    parent = np.full(n, -1, dtype=np.int64)     # column that reached each row
    seen_col = np.zeros(n, dtype=bool)
    seen_col[[start_col, avoid_col]] = True
    frontier = np.array([start_col])
    while frontier.size:
        sub = tight[:, frontier] & (open_row & (parent < 0))[:, None]
        rows = np.nonzero(sub.any(axis=1))[0]
        if rows.size == 0:
            return None
        parent[rows] = frontier[np.argmax(sub[rows], axis=1)]
        if parent[target_row] >= 0:
            moves = []
            row = target_row
            while True:
                col = int(parent[row])
                moves.append((col, row))
                if col == start_col:
                    return moves
                row = int(row_of_col[col])
        nxt = col_of_row[rows]
        nxt = np.unique(nxt[~seen_col[nxt]])
        seen_col[nxt] = True
        frontier = nxt
    return None


def _match_dense(W: np.ndarray) -> np.ndarray:
    cost = -np.asarray(W, dtype=float)
    row_of_col, u, v = hungarian_min_cost(cost)
    reduced = cost - u[:, None] - v[None, :]
    tight = np.abs(reduced) <= 1e-9 * max(1.0, float(np.abs(cost).max()))
    return _lexicographic_refine(tight, row_of_col)


_OWN_SOLVER_LIMIT = 512


def _match_sparse(Ws):
    """Maximum-weight (not necessarily perfect) matching on the nonzero entries.

    Each message column also gets a private zero-weight dummy coset so a
    column-saturating matching always exists; columns that land on their
    dummy are left for the caller to fill.
    """
    rows, cols = Ws.nonzero()
    weights = np.asarray(Ws[rows, cols]).ravel().astype(float)
    active_rows, r_idx = np.unique(rows, return_inverse=True)
    active_cols, c_idx = np.unique(cols, return_inverse=True)
    nr, nc = active_rows.size, active_cols.size
    big = float(weights.max()) + 1.0
    data = np.concatenate([big - weights, np.full(nc, big)])
    ii = np.concatenate([c_idx, np.arange(nc)])
    jj = np.concatenate([r_idx, nr + np.arange(nc)])
    graph = sp.csr_matrix((data, (ii, jj)), shape=(nc, nr + nc))
    match = min_weight_full_bipartite_matching(graph)[1]
    real = match < nr
    return active_cols[real], active_rows[match[real]]


def max_weight_matching(W) -> CodebookAssignment:
    """Permutation maximising ``sum_i W[gamma[i], i]``.

    Dense tables up to 512 go through :func:`hungarian_min_cost` and return
    the lexicographically smallest optimum.  Larger or sparse tables are
    matched on their nonzero entries with scipy's sparse assignment solver;
    messages left without a weighted coset take the remaining cosets in
    ascending order.
    """
    if sp.issparse(W):
        n, m = W.shape
    else:
        W = np.asarray(W)
        if W.ndim != 2:
            raise ValueError("W must be a matrix")
        n, m = W.shape
    if n != m:
        raise ValueError("W must be square")
    if n == 0:
        raise ValueError("W is empty")
    if not sp.issparse(W) and n <= _OWN_SOLVER_LIMIT:
        if np.any(W < 0):
            raise ValueError("W must be nonnegative")
        gamma = _match_dense(W)
        return CodebookAssignment(gamma=gamma, source_W=W, total_weight=_total(W, gamma))

    Ws = sp.csr_matrix(W)
    if Ws.nnz and Ws.data.min() < 0:
        raise ValueError("W must be nonnegative")
    Ws.eliminate_zeros()
    gamma = np.full(n, -1, dtype=np.int64)
    if Ws.nnz:
        gamma_active = _match_sparse(Ws)
        gamma[gamma_active[0]] = gamma_active[1]
    taken = np.zeros(n, dtype=bool)
    taken[gamma[gamma >= 0]] = True
    spare = np.nonzero(~taken)[0]
    gamma[gamma < 0] = spare[: int(np.sum(gamma < 0))]
    return CodebookAssignment(gamma=gamma, source_W=W, total_weight=_total(Ws, gamma))


def brute_force_matching(W) -> CodebookAssignment:
    """Exhaustive search over permutations; test oracle for small tables."""
    W = np.asarray(W.toarray() if sp.issparse(W) else W)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("W must be square")
    if n > 8:
        raise ValueError("brute force limited to 8x8")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    weights = W[perms, np.arange(n)].sum(axis=1)
    best = int(np.argmax(weights))   # first maximum = lexicographically smallest
    gamma = perms[best]
    return CodebookAssignment(gamma=gamma, source_W=W, total_weight=int(weights[best]))


# ---------------------------------------------------------------------------
# key sidecar

_KEYS = ("lattice", "alpha", "dim", "delta", "epsilon", "gamma")


@dataclass(frozen=True, eq=False)
class KeyFile:
    """Side information a detector needs for the content-aware schemes."""

    lattice: str
    alpha: int
    dim: int
    delta: float
    epsilon: float
    gamma: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, KeyFile):
            return NotImplemented
        return ((self.lattice, self.alpha, self.dim, self.delta, self.epsilon)
                == (other.lattice, other.alpha, other.dim, other.delta, other.epsilon)
                and np.array_equal(self.gamma, other.gamma))

    @classmethod
    def from_assignment(cls, spec: LatticeSpec, assignment, epsilon: float) -> "KeyFile":
        gamma = np.asarray(getattr(assignment, "gamma", assignment), dtype=np.int64)
        return cls(spec.name, spec.alpha, spec.dim, spec.delta, float(epsilon), gamma)


def _validate_key(key: KeyFile):
    if key.lattice not in LATTICE_NAMES:
        raise KeyFormatError(f"unknown lattice {key.lattice!r}")
    if key.alpha < 2 or key.dim < 1:
        raise KeyFormatError("alpha must be >= 2 and dim >= 1")
    size = key.alpha ** key.dim
    g = np.asarray(key.gamma)
    if g.shape != (size,):
        raise KeyFormatError(f"gamma has {g.size} entries, expected {size}")
    if not np.array_equal(np.sort(g), np.arange(size)):
        raise KeyFormatError("gamma is not a permutation")
    if not (math.isfinite(key.delta) and key.delta > 0):
        raise KeyFormatError("delta must be positive")
    if not (math.isfinite(key.epsilon) and key.epsilon > 0):
        raise KeyFormatError("epsilon must be positive")


def _format_key(key: KeyFile) -> str:
    _validate_key(key)
    return (f"lattice={key.lattice}\n"
            f"alpha={key.alpha}\n"
            f"dim={key.dim}\n"
            f"delta={key.delta!r}\n"
            f"epsilon={key.epsilon!r}\n"
            f"gamma={','.join(str(int(v)) for v in key.gamma)}\n")


def save_assignment(key: KeyFile, sink) -> None:
    """Write a key file to a path (atomically) or a text stream."""
    text = _format_key(key)
    if isinstance(sink, (str, os.PathLike)):
        path = Path(sink)
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    else:
        sink.write(text)


def load_assignment(source) -> KeyFile:
    if isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        text = source.read()
    else:
        raise TypeError("source must be a path or text stream")
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise KeyFormatError(f"line {lineno}: expected key=value")
        if key not in _KEYS:
            raise KeyFormatError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise KeyFormatError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value.strip()
    missing = [k for k in _KEYS if k not in fields]
    if missing:
        raise KeyFormatError(f"missing keys: {', '.join(missing)}")
    try:
        lattice = canonical_name(fields["lattice"])
    except ValueError as exc:
        raise KeyFormatError(str(exc)) from None
    try:
        key = KeyFile(
            lattice=lattice,
            alpha=int(fields["alpha"]),
            dim=int(fields["dim"]),
            delta=float(fields["delta"]),
            epsilon=float(fields["epsilon"]),
            gamma=np.array([int(t) for t in fields["gamma"].split(",")], dtype=np.int64),
        )
    except ValueError as exc:
        raise KeyFormatError(f"malformed value: {exc}") from None
    _validate_key(key)
    return key
