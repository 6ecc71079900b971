"""Noise attacks, quality metrics and Monte-Carlo distortion/SER evaluators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import erfc

from .lattice import (CosetTable, LatticeSpec, integer_coords, nearest_coset,
                      nearest_point, quantize_coarse, second_moment_mc)
from .qim import Scheme, SchemeKind, embed_indices, detect_indices

__all__ = [
    "NOISE_KINDS",
    "NoiseChannel",
    "apply_noise",
    "MetricsReport",
    "mse",
    "psnr",
    "prd",
    "ssim",
    "ser",
    "ser_union_bound",
    "MseEstimate",
    "theoretical_mse_mc",
    "camd_upper_bound",
    "empirical_p1",
    "uniform_coarse_cell",
    "simulate_embedding_mse",
    "measure_ser_awgn",
]

NOISE_KINDS = ("awgn", "salt", "pepper", "salt_pepper", "speckle")
_NOISE_ALIASES = {"gaussian": "awgn", "saltpepper": "salt_pepper", "s&p": "salt_pepper"}


@dataclass(frozen=True)
class NoiseChannel:
    """``level`` is sigma for awgn/speckle and the probability p otherwise."""

    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        kind = _NOISE_ALIASES.get(self.kind, self.kind)
        if kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind in ("awgn", "speckle"):
            if not self.level >= 0:
                raise ValueError("sigma must be nonnegative")
        elif not 0 <= self.level <= 1:
            raise ValueError("probability must lie in [0, 1]")


def apply_noise(channel: NoiseChannel, target) -> np.ndarray:
    """Perturb pixels (integer input: rounded and clamped) or float carriers."""
    arr = np.asarray(target)
    pixels = np.issubdtype(arr.dtype, np.integer)
    x = arr.astype(float)
    rng = np.random.default_rng(channel.seed)
    lvl = float(channel.level)
    kind = channel.kind
    if kind == "awgn":
        y = x + lvl * rng.standard_normal(x.shape) if lvl > 0 else x.copy()
    elif kind == "speckle":
        y = x + x * (lvl * rng.standard_normal(x.shape)) if lvl > 0 else x.copy()
    else:
        u = rng.random(x.shape)
        y = x.copy()
        if kind == "salt":
            y[u < lvl] = 255.0
        elif kind == "pepper":
            y[u < lvl] = 0.0
        else:
            y[u < lvl / 2] = 0.0
            y[(u >= lvl / 2) & (u < lvl)] = 255.0
    if pixels:
        y = np.copysign(np.floor(np.abs(y) + 0.5), y)
        return np.clip(y, 0, 255).astype(arr.dtype)
    return y


# ---------------------------------------------------------------------------
# quality metrics

def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(mse_value: float, max_value: float = 255.0) -> float:
    """PSNR in dB; ``inf`` for a zero MSE."""
    if mse_value < 0:
        raise ValueError("mse must be nonnegative")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(max_value ** 2 / mse_value)


def prd(a, b) -> float:
    """Root of residual energy over reference energy (``a`` is the reference)."""
    a, b = _pair(a, b)
    den = float(np.sum(a ** 2))
    num = float(np.sum((a - b) ** 2))
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return math.sqrt(num / den)


def ssim(a, b, max_value: float = 255.0) -> float:
    """Single-window SSIM over the whole image."""
    a, b = _pair(a, b)
    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    mu_a, mu_b = a.mean(), b.mean()
    var_a, var_b = a.var(), b.var()
    cov = float(np.mean((a - mu_a) * (b - mu_b)))
    return float((2 * mu_a * mu_b + c1) * (2 * cov + c2)
                 / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))


@dataclass
class MetricsReport:
    mse: float
    psnr: float
    prd: float
    ssim: float
    ser: float
    domain: str

    @classmethod
    def compare(cls, a, b, ser_value: float, domain: str) -> "MetricsReport":
        m = mse(a, b)
        return cls(mse=m, psnr=psnr(m), prd=prd(a, b), ssim=ssim(a, b),
                   ser=float(ser_value), domain=domain)


def ser(sent, received) -> float:
    """Fraction of messages decoded wrongly.

    Accepts index arrays ``(M,)`` or message-vector arrays ``(M, N)``.
    """
    s = np.asarray(sent)
    r = np.asarray(received)
    if s.shape != r.shape:
        raise ValueError("sent and received differ in length")
    if s.size == 0:
        return 0.0
    wrong = s != r
    if s.ndim > 1:
        wrong = np.any(wrong.reshape(s.shape[0], -1), axis=1)
    return float(np.mean(wrong))


def ser_union_bound(spec: LatticeSpec, n0: float) -> float:
    """Nearest-neighbour union bound ``(tau/2) erfc((d_min/2)/sqrt(2 N0))``."""
    if n0 <= 0:
        raise ValueError("N0 must be positive")
    val = 0.5 * spec.kissing * float(erfc((spec.d_min / 2.0) / math.sqrt(2.0 * n0)))
    return min(1.0, max(0.0, val))


# ---------------------------------------------------------------------------
# distortion analysis

def uniform_coarse_cell(spec: LatticeSpec, n: int, rng) -> np.ndarray:
    """``n`` points uniform over the coarse Voronoi cell around the origin."""
    u = rng.random((n, spec.dim)) @ (spec.alpha * spec.generator).T
    return u - quantize_coarse(spec, u)


@dataclass(frozen=True)
class MseEstimate:
    mse: float
    p1: float
    inner_second: float      # E[|x|^2 | x in V_f]
    outer_second: float      # E[|x|^2 | x in V_c \ V_f]
    outer_first: float       # E[|x| | x in V_c \ V_f]
    upper_bound: float | None


def camd_upper_bound(spec: LatticeSpec, p1: float, epsilon: float,
                     g_fine: float, g_coarse: float | None = None) -> float:
    """Closed-form CAMD-QIM bound built from second moments and cell volumes.

    Uses the unnormalised region integrals ``N G Vol^(2/N+1)`` exactly as
    the bound is stated for the self-nested pair.
    """
    n = spec.dim
    g_c = g_fine if g_coarse is None else g_coarse
    vf, vc = spec.volume, spec.coarse_volume
    c = spec.r_pack - epsilon
    second = n * g_c * vc ** (2.0 / n + 1) - n * g_fine * vf ** (2.0 / n + 1)
    cross = n * g_c * vc ** (2.0 / n + 2) - n * g_fine * vf ** (2.0 / n + 2)
    return (1.0 - p1) / n * (second - 2.0 * c * math.sqrt(cross) + vc - vf)


def theoretical_mse_mc(spec: LatticeSpec, p1: float, scheme: Scheme | SchemeKind | str,
                       samples: int = 10**6, seed: int = 0,
                       g_fine: float | None = None) -> MseEstimate:
    """Expected per-dimension MSE from region moments of the coarse cell.

    The coarse cell is sampled uniformly and split into the fine cell and
    its complement.  QIM/CA weight the two second moments by ``p1`` and
    ``1 - p1``; MD/CAMD only pay ``(|x| - (r_pack - eps))^2`` outside the
    fine cell.  For MD/CAMD the closed-form upper bound is also returned.
    """
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    if not isinstance(scheme, Scheme):
        scheme = Scheme(SchemeKind(scheme))
    rng = np.random.default_rng(seed)
    n = spec.dim
    in_sum = in_cnt = 0.0
    out_sum = out_abs = out_cnt = 0.0
    done = 0
    while done < samples:
        m = min(250_000, samples - done)
        x = uniform_coarse_cell(spec, m, rng)
        inner = np.all(integer_coords(spec, nearest_point(spec, x)) == 0, axis=1)
        r2 = np.sum(x * x, axis=1)
        in_sum += float(r2[inner].sum())
        in_cnt += float(inner.sum())
        out_sum += float(r2[~inner].sum())
        out_abs += float(np.sqrt(r2[~inner]).sum())
        out_cnt += float((~inner).sum())
        done += m
    e1 = in_sum / in_cnt if in_cnt else 0.0
    e2 = out_sum / out_cnt if out_cnt else 0.0
    f2 = out_abs / out_cnt if out_cnt else 0.0
    kind = SchemeKind(scheme.kind)
    bound = None
    if kind.minimum_distortion:
        eps = scheme.resolved_epsilon(spec)
        c = spec.r_pack - eps
        value = (1.0 - p1) * (e2 - 2.0 * c * f2 + c * c) / n
        if g_fine is None:
            g_fine = second_moment_mc(spec, samples=max(10**5, samples // 4), seed=seed + 1)
        bound = camd_upper_bound(spec, p1, eps, g_fine)
    else:
        value = (p1 * e1 + (1.0 - p1) * e2) / n
    return MseEstimate(mse=value, p1=p1, inner_second=e1, outer_second=e2,
                       outer_first=f2, upper_bound=bound)


def empirical_p1(W, gamma) -> float:
    """Share of training pairs already sitting in their assigned coset."""
    g = np.asarray(getattr(gamma, "gamma", gamma), dtype=np.int64)
    total = float(W.sum())
    if total == 0:
        raise ValueError("empty adjacency matrix")
    cols = np.arange(g.size)
    if sp.issparse(W):
        hit = float(np.asarray(W.tocsr()[g, cols]).sum())
    else:
        hit = float(np.asarray(W)[g, cols].sum())
    return hit / total


def simulate_embedding_mse(spec: LatticeSpec, table: CosetTable, scheme: Scheme,
                           p1: float, samples: int, seed: int = 0) -> np.ndarray:
    """Per-carrier squared distortion (divided by N) from the real embedder.

    Carriers are uniform over a coarse cell; with probability ``p1`` the
    target coset is the carrier's own neighbour, otherwise one of the other
    cosets uniformly.  Identity labeling is used, so ``p1`` plays the role
    of the stay-in-place probability of any labeling.
    """
    rng = np.random.default_rng(seed)
    s = rng.random((samples, spec.dim)) @ (spec.alpha * spec.generator).T
    own = np.asarray(nearest_coset(spec, table, s), dtype=np.int64)
    stay = rng.random(samples) < p1
    other = (own + rng.integers(1, table.size, samples)) % table.size
    target = np.where(stay, own, other)
    kind = SchemeKind(scheme.kind)
    plain = Scheme(SchemeKind.MD_QIM if kind.minimum_distortion else SchemeKind.QIM,
                   scheme.epsilon)
    sw = embed_indices(spec, table, s, target, plain)
    return np.sum((s - sw) ** 2, axis=1) / spec.dim


def measure_ser_awgn(spec: LatticeSpec, table: CosetTable, n0: float, trials: int,
                     seed: int = 0, gamma=None) -> float:
    """Carrier-domain SER of (CA-)QIM with noise variance ``n0`` per dimension."""
    rng = np.random.default_rng(seed)
    s = rng.random((trials, spec.dim)) @ (spec.alpha * spec.generator).T
    msg = rng.integers(0, table.size, trials)
    kind = SchemeKind.QIM if gamma is None else SchemeKind.CA_QIM
    sw = embed_indices(spec, table, s, msg, Scheme(kind), gamma=gamma)
    y = sw + math.sqrt(n0) * rng.standard_normal(sw.shape)
    return ser(msg, detect_indices(spec, table, y, gamma))
