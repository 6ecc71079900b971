"""Acceptance suite: one verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are also
repeated in the terminal summary.  ``python tests/test_acceptance.py`` runs
the same checks without pytest.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from caqim.codebook import (adjacency_from_indices, brute_force_matching, build_adjacency,
                            max_weight_matching)
from caqim.dct import (BandSelector, carriers_from_coeffs, carriers_into_coeffs,
                       dct_matrix, forward_dct8, inverse_dct8, plane_to_coeffs)
from caqim.evaluate import evaluate_corpus
from caqim.lattice import (CosetTable, make_lattice, nearest_point_fast,
                           nearest_point_oracle, second_moment_mc)
from caqim.messages import bits_to_indices, random_bits
from caqim.metrics import (camd_upper_bound, measure_ser_awgn, mse, prd, psnr,
                           ser_union_bound, simulate_embedding_mse, ssim,
                           theoretical_mse_mc)
from caqim.qim import Scheme, SchemeKind, detect_indices, embed_indices

try:
    from conftest import load_corpus
except ImportError:     # pragma: no cover - direct script execution
    from tests.conftest import load_corpus

LINES = []
LATTICES = ("Zn", "A2", "D4", "E8")


def verdict(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {title} | {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


def _lattice(name, alpha=4):
    spec = make_lattice(name, alpha=alpha)
    return spec, CosetTable(spec)


# 1 ---------------------------------------------------------------------------

def test_c01_matching_fixtures():
    a = max_weight_matching(np.array([[1, 3], [5, 0]]))
    ok1 = a.total_weight == 8 and a.gamma.tolist() == [1, 0]
    W = adjacency_from_indices([2, 3, 0, 2, 2, 1], [0, 1, 0, 0, 0, 2], 4)
    expected = [[1, 0, 0, 0], [0, 0, 1, 0], [3, 0, 0, 0], [0, 1, 0, 0]]
    b = max_weight_matching(W)
    pairs = {(int(b.gamma[i]), i) for i in range(4)}
    ok2 = W.tolist() == expected and pairs == {(2, 0), (3, 1), (1, 2), (0, 3)}
    verdict(1, "worked matching fixtures", ok1 and ok2,
            f"2x2 gamma={a.gamma.tolist()} weight={a.total_weight}; "
            f"4x4 W ok={W.tolist() == expected} pairs={sorted(pairs)}")


# 2 ---------------------------------------------------------------------------

def test_c02_fast_decoders_match_oracle():
    details, ok = [], True
    for name in LATTICES:
        spec = make_lattice(name, dim=4 if name == "Zn" else None)
        x = np.random.default_rng(2).normal(0, 4, (10_000, spec.dim))
        d_fast = np.linalg.norm(x - nearest_point_fast(spec, x), axis=1)
        d_slow = np.linalg.norm(x - nearest_point_oracle(spec, x), axis=1)
        # equal up to floating-point evaluation of the same distance
        bad = int(np.sum(np.abs(d_fast - d_slow) > 1e-12 * np.maximum(1, d_slow)))
        ok &= bad == 0
        label = f"Z{spec.dim}" if name == "Zn" else spec.name
        details.append(f"{label}:{bad} mismatches")
    verdict(2, "fast decoders vs sphere search, 1e4 points each", ok, ", ".join(details))


# 3 ---------------------------------------------------------------------------

def test_c03_hungarian_vs_brute_force():
    rng = np.random.default_rng(3)
    bad = 0
    for n in (2, 4, 8):
        for _ in range(100):
            W = rng.integers(0, 20, (n, n))
            bad += max_weight_matching(W).total_weight != brute_force_matching(W).total_weight
    verdict(3, "matching optimum vs brute force, 3x100 matrices", bad == 0,
            f"{bad} weight mismatches")


# 4 ---------------------------------------------------------------------------

def test_c04_round_trip_noise_free():
    corpus = load_corpus(size=256, names=("camera",))
    coeffs = plane_to_coeffs(corpus[0]).reshape(1, -1, 8, 8)[:, :1000]
    worst, details = 0.0, []
    for name in LATTICES:
        spec, table = _lattice(name)
        for band in ("low", "mid", "high"):
            sel = BandSelector(band, 1)
            s = carriers_from_coeffs(coeffs, sel, spec.dim)
            rng = np.random.default_rng(4)
            m = bits_to_indices(random_bits(s.shape[0] * spec.dim * 2, 0.9, rng), 4,
                                spec.dim)
            gamma = max_weight_matching(build_adjacency(spec, table, s, m)).gamma
            for kind in SchemeKind:
                g = gamma if kind.content_aware else None
                sw = embed_indices(spec, table, s, m, Scheme(kind), gamma=g)
                # coefficients go back into the blocks and are read out again
                y = carriers_from_coeffs(carriers_into_coeffs(coeffs, sel, spec.dim, sw),
                                         sel, spec.dim)
                err = float(np.mean(detect_indices(spec, table, y, g) != m))
                worst = max(worst, err)
                if err:
                    details.append(f"{name}/{band}/{kind.value}={err:.4f}")
    verdict(4, "noise-free round trip, 4 schemes x 4 lattices x 3 bands x 1e3 blocks",
            worst == 0.0, "max SER 0" if not details else "; ".join(details))


# 5 ---------------------------------------------------------------------------

def _laplacian_pairs(spec, table, n, rng, uniform):
    s = rng.laplace(0.0, 1.0, (n, spec.dim))
    if uniform:
        m = rng.integers(0, table.size, n)
    else:
        m = bits_to_indices(random_bits(n * spec.dim * 2, 0.9, rng), 4, spec.dim)
    return s, m


def _per_carrier(spec, table, s, m, kind, gamma):
    sw = embed_indices(spec, table, s, m, Scheme(kind), gamma=gamma)
    return np.sum((s - sw) ** 2, axis=1) / spec.dim


def test_c05_distortion_orderings():
    n = 100_000
    ok, details = True, []
    for name in LATTICES:
        spec, table = _lattice(name)
        rng = np.random.default_rng(5)
        # biased messages: learn on the stream that is embedded
        s, m = _laplacian_pairs(spec, table, n, rng, uniform=False)
        g = max_weight_matching(build_adjacency(spec, table, s, m)).gamma
        per = {k: _per_carrier(spec, table, s, m, k, g) for k in SchemeKind}
        zs = []
        for better, worse in ((SchemeKind.CA_QIM, SchemeKind.QIM),
                              (SchemeKind.CAMD_QIM, SchemeKind.MD_QIM)):
            d = per[worse] - per[better]
            z = d.mean() / (d.std(ddof=1) / math.sqrt(n))
            zs.append(z)
            ok &= bool(z >= 5.0)
        # uniform messages: learn on an independent stream so the permutation
        # cannot fit the noise of the evaluation sample
        st, mt = _laplacian_pairs(spec, table, n, rng, uniform=True)
        s, m = _laplacian_pairs(spec, table, n, rng, uniform=True)
        g = max_weight_matching(build_adjacency(spec, table, st, mt)).gamma
        qim = _per_carrier(spec, table, s, m, SchemeKind.QIM, None).mean()
        ca = _per_carrier(spec, table, s, m, SchemeKind.CA_QIM, g).mean()
        rel = abs(ca - qim) / qim
        ok &= bool(rel < 0.02)
        details.append(f"{name}: z(CA<QIM)={zs[0]:.1f} z(CAMD<MD)={zs[1]:.1f} "
                       f"uniform rel={rel:.4f}")
    verdict(5, "CA<=QIM and CAMD<=MD at 5 sigma; uniform |CA-QIM|/QIM<2%", ok,
            "; ".join(details))


# 6 ---------------------------------------------------------------------------

def test_c06_uniform_closed_form():
    ok, details = True, []
    for name in LATTICES:
        spec, table = _lattice(name)
        g = second_moment_mc(spec, samples=10**6, seed=6)
        target = g * spec.coarse_volume ** (2.0 / spec.dim)
        chunks = [simulate_embedding_mse(spec, table, Scheme(SchemeKind.QIM),
                                         1.0 / table.size, 250_000, seed=60 + i)
                  for i in range(4)]
        emp = float(np.mean(np.concatenate(chunks)))
        rel = abs(emp - target) / target
        ok &= rel < 0.02
        details.append(f"{name}: G={g:.5f} emp={emp:.4f} closed={target:.4f} rel={rel:.4f}")
    z = make_lattice("Zn")
    gz = second_moment_mc(z, samples=10**6, seed=6)
    ok &= abs(gz - 1 / 12) < 0.01 / 12
    details.append(f"G(Z)={gz:.5f} vs 1/12")
    verdict(6, "uniform QIM MSE = G*Vol_c^(2/N) within 2% at 1e6 samples", ok,
            "; ".join(details))


# 7 ---------------------------------------------------------------------------

def test_c07_camd_upper_bound():
    ok, details = True, []
    p1s = np.random.default_rng(7).random(20)
    scheme = Scheme(SchemeKind.CAMD_QIM)
    for name in LATTICES:
        spec, table = _lattice(name)
        g = second_moment_mc(spec, samples=200_000, seed=7)
        eps = scheme.resolved_epsilon(spec)
        worst = -math.inf
        for i, p1 in enumerate(p1s):
            emp = simulate_embedding_mse(spec, table, scheme, p1, 50_000, seed=70 + i).mean()
            bound = camd_upper_bound(spec, p1, eps, g)
            worst = max(worst, emp - bound)
        at_one = simulate_embedding_mse(spec, table, scheme, 1.0, 50_000, seed=79).mean()
        mc_one = theoretical_mse_mc(spec, 1.0, scheme, samples=50_000, g_fine=g).mse
        ok &= worst <= 0 and at_one == 0.0 and mc_one == 0.0
        details.append(f"{name}: max(emp-bound)={worst:.3f} mse(P1=1)={at_one}")
    verdict(7, "CAMD MSE <= closed-form bound at 20 P1 values; 0 at P1=1", ok,
            "; ".join(details))


# 8 ---------------------------------------------------------------------------

def test_c08_parseval():
    T = dct_matrix()
    orth = float(np.max(np.abs(T @ T.T - np.eye(8))))
    dY = np.random.default_rng(8).normal(0, 3, (1000, 8, 8))
    dX = inverse_dct8(dY)
    ex, ey = np.sum(dX ** 2, axis=(1, 2)), np.sum(dY ** 2, axis=(1, 2))
    rel = float(np.max(np.abs(ex - ey) / ey))
    back = float(np.max(np.abs(forward_dct8(dX) - dY)))
    verdict(8, "energy preserved by the 8x8 transform", orth <= 1e-12 and rel <= 1e-9,
            f"max|TT'-I|={orth:.1e} max rel energy diff={rel:.1e} round trip={back:.1e}")


# 9 ---------------------------------------------------------------------------

SER_TARGETS = (0.005, 0.02, 0.1, 0.3, 0.45)


def test_c09_ser_union_bound():
    ok, details = True, []
    for name in ("A2", "D4", "E8"):
        spec, table = _lattice(name)
        gamma = np.random.default_rng(9).permutation(table.size)
        worst = math.inf
        for i, target in enumerate(SER_TARGETS):
            n0 = brentq(lambda v: ser_union_bound(spec, v) - target, 1e-4, 10.0)
            measured = measure_ser_awgn(spec, table, n0, 10**6, seed=90 + i, gamma=gamma)
            bound = ser_union_bound(spec, n0)
            ok &= measured <= bound
            worst = min(worst, bound - measured)
        details.append(f"{name}: min(bound-SER)={worst:.2e}")
    verdict(9, "AWGN SER <= union bound, 5 noise levels x 1e6 trials", ok,
            "; ".join(details))


# 10 --------------------------------------------------------------------------

def test_c10_metric_sanity():
    a = np.random.default_rng(10).integers(0, 256, (64, 64))
    same = mse(a, a) == 0 and prd(a, a) == 0 and ssim(a, a) == pytest.approx(1.0)
    p1, p2 = psnr(1.0), psnr(1.553)
    ok = same and abs(p1 - 48.13) <= 0.01 and abs(p2 - 46.2) <= 0.2
    verdict(10, "metric sanity", ok,
            f"identical ok={same} psnr(1)={p1:.3f} psnr(1.553)={p2:.3f}")


# 11 --------------------------------------------------------------------------

def test_c11_corpus_trends():
    corpus = load_corpus(size=256)[:6]
    rows = evaluate_corpus(corpus, ("A2", "D4", "E8"), bands=("low", "mid", "high"),
                           ks=(1, 2, 3))
    table = {(r.scheme, r.lattice, r.band, r.k): r.mse_freq for r in rows}
    fails = []
    for (scheme, lat, band, k), v in table.items():
        if band == "low":
            mid, high = table[(scheme, lat, "mid", k)], table[(scheme, lat, "high", k)]
            if not high < mid < v:
                fails.append(f"bands {scheme}/{lat}/k{k}")
        if scheme == "ca" and not v < table[("qim", lat, band, k)]:
            fails.append(f"CA/{lat}/{band}/k{k}")
        if scheme == "camd" and not v < table[("md", lat, band, k)]:
            fails.append(f"CAMD/{lat}/{band}/k{k}")
        nxt = table.get((scheme, lat, band, k + 1))
        if nxt is not None and nxt < v:
            fails.append(f"k {scheme}/{lat}/{band}/k{k}")
    verdict(11, "corpus trends: bands, content-aware gains, growth in k", not fails,
            f"{len(table)} configurations, {len(fails)} violations"
            + (": " + ", ".join(fails) if fails else ""))


if __name__ == "__main__":      # pragma: no cover
    import sys
    failed = 0
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_c")]:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
