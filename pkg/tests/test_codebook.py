import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from caqim.codebook import (KeyFile, KeyFormatError, adjacency_from_indices,
                            brute_force_matching, build_adjacency, hungarian_min_cost,
                            load_assignment, max_weight_matching, save_assignment)
from caqim.lattice import CosetTable, make_lattice
from caqim.metrics import empirical_p1

EX2_W = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [3, 0, 0, 0], [0, 1, 0, 0]])


def test_example_one():
    a = max_weight_matching(np.array([[1, 3], [5, 0]]))
    np.testing.assert_array_equal(a.gamma, [1, 0])
    assert a.total_weight == 8


def test_example_two_adjacency_and_matching():
    W = adjacency_from_indices([2, 3, 0, 2, 2, 1], [0, 1, 0, 0, 0, 2], 4)
    np.testing.assert_array_equal(W, EX2_W)
    a = max_weight_matching(W)
    np.testing.assert_array_equal(a.gamma, [2, 3, 1, 0])
    assert a.total_weight == 5
    assert brute_force_matching(W).total_weight == 5
    assert empirical_p1(W, a.gamma) == pytest.approx(5 / 6)
    assert empirical_p1(W, np.arange(4)) == pytest.approx(1 / 6)


def test_trivial_cases():
    np.testing.assert_array_equal(max_weight_matching(np.diag([5] * 4)).gamma, range(4))
    z = max_weight_matching(np.zeros((5, 5), dtype=int))
    np.testing.assert_array_equal(z.gamma, range(5))
    assert z.total_weight == 0
    np.testing.assert_array_equal(brute_force_matching(np.zeros((3, 3))).gamma, range(3))
    with pytest.raises(ValueError):
        max_weight_matching(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        brute_force_matching(np.zeros((9, 9)))


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**31), st.sampled_from([2, 4, 50]))
def test_matches_brute_force_including_tiebreak(n, seed, hi):
    W = np.random.default_rng(seed).integers(0, hi, (n, n))
    a, b = max_weight_matching(W), brute_force_matching(W)
    assert a.total_weight == b.total_weight
    np.testing.assert_array_equal(a.gamma, b.gamma)


def test_hungarian_potentials_certify_optimum():
    rng = np.random.default_rng(0)
    cost = rng.normal(size=(12, 12))
    row_of_col, u, v = hungarian_min_cost(cost)
    reduced = cost - u[:, None] - v[None, :]
    assert reduced.min() >= -1e-9
    np.testing.assert_allclose(reduced[row_of_col, np.arange(12)], 0, atol=1e-9)


def test_sparse_path_agrees_with_dense():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = 6
        W = rng.integers(0, 4, (n, n)) * (rng.random((n, n)) < 0.3)
        d = max_weight_matching(W)
        s = max_weight_matching(sp.csr_matrix(W))
        assert d.total_weight == s.total_weight
        assert sorted(s.gamma) == list(range(n))


def test_large_sparse_table_is_complete():
    n = 4096
    rng = np.random.default_rng(1)
    W = adjacency_from_indices(rng.integers(0, 50, 3000), rng.integers(0, 60, 3000), n)
    a = max_weight_matching(W)
    assert sorted(a.gamma) == list(range(n))
    assert a.total_weight >= np.asarray(W.diagonal()).sum()


def test_matching_never_below_identity():
    rng = np.random.default_rng(2)
    for _ in range(30):
        W = rng.integers(0, 20, (16, 16))
        assert max_weight_matching(W).total_weight >= np.trace(W)


def test_adjacency_is_merge_associative():
    rng = np.random.default_rng(3)
    a, b = rng.integers(0, 16, (2, 100)), rng.integers(0, 16, (2, 80))
    whole = adjacency_from_indices(np.r_[a[0], b[0]], np.r_[a[1], b[1]], 16)
    parts = adjacency_from_indices(*a, 16) + adjacency_from_indices(*b, 16)
    np.testing.assert_array_equal(whole, parts)
    assert whole.sum() == 180


def test_build_adjacency_from_carriers():
    spec = make_lattice("D2Example", alpha=2)
    t = CosetTable(spec)
    W = build_adjacency(spec, t, np.array([[127.0, 111.0], [34.0, 118.0]]), [0, 1])
    assert W[2, 0] == 1 and W[0, 1] == 1
    assert build_adjacency(spec, t, np.zeros((0, 2)), []).sum() == 0


def _key():
    spec = make_lattice("A2", alpha=4, delta=1.5)
    g = np.random.default_rng(0).permutation(16)
    return KeyFile.from_assignment(spec, g, 0.001)


def test_key_round_trip(tmp_path):
    key = _key()
    path = tmp_path / "k.key"
    save_assignment(key, path)
    assert load_assignment(path) == key
    buf = io.StringIO()
    save_assignment(key, buf)
    assert buf.getvalue() == path.read_text()
    assert load_assignment(io.StringIO(buf.getvalue())) == key


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace("gamma=", "gamma=0,") ,
    lambda t: t.replace("lattice=A2", "lattice=Q9"),
    lambda t: t + "colour=blue\n",
    lambda t: t + "alpha=4\n",
    lambda t: "\n".join(l for l in t.splitlines() if not l.startswith("delta")),
    lambda t: t.replace("epsilon=0.001", "epsilon=abc"),
])
def test_key_rejections(mutate):
    buf = io.StringIO()
    save_assignment(_key(), buf)
    with pytest.raises(KeyFormatError):
        load_assignment(io.StringIO(mutate(buf.getvalue())))


def test_key_duplicate_gamma_entry():
    text = "lattice=A2\nalpha=2\ndim=2\ndelta=1.0\nepsilon=0.001\ngamma=0,1,1,2\n"
    with pytest.raises(KeyFormatError):
        load_assignment(io.StringIO(text))
    ok = text.replace("0,1,1,2", "3,1,0,2")
    assert load_assignment(io.StringIO(ok)).gamma.tolist() == [3, 1, 0, 2]
