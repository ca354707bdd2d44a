import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cut
from subq.core import InputError, all_masks, lovasz
from subq.graph import (
    StNetwork,
    WeightedDigraph,
    chain,
    cut_function,
    genrmf_like,
    grid2d,
    max_flow,
    min_cut_certificate,
    min_cut_minus_modular,
    random_cover,
    read_edge_list,
    st_cut_function,
    two_moons_logdet,
    write_edge_list,
)


def cut_capacity(g, side):
    t, h, c = g.directed()
    return float(c[side[t] & ~side[h]].sum())


def brute_min_cut(net):
    n, s, t = net.base.n, net.source, net.sink
    inner = [k for k in range(n) if k not in (s, t)]
    best = np.inf
    for bits in itertools.product([False, True], repeat=len(inner)):
        side = np.zeros(n, dtype=bool)
        side[s] = True
        side[inner] = bits
        best = min(best, cut_capacity(net.base, side))
    return best


def brute_cut_minus_modular(g, z):
    F = cut_function(g)
    best = np.inf
    for code in range(1 << g.n):
        m = np.array([(code >> k) & 1 for k in range(g.n)], dtype=bool)
        best = min(best, F.evaluate(m) - z[m].sum())
    return best


# -- max-flow ---------------------------------------------------------------


def test_single_arc():
    res = max_flow(StNetwork(WeightedDigraph(2, [(0, 1, 3.0)]), 0, 1))
    assert res.value == 3.0
    assert res.source_side.tolist() == [True, False]


def test_diamond():
    g = WeightedDigraph(4, [(0, 1, 2), (0, 2, 2), (1, 3, 1), (2, 3, 1)])
    net = StNetwork(g, 0, 3)
    res = max_flow(net)
    assert res.value == pytest.approx(2.0)
    assert brute_min_cut(net) == pytest.approx(2.0)


def test_random_networks_match_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 11))
        net = StNetwork(random_cut(n, rng, density=float(rng.uniform(0.1, 0.7))), 0, n - 1)
        res = max_flow(net)
        assert res.value == pytest.approx(brute_min_cut(net), abs=1e-9)
        assert cut_capacity(net.base, res.source_side) == pytest.approx(res.value, abs=1e-9)


def test_flow_is_feasible_and_conserved():
    net = genrmf_like(3, 4, 1.0, 10.0, seed=5)
    res = max_flow(net)
    tails, heads, caps = net.base.directed()
    assert np.all(res.flow >= -1e-9) and np.all(res.flow <= caps + 1e-9)
    net_out = np.bincount(tails, res.flow, net.base.n) - np.bincount(heads, res.flow, net.base.n)
    inner = np.ones(net.base.n, dtype=bool)
    inner[[net.source, net.sink]] = False
    assert np.allclose(net_out[inner], 0.0, atol=1e-9)
    assert net_out[net.source] == pytest.approx(res.value)


def test_smallest_and_largest_source_side():
    # two parallel bottlenecks of equal capacity: the middle vertex can go either way
    g = WeightedDigraph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    net = StNetwork(g, 0, 2)
    small = max_flow(net).source_side
    large = max_flow(net, maximal_source_side=True).source_side
    assert small.tolist() == [True, False, False]
    assert large.tolist() == [True, True, False]


def test_network_validation():
    with pytest.raises(InputError):
        StNetwork(WeightedDigraph(2, [(0, 1, 1.0)]), 0, 0)
    with pytest.raises(InputError):
        WeightedDigraph(2, [(0, 0, 1.0)])
    with pytest.raises(InputError):
        WeightedDigraph(2, [(0, 1, -1.0)])
    with pytest.raises(InputError):
        WeightedDigraph(2, [(0, 2, 1.0)])


# -- cut functions ----------------------------------------------------------


def test_chain_cut_examples():
    F = cut_function(chain(3))
    assert F.evaluate([1]) == 2.0
    assert F.evaluate([]) == 0.0
    assert F.evaluate([0, 1, 2]) == 0.0


def test_symmetric_cut_is_complement_invariant():
    rng = np.random.default_rng(2)
    g = random_cut(8, rng, symmetric=True)
    F = cut_function(g)
    for _ in range(50):
        m = rng.random(8) < 0.5
        assert F.evaluate(m) == pytest.approx(F.evaluate(~m))


def test_extension_is_weighted_total_variation():
    rng = np.random.default_rng(4)
    g = random_cut(7, rng)
    t, h, c = g.directed()
    F = cut_function(g)
    for _ in range(30):
        w = rng.standard_normal(7)
        tv = float(c @ np.maximum(w[t] - w[h], 0.0))
        assert lovasz(F, w) == pytest.approx(tv, abs=1e-12)


def test_laplacian_identity():
    rng = np.random.default_rng(5)
    g = random_cut(9, rng, symmetric=True)
    Q = g.laplacian()
    F = cut_function(g)
    for _ in range(50):
        a = (rng.random(9) < 0.5).astype(float)
        assert F.evaluate(a.astype(bool)) == pytest.approx(a @ Q @ a)


def test_restrict_and_contract_match_definition():
    rng = np.random.default_rng(6)
    g = random_cut(6, rng)
    F = cut_function(g)
    A = np.array([1, 1, 0, 1, 0, 1], dtype=bool)
    R, C = F.restrict(A), F.contract(A)
    idx_in, idx_out = np.flatnonzero(A), np.flatnonzero(~A)
    for code in range(1 << 4):
        sub = np.array([(code >> k) & 1 for k in range(4)], dtype=bool)
        full = np.zeros(6, dtype=bool)
        full[idx_in[sub]] = True
        assert R.evaluate(sub) == pytest.approx(F.evaluate(full))
    for code in range(1 << 2):
        sub = np.array([(code >> k) & 1 for k in range(2)], dtype=bool)
        full = A.copy()
        full[idx_out[sub]] = True
        assert C.evaluate(sub) == pytest.approx(F.evaluate(full) - F.evaluate(A))


def test_st_cut_function_matches_max_flow():
    net = genrmf_like(2, 3, 1.0, 5.0, seed=1)
    F = st_cut_function(net)
    vals = F.values_all()
    # F is normalized by subtracting cut({source})
    base = cut_capacity(net.base, np.eye(net.base.n, dtype=bool)[net.source])
    assert vals.min() + base == pytest.approx(max_flow(net).value)


# -- cut minus modular ------------------------------------------------------


def test_zero_modular():
    A, v = min_cut_minus_modular(chain(4), np.zeros(4))
    assert v == 0.0 and not A.any()


def test_chain_two_example():
    A, v = min_cut_minus_modular(chain(2), np.array([2.0, -2.0]))
    assert A.tolist() == [True, False]
    assert v == pytest.approx(-1.0)


def test_grid_matches_enumeration():
    rng = np.random.default_rng(7)
    g = grid2d(4, 4)
    for _ in range(5):
        z = rng.standard_normal(16) * 2
        _, v = min_cut_minus_modular(g, z)
        assert v == pytest.approx(brute_cut_minus_modular(g, z), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.integers(1, 10))
def test_cut_minus_modular_is_exact(seed, p):
    rng = np.random.default_rng(seed)
    g = random_cut(p, rng, density=0.4)
    z = rng.standard_normal(p) * 2
    A, v = min_cut_minus_modular(g, z)
    assert v == pytest.approx(brute_cut_minus_modular(g, z), abs=1e-9)
    assert cut_function(g).evaluate(A) - z[A].sum() == pytest.approx(v, abs=1e-12)
    Amax, vmax = min_cut_minus_modular(g, z, maximal=True)
    assert vmax == pytest.approx(v, abs=1e-9)
    assert np.all(Amax >= A)


def test_certificate_is_a_dual_base():
    rng = np.random.default_rng(8)
    g = random_cut(8, rng)
    z = rng.standard_normal(8)
    A, v, s = min_cut_certificate(g, z)
    G = cut_function(g)
    assert s.sum() == pytest.approx(-z.sum(), abs=1e-9)
    assert np.minimum(s, 0).sum() == pytest.approx(v, abs=1e-9)
    vals = G.values_all()
    masks = all_masks(8)
    assert np.all(masks @ s <= vals - masks @ z + 1e-9)


# -- generators -------------------------------------------------------------


def test_small_generators():
    assert chain(3, 1.0).arcs == ((0, 1, 1.0), (1, 2, 1.0))
    assert len(grid2d(2, 2, 1.0).arcs) == 4
    with pytest.raises(InputError):
        grid2d(0, 2)
    with pytest.raises(InputError):
        genrmf_like(4, 1, 1, 100, seed=0)


def test_genrmf_structure():
    net = genrmf_like(4, 6, 1.0, 100.0, seed=3)
    assert net.base.n == 96 and (net.source, net.sink) == (0, 95)
    frame = np.arange(96) // 16
    t, h, c = net.base.directed()
    step = frame[h] - frame[t]
    assert set(step.tolist()) == {0, 1}
    inter = step == 1
    assert inter.sum() == 16 * 5
    assert np.all((c[inter] >= 1.0) & (c[inter] <= 100.0))
    # every vertex is reachable from the source
    seen = {0}
    todo = [0]
    while todo:
        u = todo.pop()
        for v in h[t == u].tolist():
            if v not in seen:
                seen.add(v)
                todo.append(v)
    assert len(seen) == 96
    assert st_cut_function(net).evaluate([]) == 0.0


def test_generators_are_reproducible():
    assert genrmf_like(3, 3, 1, 10, seed=9) == genrmf_like(3, 3, 1, 10, seed=9)
    assert genrmf_like(3, 3, 1, 10, seed=9) != genrmf_like(3, 3, 1, 10, seed=10)
    a, b = two_moons_logdet(n=40, seed=2), two_moons_logdet(n=40, seed=2)
    assert a.kernel.tobytes() == b.kernel.tobytes() and a.prior.tobytes() == b.prior.tobytes()
    assert random_cover(10, 4, seed=1) == random_cover(10, 4, seed=1)


def test_two_moons_defaults():
    tm = two_moons_logdet(n=60, seed=0)
    K = tm.kernel
    assert np.allclose(K, K.T) and np.linalg.eigvalsh(K).min() > 0
    off = K - np.diag(np.diag(K))
    assert np.median(off[np.triu_indices(60, 1)]) == pytest.approx(0.5, abs=1e-6)
    assert len(tm.labeled) == 16
    assert set(np.sign(tm.prior[tm.labeled]).tolist()) == {-1.0, 1.0}
    assert np.all(tm.prior[np.setdiff1d(np.arange(60), tm.labeled)] == 0)


def test_edge_list_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    g = random_cut(6, rng)
    path = tmp_path / "g.txt"
    write_edge_list(path, g)
    assert read_edge_list(path) == g
    path.write_text("3 2\n1 2 1.0\n")
    with pytest.raises(InputError):
        read_edge_list(path)
