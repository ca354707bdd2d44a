import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cut, random_instance, random_psd
from subq.core import InputError, PreconditionError, all_masks, greedy_vertex
from subq.graph import cut_function, random_cover, WeightedDigraph
from subq.maxds import _bound_order, ds_minimize, greedy_max_cardinality, local_search_max
from subq.zoo import ConcaveSpec, cardinality_based, log_det, modular, set_cover


def monotone_instance(kind, p, rng):
    if kind == "cover":
        return set_cover(random_cover(p, p, int(rng.integers(1 << 30))))
    if kind == "cardinality":
        return cardinality_based(rng.uniform(0.1, 2.0, p), ConcaveSpec("sqrt", float(rng.uniform(0.5, 2))))
    # log det(I + K) only grows with the index set
    return log_det(np.eye(p) + random_psd(p, rng))


def best_of_size(F, k):
    masks = all_masks(F.p)
    vals = F.values_all()
    return float(vals[masks.sum(axis=1) <= k].max())


# -- greedy -----------------------------------------------------------------


def test_greedy_cardinality_function():
    F = cardinality_based(np.ones(5), ConcaveSpec("linear"))
    res = greedy_max_cardinality(F, 3)
    assert res.chosen.sum() == 3 and res.value == 3.0
    assert [k for k, _ in res.trace] == [0, 1, 2]


def test_greedy_on_modular_picks_top_weights():
    z = np.array([0.5, 3.0, 1.0, 2.0, 0.1])
    res = greedy_max_cardinality(modular(z), 2)
    assert np.flatnonzero(res.chosen).tolist() == [1, 3]
    assert res.value == pytest.approx(best_of_size(modular(z), 2))


def test_greedy_cover_ratio_example():
    rng = np.random.default_rng(0)
    F = set_cover(random_cover(6, 6, seed=4))
    res = greedy_max_cardinality(F, 2)
    assert res.value >= 0.75 * best_of_size(F, 2) - 1e-9


def test_greedy_ratio_on_exhaustive_instances():
    rng = np.random.default_rng(1)
    for trial in range(30):
        kind = ("cover", "cardinality", "logdet")[trial % 3]
        p = int(rng.integers(4, 15))
        F = monotone_instance(kind, p, rng)
        for k in range(1, min(4, p) + 1):
            res = greedy_max_cardinality(F, k)
            bound = 1 - (1 - 1 / k) ** k
            assert res.value >= bound * best_of_size(F, k) - 1e-9
            gains = [g for _, g in res.trace]
            assert all(b <= a + 1e-12 for a, b in zip(gains, gains[1:]))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 8))
def test_lazy_equals_eager(seed, k):
    rng = np.random.default_rng(seed)
    F = monotone_instance(("cover", "cardinality", "logdet")[seed % 3], 12, rng)
    a = greedy_max_cardinality(F, k, lazy=True)
    b = greedy_max_cardinality(F, k, lazy=False)
    assert np.array_equal(a.chosen, b.chosen)
    assert a.value == b.value
    assert a.trace == b.trace


def test_greedy_preconditions():
    with pytest.raises(InputError):
        greedy_max_cardinality(modular(np.ones(3)), 0)
    with pytest.raises(InputError):
        greedy_max_cardinality(modular(np.ones(3)), 4)
    with pytest.raises(PreconditionError):
        greedy_max_cardinality(cut_function(random_cut(4, np.random.default_rng(0))), 2)


def test_greedy_json():
    res = greedy_max_cardinality(modular([1.0, 2.0]), 1)
    assert res.to_json() == {"chosen": [2], "value": 2.0, "trace": [[2, 2.0]], "flagged": False}


# -- local search -----------------------------------------------------------


def test_triangle_cut_climbs():
    F = cut_function(WeightedDigraph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], symmetric=True))
    res = local_search_max(F)
    assert res.value == 2.0 and 0 < res.chosen.sum() < 3


def test_local_search_on_modular():
    z = np.array([1.0, -2.0, 0.5, 0.0])
    res = local_search_max(modular(z))
    assert res.chosen.tolist() == [True, False, True, False]


def test_local_maxima_dominate_subsets_and_supersets():
    rng = np.random.default_rng(2)
    masks = all_masks(9)
    for trial in range(20):
        kind = ("cut", "cover", "mi")[trial % 3]
        F = random_instance(kind, 9, rng, with_modular=False)
        start = rng.random(9) < 0.5
        res = local_search_max(F, start)
        vals = F.values_all()
        A = res.chosen
        sub = np.all(masks <= A, axis=1)
        sup = np.all(masks >= A, axis=1)
        assert np.all(vals[sub | sup] <= res.value + 1e-9)
        assert not res.flagged


def test_local_search_budget_flag():
    res = local_search_max(modular(np.ones(5)), budget=2)
    assert res.flagged and res.chosen.sum() == 2


def test_random_subset_quarter_guarantee():
    rng = np.random.default_rng(3)
    for trial in range(9):
        kind = ("cut", "cover", "mi")[trial % 3]
        F = random_instance(kind, 10, rng, with_modular=False)
        opt = float(F.values_all().max())
        draws = rng.random((1000, 10)) < 0.5
        mean = np.mean([F.evaluate(m) for m in draws])
        assert mean >= opt / 4 - 0.02 * opt


# -- difference of submodular functions -------------------------------------


def test_ds_with_zero_subtrahend():
    rng = np.random.default_rng(4)
    F = random_instance("cut", 8, rng)
    A, trace = ds_minimize(F, modular(np.zeros(8)))
    assert F.evaluate(A) == pytest.approx(F.values_all().min())
    assert len(trace) <= 2


def test_ds_identical_pair_stops_at_once():
    rng = np.random.default_rng(5)
    F = random_instance("cover", 7, rng)
    A, trace = ds_minimize(F, F)
    assert trace == [0.0] and not A.any()


def test_modular_bound_is_tight_and_below():
    rng = np.random.default_rng(6)
    masks = all_masks(8)
    for _ in range(10):
        G = random_instance("mi", 8, rng)
        vals = G.values_all()
        A = rng.random(8) < 0.5
        for order in (_bound_order(A), _bound_order(A, first=int(np.flatnonzero(~A)[0]) if (~A).any() else None)):
            s = greedy_vertex(G, order)
            assert s[A].sum() == pytest.approx(G.evaluate(A))
            assert np.all(masks @ s <= vals + 1e-9)


def test_ds_reaches_flip_stable_points():
    rng = np.random.default_rng(7)
    for trial in range(20):
        p = int(rng.integers(3, 11))
        F = random_instance(("cut", "cover", "mi", "cardinality")[trial % 4], p, rng)
        G = random_instance(("cover", "mi", "cut", "cardinality")[trial % 4], p, rng)
        start = rng.random(p) < 0.5
        A, trace = ds_minimize(F, G, start)
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        cur = F.evaluate(A) - G.evaluate(A)
        assert cur == trace[-1]
        assert cur <= F.evaluate(start) - G.evaluate(start)
        for j in range(p):
            flip = A.copy()
            flip[j] = not flip[j]
            assert F.evaluate(flip) - G.evaluate(flip) >= cur - 1e-12


def test_ds_size_mismatch():
    with pytest.raises(InputError):
        ds_minimize(modular(np.ones(2)), modular(np.ones(3)))
