import json

import numpy as np
import pytest

from conftest import random_psd
from subq.core import (
    CapabilityError,
    InputError,
    NumericalError,
    PreconditionError,
    all_masks,
    greedy,
    is_submodular_bruteforce,
    lovasz,
)
from subq.graph import chain, cut_function, random_cover
from subq.sfm import exact_solver
from subq.zoo import (
    ConcaveSpec,
    CoverSpec,
    add_modular,
    cardinality_based,
    concave_compose,
    contract,
    convolve_modular,
    from_spec,
    gaussian_mutual_information,
    graphic_matroid_rank,
    load_spec,
    log_det,
    modular,
    monotonize,
    partial_min,
    restrict,
    scale,
    set_cover,
    sum_,
    symmetrize,
)


def zoo_members(rng, p=6):
    edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (1, 4)][:p]
    return {
        "modular": modular(rng.standard_normal(p)),
        "sqrt": cardinality_based(rng.uniform(0, 2, p), ConcaveSpec("sqrt")),
        "log1p": cardinality_based(np.ones(p), ConcaveSpec("log1p", 2.0)),
        "pwl": cardinality_based(np.ones(p), ConcaveSpec("piecewise_linear", breakpoints=(0, 1, 3), slopes=(2, 1, 0.25))),
        "cover": set_cover(random_cover(p, 5, 3)),
        "logdet": log_det(random_psd(p, rng)),
        "mi": gaussian_mutual_information(random_psd(p, rng)),
        "matroid": graphic_matroid_rank(edges, 5),
        "cut": cut_function(chain(p)),
        "sym": symmetrize(set_cover(random_cover(p, 4, 5))),
        "convolve": convolve_modular(cardinality_based(np.ones(p), ConcaveSpec("sqrt")), rng.uniform(0, 1, p)),
        "monotonize": monotonize(add_modular(cut_function(chain(p)), rng.standard_normal(p))),
        "compose": concave_compose(set_cover(random_cover(p, 4, 9)), ConcaveSpec("sqrt")),
        "partial_min": partial_min(add_modular(cut_function(chain(p + 3)), rng.standard_normal(p + 3)), [p, p + 1, p + 2]),
        "restrict": restrict(cut_function(chain(p + 2)), range(p)),
        "contract": contract(cut_function(chain(p + 2)), [p, p + 1]),
        "sum": sum_(cut_function(chain(p)), scale(set_cover(random_cover(p, 3, 2)), 0.5)),
    }


ZOO = sorted(zoo_members(np.random.default_rng(0)))


@pytest.mark.parametrize("name", ZOO)
def test_every_member_is_submodular_and_normalized(name):
    F = zoo_members(np.random.default_rng(0))[name]
    assert F.evaluate([]) == 0.0
    assert is_submodular_bruteforce(F)


@pytest.mark.parametrize("name", ZOO)
def test_fast_chain_matches_evaluate(name):
    F = zoo_members(np.random.default_rng(0))[name]
    perm = np.random.default_rng(1).permutation(F.p)
    fast = F.prefix_values(perm)
    m = np.zeros(F.p, dtype=bool)
    for k, j in enumerate(perm):
        m[j] = True
        assert fast[k + 1] == pytest.approx(F.evaluate(m.copy()), abs=1e-10)


def test_concave_spec_validation():
    assert ConcaveSpec("sqrt")(4.0) == 2.0
    with pytest.raises(InputError):
        ConcaveSpec("cube")
    with pytest.raises(InputError):
        ConcaveSpec("piecewise_linear", breakpoints=(0, 1), slopes=(1, 2))
    spec = ConcaveSpec("piecewise_linear", 2.0, (0, 1), (1, 0.5))
    assert ConcaveSpec.from_dict(spec.to_dict()) == spec


def test_cardinality_examples():
    p = 5
    ident = cardinality_based(np.ones(p), ConcaveSpec("linear"))
    one = cardinality_based(np.ones(p), ConcaveSpec("min_with_one"))
    root = cardinality_based(np.ones(p), ConcaveSpec("sqrt"))
    for m in all_masks(p):
        assert ident.evaluate(m) == m.sum()
        assert one.evaluate(m) == float(m.any())
    assert root.evaluate([0, 1, 2, 3]) == 2.0
    with pytest.raises(InputError):
        cardinality_based([1.0, -1.0], ConcaveSpec("sqrt"))


def test_cardinality_order_statistics_extension():
    g = ConcaveSpec("sqrt")
    F = cardinality_based(np.ones(6), g)
    w = np.random.default_rng(2).standard_normal(6)
    ws = np.sort(w)[::-1]
    k = np.arange(1, 7)
    assert lovasz(F, w) == pytest.approx(float(ws @ (np.sqrt(k) - np.sqrt(k - 1))))


def test_cover_examples():
    part = set_cover(CoverSpec(6, ((0, 1), (2, 3), (4, 5)), (1.0, 1.0, 1.0)))
    assert part.evaluate([0, 1, 4]) == 2.0
    whole = set_cover(CoverSpec(3, ((0, 1, 2),), (1.0,)))
    assert whole.evaluate([]) == 0.0 and whole.evaluate([1]) == 1.0
    overlap = set_cover(CoverSpec(3, ((0, 1), (1, 2)), (1.0, 1.0)))
    assert overlap.evaluate([1]) == 2.0
    with pytest.raises(InputError):
        CoverSpec(3, ((),), (1.0,))
    with pytest.raises(InputError):
        CoverSpec(3, ((0,),), (-1.0,))


def test_cover_extension_is_weighted_group_max():
    spec = random_cover(7, 5, 4)
    F = set_cover(spec)
    w = np.random.default_rng(4).standard_normal(7)
    # valid for w >= 0 only; shift by the translation identity
    shift = -w.min()
    expect = sum(d * max(w[list(g)] + shift) for g, d in zip(spec.groups, spec.weights))
    assert lovasz(F, w) + shift * F.evaluate(np.ones(7, dtype=bool)) == pytest.approx(expect)


def test_logdet_examples():
    I = np.eye(4)
    for m in all_masks(4):
        assert log_det(I, jitter=0.0).evaluate(m) == 0.0
        assert gaussian_mutual_information(I, jitter=0.0).evaluate(m) == 0.0
    Q = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert log_det(Q, jitter=0.0).evaluate([0, 1]) == pytest.approx(np.log(0.75), abs=1e-12)
    assert np.log(0.75) == pytest.approx(-0.28768, abs=1e-5)
    with pytest.raises(NumericalError, match="2x2"):
        log_det(np.ones((2, 2)), jitter=0.0)


def test_mutual_information_symmetric_nonnegative():
    rng = np.random.default_rng(5)
    F = gaussian_mutual_information(random_psd(8, rng))
    for _ in range(50):
        m = rng.random(8) < 0.5
        assert F.evaluate(m) >= -1e-12
        assert F.evaluate(m) == pytest.approx(F.evaluate(~m), abs=1e-10)


def test_matroid_examples():
    tri = graphic_matroid_rank([(0, 1), (1, 2), (2, 0)], 3)
    assert tri.evaluate([]) == 0.0
    assert tri.evaluate([0, 1]) == 2.0
    assert tri.evaluate([0, 1, 2]) == 2.0
    with pytest.raises(InputError):
        graphic_matroid_rank([(0, 3)], 3)


def test_matroid_increments_and_kruskal():
    rng = np.random.default_rng(6)
    n = 6
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.6]
    F = graphic_matroid_rank(edges, n)
    for _ in range(100):
        m = rng.random(F.p) < 0.5
        k = int(rng.integers(F.p))
        if m[k]:
            continue
        inc = F.evaluate(m | np.eye(F.p, dtype=bool)[k]) - F.evaluate(m)
        assert inc in (0.0, 1.0)
    w = rng.permutation(F.p).astype(float) + 1.0
    s, _ = greedy(F, w)
    # Kruskal on decreasing weights
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    tree = np.zeros(F.p)
    for e in np.argsort(-w):
        ru, rv = find(edges[e][0]), find(edges[e][1])
        if ru != rv:
            parent[ru] = rv
            tree[e] = 1.0
    assert np.array_equal(s.s, tree)


def test_combinator_examples():
    G = restrict(cut_function(chain(4)), [0, 1])
    assert G.evaluate([0]) == 1.0
    sym = symmetrize(cardinality_based(np.ones(4), ConcaveSpec("linear")))
    assert all(sym.evaluate(m) == 0.0 for m in all_masks(4))
    conv = convolve_modular(cardinality_based(np.ones(5), ConcaveSpec("min_with_one")), np.full(5, 0.2))
    assert conv.evaluate([0, 1, 2]) == pytest.approx(0.6)


def test_restrict_then_contract_composes():
    rng = np.random.default_rng(8)
    F = add_modular(cut_function(chain(7)), rng.standard_normal(7))
    A = np.array([1, 1, 1, 1, 1, 0, 0], dtype=bool)
    B = np.array([1, 0, 1, 0, 0], dtype=bool)
    H = restrict(F, A).contract(B)
    for m in all_masks(3):
        full = np.zeros(7, dtype=bool)
        full[[0, 2]] = True
        full[np.array([1, 3, 4])[m]] = True
        assert H.evaluate(m) == pytest.approx(F.evaluate(full) - F.evaluate(np.isin(np.arange(7), [0, 2])))


def test_convolve_bounds_and_limits():
    rng = np.random.default_rng(9)
    F = set_cover(random_cover(6, 4, 1))
    z = rng.uniform(0, 1, 6)
    G = convolve_modular(F, z)
    for m in all_masks(6):
        assert G.evaluate(m) <= F.evaluate(m) + 1e-12
        assert G.evaluate(m) <= z[m].sum() + 1e-12
    Ginf = convolve_modular(F, np.full(6, np.inf))
    assert all(Ginf.evaluate(m) == F.evaluate(m) for m in all_masks(6))
    Fm = add_modular(F, rng.standard_normal(6))
    G0 = convolve_modular(Fm, np.zeros(6))
    for m in all_masks(6):
        sub = [Fm.evaluate(b & m) for b in all_masks(6)]
        assert G0.evaluate(m) == pytest.approx(min(0.0, min(sub)))


def test_monotonize_properties():
    rng = np.random.default_rng(10)
    F = add_modular(cut_function(chain(6)), rng.standard_normal(6))
    G = monotonize(F)
    vals = G.values_all()
    for m in all_masks(6):
        for k in np.flatnonzero(~m):
            assert G.evaluate(m | np.eye(6, dtype=bool)[k]) >= G.evaluate(m) - 1e-12
        assert G.evaluate(m) + G.shift <= F.evaluate(m) + 1e-12
    assert vals.min() >= -1e-12


def test_compose_requires_monotone():
    with pytest.raises(PreconditionError):
        concave_compose(cut_function(chain(4)), ConcaveSpec("sqrt"))
    concave_compose(cut_function(chain(13)), ConcaveSpec("sqrt"), assume_monotone=True)


def test_inner_minimization_needs_solver_beyond_threshold():
    F = add_modular(cut_function(chain(20)), np.linspace(-1, 1, 20))
    with pytest.raises(CapabilityError):
        partial_min(F, range(3, 20))
    G = partial_min(F, range(3, 20), exact_solver("mnp"))
    brute = min(F.evaluate(np.concatenate([[True, False, False], b])) for b in all_masks(17)[::257])
    assert G.evaluate([0]) <= brute + 1e-9


def test_from_spec_round_trip(tmp_path):
    spec = {"type": "sum", "terms": [
        {"type": "cut", "n": 3, "arcs": [[1, 2, 1.0], [2, 3, 1.0]], "symmetric": True},
        {"type": "scale", "lambda": 2.0, "f": {"type": "cover", "p": 3, "groups": [[1, 2], [3]]}},
        {"type": "modular", "z": [0.5, -1.0, 0.0]},
    ]}
    path = tmp_path / "f.json"
    path.write_text(json.dumps(spec))
    F = load_spec(path)
    assert F.evaluate([1]) == pytest.approx(2.0 + 2.0 - 1.0)
    with pytest.raises(InputError):
        from_spec({"type": "nope"})


def test_scale_requires_non_negative():
    with pytest.raises(InputError):
        scale(cut_function(chain(3)), -1.0)
