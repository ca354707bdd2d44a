import numpy as np
import pytest

from subq.core import FunctionOracle, all_masks
from subq.graph import WeightedDigraph, cut_function, random_cover
from subq.zoo import ConcaveSpec, add_modular, cardinality_based, gaussian_mutual_information, set_cover


def random_cut(p, rng, density=0.5, symmetric=False):
    arcs = [(u, v, float(rng.uniform(0.1, 2.0)))
            for u in range(p) for v in range(p) if u != v and rng.random() < density]
    return WeightedDigraph(p, arcs, symmetric=symmetric)


def random_psd(p, rng):
    X = rng.standard_normal((p, p + 2))
    return X @ X.T / (p + 2) + 0.1 * np.eye(p)


def random_instance(kind, p, rng, with_modular=True):
    """A seeded submodular function of one of the reference families."""
    if kind == "cut":
        F = cut_function(random_cut(p, rng))
    elif kind == "cover":
        F = set_cover(random_cover(p, max(2, p), int(rng.integers(1 << 30))))
    elif kind == "cardinality":
        g = ConcaveSpec(["sqrt", "log1p", "min_with_one"][int(rng.integers(3))], float(rng.uniform(0.5, 3.0)))
        F = cardinality_based(rng.uniform(0.0, 2.0, p), g)
    elif kind == "mi":
        F = gaussian_mutual_information(random_psd(p, rng))
    else:
        raise ValueError(kind)
    if with_modular:
        F = add_modular(F, rng.standard_normal(p))
    return F


KINDS = ("cut", "cover", "cardinality", "mi")


def brute_min(F):
    vals = F.values_all()
    return float(vals.min()), vals


def mask_of(code, p):
    return all_masks(p)[code]


def square_cardinality(p):
    """The supermodular ``|A|^2``."""
    return FunctionOracle(p, lambda m: float(m.sum()) ** 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
