"""Concrete submodular functions and submodularity-preserving combinators.

Every constructor returns a :class:`~subq.core.SetFunction`.  Functions that
admit a cheap evaluation along a whole chain of nested sets (cardinality,
cover, log-det, matroid rank, modular) expose it so that greedy sweeps cost
one pass instead of ``p`` independent evaluations.

Combinators that hide an inner minimization (``convolve_modular``,
``monotonize``, ``partial_min``) enumerate the inner set when it has at most
``INNER_BRUTE_MAX`` elements and otherwise call a solver handle: any callable
mapping a SetFunction to ``(minimizer_mask, min_value)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    CapabilityError,
    FunctionOracle,
    InputError,
    NumericalError,
    PreconditionError,
    SetFunction,
    all_masks,
    as_mask,
)

INNER_BRUTE_MAX = 16
# exhaustive monotonicity check threshold for concave_compose
MONOTONE_CHECK_MAX = 12

SolverHandle = Callable[[SetFunction], tuple]


# ---------------------------------------------------------------------------
# concave scalar functions


@dataclass(frozen=True)
class ConcaveSpec:
    """A concave, non-decreasing ``g`` on the non-negative reals with ``g(0) = 0``.

    ``kind`` is one of ``linear``, ``sqrt``, ``log1p``, ``min_with_one`` or
    ``piecewise_linear``.  The last takes ``breakpoints`` (sorted, starting at
    0) and non-increasing non-negative ``slopes``, one per segment, the last
    slope extending to infinity.  ``scale`` multiplies the whole function.
    """

    kind: str
    scale: float = 1.0
    breakpoints: tuple = ()
    slopes: tuple = ()
    _knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "sqrt", "log1p", "min_with_one", "piecewise_linear"):
            raise InputError(f"unknown concave kind {self.kind!r}")
        if self.scale < 0:
            raise InputError("scale must be non-negative")
        knots = np.zeros(0)
        if self.kind == "piecewise_linear":
            bp = np.asarray(self.breakpoints, dtype=float)
            sl = np.asarray(self.slopes, dtype=float)
            if bp.size == 0 or bp[0] != 0 or np.any(np.diff(bp) <= 0):
                raise InputError("breakpoints must be strictly increasing from 0")
            if sl.shape != bp.shape or np.any(sl < 0) or np.any(np.diff(sl) > 0):
                raise InputError("slopes must be non-negative, non-increasing, one per breakpoint")
            knots = np.concatenate([[0.0], np.cumsum(sl[:-1] * np.diff(bp))])
        object.__setattr__(self, "_knots", knots)
        grid = np.linspace(0.0, 10.0, 101)
        g = self(grid)
        if abs(g[0]) > 1e-12 or np.any(np.diff(g) < -1e-12) or np.any(np.diff(g, 2) > 1e-9):
            raise InputError(f"{self.kind} is not concave non-decreasing with g(0)=0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            y = x
        elif self.kind == "sqrt":
            y = np.sqrt(x)
        elif self.kind == "log1p":
            y = np.log1p(x)
        elif self.kind == "min_with_one":
            y = np.minimum(x, 1.0)
        else:
            bp = np.asarray(self.breakpoints, dtype=float)
            i = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, None)
            y = self._knots[i] + np.asarray(self.slopes)[i] * (x - bp[i])
        return self.scale * y

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.scale != 1.0:
            d["scale"] = self.scale
        if self.kind == "piecewise_linear":
            d["breakpoints"] = list(self.breakpoints)
            d["slopes"] = list(self.slopes)
        return d

    @classmethod
    def from_dict(cls, d) -> "ConcaveSpec":
        if isinstance(d, str):
            return cls(d)
        return cls(
            d["kind"],
            float(d.get("scale", 1.0)),
            tuple(d.get("breakpoints", ())),
            tuple(d.get("slopes", ())),
        )


# ---------------------------------------------------------------------------
# concrete functions


class Modular(SetFunction):
    def __init__(self, z, **kw):
        self.z = np.asarray(z, dtype=float).copy()
        super().__init__(len(self.z), name=kw.pop("name", "modular"), **kw)

    def _value(self, mask):
        return float(self.z[mask].sum())

    def _chain(self, perm):
        return np.cumsum(self.z[perm])

    def restrict(self, A):
        return Modular(self.z[as_mask(A, self.p)])

    def contract(self, A):
        return Modular(self.z[~as_mask(A, self.p)])

    def min_minus_modular(self, y):
        d = self.z - np.asarray(y, dtype=float)
        mask = d < 0
        return mask, float(d[mask].sum())


def modular(z) -> SetFunction:
    return Modular(z)


class CardinalityBased(SetFunction):
    def __init__(self, weights, g: ConcaveSpec):
        self.weights = np.asarray(weights, dtype=float).copy()
        if np.any(self.weights < 0):
            raise InputError("cardinality-based weights must be non-negative")
        self.g = g
        super().__init__(len(self.weights), name=f"cardinality[{g.kind}]")

    def _value(self, mask):
        return float(self.g(self.weights[mask].sum()))

    def _chain(self, perm):
        return self.g(np.cumsum(self.weights[perm]))


def cardinality_based(weights, g: ConcaveSpec) -> SetFunction:
    """``A -> g(weights(A))``."""
    return CardinalityBased(weights, g)


@dataclass(frozen=True)
class CoverSpec:
    """Weighted groups of elements; ``groups[i]`` holds 0-based indices."""

    p: int
    groups: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.groups) != len(self.weights):
            raise InputError("one weight per group")
        for g in self.groups:
            if len(g) == 0:
                raise InputError("cover groups must be non-empty")
            if min(g) < 0 or max(g) >= self.p:
                raise InputError("cover group index out of range")
        if any(w < 0 for w in self.weights):
            raise InputError("cover weights must be non-negative")


class SetCover(SetFunction):
    def __init__(self, spec: CoverSpec):
        self.spec = spec
        self.n_groups = len(spec.groups)
        self._elems = np.concatenate([np.asarray(g, dtype=np.int64) for g in spec.groups]) if spec.groups else np.zeros(0, np.int64)
        self._gid = np.repeat(np.arange(self.n_groups), [len(g) for g in spec.groups])
        self._w = np.asarray(spec.weights, dtype=float)
        super().__init__(spec.p, name="cover")

    def _value(self, mask):
        hit = np.bincount(self._gid[mask[self._elems]], minlength=self.n_groups) > 0
        return float(self._w[hit].sum())

    def _chain(self, perm):
        rank = np.empty(self.p, dtype=np.int64)
        rank[perm] = np.arange(self.p)
        first = np.full(self.n_groups, self.p, dtype=np.int64)
        np.minimum.at(first, self._gid, rank[self._elems])
        inc = np.bincount(first, weights=self._w, minlength=self.p + 1)[: self.p]
        return np.cumsum(inc)


def set_cover(spec: CoverSpec) -> SetFunction:
    """Total weight of the groups that intersect ``A``."""
    return SetCover(spec)


class LogDet(SetFunction):
    def __init__(self, Q, jitter: Optional[float] = None, mutual_information: bool = False):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InputError("log-det needs a square matrix")
        if not np.allclose(Q, Q.T, atol=1e-12 * (1 + np.abs(Q).max())):
            raise InputError("log-det needs a symmetric matrix")
        p = Q.shape[0]
        if jitter is None:
            jitter = 1e-9 * np.trace(Q) / p
        self.jitter = float(jitter)
        self.Q = Q + self.jitter * np.eye(p)
        self.Q.setflags(write=False)
        self.mutual_information = mutual_information
        self._logdet_full = self._logdet(np.ones(p, dtype=bool))
        super().__init__(p, name="gaussian_mi" if mutual_information else "logdet")

    def _logdet(self, mask):
        k = int(mask.sum())
        if k == 0:
            return 0.0
        try:
            L = np.linalg.cholesky(self.Q[np.ix_(mask, mask)])
        except np.linalg.LinAlgError:
            raise NumericalError(f"Cholesky failed on a {k}x{k} principal submatrix") from None
        return 2.0 * float(np.log(np.diag(L)).sum())

    def _value(self, mask):
        if self.mutual_information:
            return self._logdet(mask) + self._logdet(~mask) - self._logdet_full
        return self._logdet(mask)

    def _prefix_logdets(self, perm):
        try:
            L = np.linalg.cholesky(self.Q[np.ix_(perm, perm)])
        except np.linalg.LinAlgError:
            raise NumericalError(f"Cholesky failed on the permuted {self.p}x{self.p} matrix") from None
        return 2.0 * np.cumsum(np.log(np.diag(L)))

    def _chain(self, perm):
        head = self._prefix_logdets(perm)
        if not self.mutual_information:
            return head
        tail = self._prefix_logdets(perm[::-1])  # tail[k-1] = logdet of last k elements
        suffix = np.concatenate([tail[-2::-1], [0.0]]) if self.p > 1 else np.zeros(1)
        return head + suffix - self._logdet_full


def log_det(Q, jitter: Optional[float] = None) -> SetFunction:
    """``A -> log det Q_AA`` (jitter defaults to ``1e-9 * trace(Q) / p``)."""
    return LogDet(Q, jitter)


def gaussian_mutual_information(Q, jitter: Optional[float] = None) -> SetFunction:
    """``A -> logdet Q_AA + logdet Q_{V-A,V-A} - logdet Q``: symmetric and non-negative."""
    return LogDet(Q, jitter, mutual_information=True)


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


class GraphicMatroidRank(SetFunction):
    def __init__(self, edges, n: int):
        if n < 1:
            raise InputError("graphic matroid needs n >= 1 vertices")
        self.edges = [(int(u), int(v)) for u, v in edges]
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"edge ({u}, {v}) references a vertex outside [0, {n})")
        self.n = n
        super().__init__(len(self.edges), name="graphic_matroid")

    def _value(self, mask):
        parent = list(range(self.n))
        rank = 0
        for e in np.flatnonzero(mask):
            u, v = self.edges[e]
            ru, rv = _find(parent, u), _find(parent, v)
            if ru != rv:
                parent[ru] = rv
                rank += 1
        return float(rank)

    def _chain(self, perm):
        parent = list(range(self.n))
        out = np.empty(self.p)
        rank = 0
        for k, e in enumerate(perm):
            u, v = self.edges[e]
            ru, rv = _find(parent, u), _find(parent, v)
            if ru != rv:
                parent[ru] = rv
                rank += 1
            out[k] = rank
        return out


def graphic_matroid_rank(edges, n: int) -> SetFunction:
    """Rank of an edge set: ``n`` minus the number of connected components it leaves."""
    return GraphicMatroidRank(edges, n)


# ---------------------------------------------------------------------------
# combinators


def restrict(F: SetFunction, A) -> SetFunction:
    return F.restrict(A)


def contract(F: SetFunction, A) -> SetFunction:
    return F.contract(A)


class Sum(SetFunction):
    def __init__(self, terms: Sequence[SetFunction], coefs: Sequence[float]):
        ps = {F.p for F in terms}
        if len(ps) != 1:
            raise InputError("summed functions must share a ground set")
        if any(c < 0 for c in coefs):
            raise InputError("non-negative coefficients required to preserve submodularity")
        self.terms = list(terms)
        self.coefs = [float(c) for c in coefs]
        if all(F.has_fast_chain for F in self.terms):
            self._chain = self._chain_sum
        super().__init__(ps.pop(), name="+".join(F.name for F in self.terms))

    def _value(self, mask):
        return sum(c * F.evaluate(mask) for c, F in zip(self.coefs, self.terms))

    def _chain_sum(self, perm):
        return sum(c * F.prefix_values(perm)[1:] for c, F in zip(self.coefs, self.terms))

    def restrict(self, A):
        return Sum([F.restrict(A) for F in self.terms], self.coefs)

    def contract(self, A):
        return Sum([F.contract(A) for F in self.terms], self.coefs)


def sum_(*terms: SetFunction) -> SetFunction:
    return Sum(terms, [1.0] * len(terms))


def scale(F: SetFunction, lam: float) -> SetFunction:
    if lam < 0:
        raise InputError("scaling factor must be non-negative")
    return Sum([F], [lam])


class AddModular(SetFunction):
    """``F + z``: keeps the fast paths of ``F`` available."""

    def __init__(self, F: SetFunction, z):
        self.inner = F
        self.z = np.asarray(z, dtype=float).copy()
        if self.z.shape != (F.p,):
            raise InputError("modular term has the wrong length")
        if F.has_fast_chain:
            self._chain = self._chain_add
        super().__init__(F.p, name=f"{F.name}+modular")

    def _value(self, mask):
        return self.inner.evaluate(mask) + float(self.z[mask].sum())

    def _chain_add(self, perm):
        return self.inner.prefix_values(perm)[1:] + np.cumsum(self.z[perm])

    def restrict(self, A):
        mask = as_mask(A, self.p)
        return AddModular(self.inner.restrict(mask), self.z[mask])

    def contract(self, A):
        mask = as_mask(A, self.p)
        return AddModular(self.inner.contract(mask), self.z[~mask])

    def min_minus_modular(self, y):
        return self.inner.min_minus_modular(np.asarray(y, dtype=float) - self.z)


def add_modular(F: SetFunction, z) -> SetFunction:
    return AddModular(F, z)


def symmetrize(F: SetFunction) -> SetFunction:
    """``A -> F(A) + F(V-A) - F(V)``."""
    full = np.ones(F.p, dtype=bool)
    FV = F.evaluate(full)
    return FunctionOracle(F.p, lambda m: F.evaluate(m) + F.evaluate(~m) - FV, name=f"sym({F.name})")


def _inner_min(fn, base: np.ndarray, free: np.ndarray, solver: Optional[SolverHandle], extra=None):
    """``min over C subset of free`` of ``fn(base | C) + extra(C)``.

    ``extra`` is an optional modular term given on the free elements.
    """
    m = len(free)
    extra = np.zeros(m) if extra is None else np.asarray(extra, dtype=float)
    if m <= INNER_BRUTE_MAX:
        best = np.inf
        for sub in all_masks(m):
            mask = base.copy()
            mask[free[sub]] = True
            best = min(best, fn(mask) + float(extra[sub].sum()))
        return best
    if solver is None:
        raise CapabilityError(f"inner minimization over {m} elements needs a solver handle")
    f0 = fn(base)

    def inner(sub):
        mask = base.copy()
        mask[free[sub]] = True
        return fn(mask) - f0

    H = AddModular(FunctionOracle(m, inner, name="inner"), extra)
    _, val = solver(H)
    return f0 + val


class ConvolveModular(SetFunction):
    def __init__(self, F, z, solver):
        self.inner, self.solver = F, solver
        self.z = np.asarray(z, dtype=float).copy()
        super().__init__(F.p, name=f"conv({F.name})")

    def _value(self, mask):
        # elements with infinite weight can never be left to the modular part
        forced = mask & np.isinf(self.z)
        free = np.flatnonzero(mask & ~forced)
        zf = self.z[free]
        # min over C subset of free of F(forced | C) + z(free - C)
        return float(zf.sum()) + _inner_min(self.inner.evaluate, forced, free, self.solver, -zf)


def convolve_modular(F: SetFunction, z, solver: Optional[SolverHandle] = None) -> SetFunction:
    """``A -> min over B subset of A`` of ``F(B) + z(A - B)``."""
    return ConvolveModular(F, z, solver)


class Monotonize(SetFunction):
    def __init__(self, F, solver):
        self.inner, self.solver = F, solver
        super().__init__(F.p, name=f"mono({F.name})")

    def _value(self, mask):
        return _inner_min(self.inner.evaluate, mask, np.flatnonzero(~mask), self.solver)

    @property
    def shift(self) -> float:
        """``min F``, subtracted to normalize; ``G + shift <= F`` pointwise."""
        return self._offset


def monotonize(F: SetFunction, solver: Optional[SolverHandle] = None) -> SetFunction:
    """``A -> min over B containing A`` of ``F(B)``, shifted to vanish at the empty set."""
    return Monotonize(F, solver)


def _is_nondecreasing(F: SetFunction) -> bool:
    vals = F.values_all()
    ints = np.arange(2**F.p)
    for k in range(F.p):
        A = ints[(ints >> k & 1) == 0]
        if np.any(vals[A | (1 << k)] < vals[A] - 1e-10):
            return False
    return True


def concave_compose(F: SetFunction, g: ConcaveSpec, assume_monotone: bool = False) -> SetFunction:
    """``A -> g(F(A))`` for non-decreasing ``F``.

    Monotonicity is checked exhaustively for ``p <= 12`` unless
    ``assume_monotone`` is set; larger inputs are trusted.
    """
    if not assume_monotone and F.p <= MONOTONE_CHECK_MAX and not _is_nondecreasing(F):
        raise PreconditionError("concave_compose needs a non-decreasing inner function")
    chain = (lambda perm: g(F.prefix_values(perm)[1:])) if F.has_fast_chain else None
    return FunctionOracle(F.p, lambda m: float(g(F.evaluate(m))), chain=chain, name=f"{g.kind}({F.name})")


class PartialMin(SetFunction):
    def __init__(self, G, aux, solver):
        self.outer, self.solver = G, solver
        self.aux = as_mask(aux, G.p)
        self.keep = np.flatnonzero(~self.aux)
        self._aux_idx = np.flatnonzero(self.aux)
        if len(self.keep) == 0:
            raise InputError("partial minimization leaves an empty ground set")
        super().__init__(len(self.keep), name=f"pmin({G.name})")

    def _value(self, mask):
        base = np.zeros(self.outer.p, dtype=bool)
        base[self.keep[mask]] = True
        return _inner_min(self.outer.evaluate, base, self._aux_idx, self.solver)


def partial_min(G: SetFunction, aux, solver: Optional[SolverHandle] = None) -> SetFunction:
    """``A -> min over B subset of aux`` of ``G(A | B)``, on the non-auxiliary elements."""
    return PartialMin(G, aux, solver)


# ---------------------------------------------------------------------------
# JSON function specs


def _subset_from_json(items, p):
    return as_mask([int(i) - 1 for i in items], p)


def from_spec(spec: dict, base_dir: Path | str = ".", solver: Optional[SolverHandle] = None) -> SetFunction:
    """Build a function from a JSON-compatible description.

    Element indices in specs are 1-based.  Supported ``type`` values:
    modular, cardinality, cover, logdet, mi, matroid, cut, sum, scale,
    add_modular, symmetrize, restrict, contract, convolve_modular,
    monotonize, concave_compose, partial_min.
    """
    base_dir = Path(base_dir)
    kind = spec.get("type")
    sub = lambda key: from_spec(spec[key], base_dir, solver)  # noqa: E731
    if kind == "modular":
        return modular(spec["z"])
    if kind == "cardinality":
        w = spec.get("weights") or [1.0] * int(spec["p"])
        return cardinality_based(w, ConcaveSpec.from_dict(spec["g"]))
    if kind == "cover":
        p = int(spec["p"])
        groups = tuple(tuple(int(i) - 1 for i in g) for g in spec["groups"])
        weights = tuple(spec.get("weights") or [1.0] * len(groups))
        return set_cover(CoverSpec(p, groups, weights))
    if kind in ("logdet", "mi"):
        if "matrix_file" in spec:
            Q = np.loadtxt(base_dir / spec["matrix_file"], delimiter=",", ndmin=2)
        else:
            Q = np.asarray(spec["matrix"], dtype=float)
        ctor = log_det if kind == "logdet" else gaussian_mutual_information
        return ctor(Q, spec.get("jitter"))
    if kind == "matroid":
        return graphic_matroid_rank([(u - 1, v - 1) for u, v in spec["edges"]], int(spec["n"]))
    if kind == "cut":
        from .graph import WeightedDigraph, cut_function, read_edge_list

        if "edge_file" in spec:
            g = read_edge_list(base_dir / spec["edge_file"], symmetric=spec.get("symmetric", False))
        else:
            arcs = [(int(u) - 1, int(v) - 1, float(c)) for u, v, c in spec["arcs"]]
            g = WeightedDigraph(int(spec["n"]), arcs, symmetric=spec.get("symmetric", False))
        F = cut_function(g)
        if "z" in spec:
            F = add_modular(F, spec["z"])
        return F
    if kind == "sum":
        return sum_(*(from_spec(t, base_dir, solver) for t in spec["terms"]))
    if kind == "scale":
        return scale(sub("f"), float(spec["lambda"]))
    if kind == "add_modular":
        return add_modular(sub("f"), spec["z"])
    if kind == "symmetrize":
        return symmetrize(sub("f"))
    if kind in ("restrict", "contract"):
        F = sub("f")
        A = _subset_from_json(spec["set"], F.p)
        return F.restrict(A) if kind == "restrict" else F.contract(A)
    if kind == "convolve_modular":
        return convolve_modular(sub("f"), spec["z"], solver)
    if kind == "monotonize":
        return monotonize(sub("f"), solver)
    if kind == "concave_compose":
        return concave_compose(sub("f"), ConcaveSpec.from_dict(spec["g"]), spec.get("assume_monotone", False))
    if kind == "partial_min":
        G = sub("f")
        return partial_min(G, _subset_from_json(spec["aux"], G.p), solver)
    raise InputError(f"unknown function type {kind!r}")


def load_spec(path: Path | str, solver: Optional[SolverHandle] = None) -> SetFunction:
    path = Path(path)
    with open(path) as fh:
        return from_spec(json.load(fh), path.parent, solver)
