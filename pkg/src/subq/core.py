"""Set-function oracles, the greedy algorithm and exhaustive reference checks.

Subsets are handled as boolean masks of length ``p``; any iterable of
0-based indices is accepted wherever a subset is expected.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

# membership / tightness slack, scaled by (1 + |F(V)|)
TOL = 1e-9
# slack for the exhaustive second-order submodularity test
SUBMODULAR_SLACK = 1e-10


class SubqError(Exception):
    """Base class for library errors."""


class InputError(SubqError, ValueError):
    pass


class CapabilityError(SubqError):
    """Raised when an exhaustive routine is asked to run on too large a ground set."""


class PreconditionError(SubqError, ValueError):
    pass


class NumericalError(SubqError, ArithmeticError):
    pass


@dataclass(frozen=True)
class GroundSet:
    p: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.p < 1:
            raise InputError("ground set needs p >= 1")
        if self.labels is not None:
            if len(self.labels) != self.p:
                raise InputError("one label per element required")
            if len(set(self.labels)) != self.p:
                raise InputError("labels must be distinct")


def as_mask(A, p: int) -> np.ndarray:
    """Convert a subset given as a mask or as indices to a boolean mask."""
    if isinstance(A, np.ndarray) and A.dtype == bool:
        if A.shape != (p,):
            raise InputError(f"mask of shape {A.shape} for ground set of size {p}")
        return A
    mask = np.zeros(p, dtype=bool)
    idx = np.fromiter((int(i) for i in A), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= p:
            raise InputError(f"subset indices must lie in [0, {p})")
        mask[idx] = True
    return mask


def indices(mask: np.ndarray) -> list[int]:
    return [int(i) for i in np.flatnonzero(mask)]


def format_subset(mask: np.ndarray) -> str:
    """Comma-separated 1-based indices, the CLI representation of a subset."""
    return ",".join(str(i + 1) for i in np.flatnonzero(mask))


def parse_subset(text: str, p: int) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros(p, dtype=bool)
    return as_mask([int(tok) - 1 for tok in text.split(",")], p)


def _key(mask: np.ndarray) -> bytes:
    return np.packbits(mask).tobytes()


def all_masks(p: int) -> np.ndarray:
    """Boolean matrix whose row ``i`` is the subset encoded by the bits of ``i``."""
    ints = np.arange(2**p, dtype=np.uint32)
    return ((ints[:, None] >> np.arange(p, dtype=np.uint32)) & 1).astype(bool)


def subset_sums(s: np.ndarray) -> np.ndarray:
    """``s(A)`` for every subset, indexed by the integer bit encoding of ``A``."""
    out = np.zeros(1)
    for v in np.asarray(s, dtype=float):
        out = np.concatenate([out, out + v])
    return out


class SetFunction:
    """A normalized set function accessed through a memoized value oracle.

    Subclasses implement ``_value(mask)`` and may implement ``_chain(perm)``,
    returning the raw values on all non-empty prefixes of ``perm`` at once.
    ``F(empty)`` is evaluated once at construction and subtracted from every
    value.

    ``calls`` counts distinct subsets evaluated through ``evaluate``; a fast
    chain sweep adds ``p`` to it without touching the memo.
    """

    def __init__(self, p: int, *, labels=None, cache: bool = True, name: str = ""):
        self.ground = GroundSet(int(p), None if labels is None else tuple(labels))
        self.p = self.ground.p
        self.name = name or type(self).__name__
        self.calls = 0
        self.sweeps = 0
        self._use_cache = cache
        self._cache: dict[bytes, float] = {}
        self._lock = threading.Lock()
        self._offset = 0.0
        self._offset = float(self._value(np.zeros(self.p, dtype=bool)))

    # -- to be provided by subclasses -------------------------------------
    def _value(self, mask: np.ndarray) -> float:
        raise NotImplementedError

    _chain: Optional[Callable[[np.ndarray], np.ndarray]] = None

    # -- public oracle ----------------------------------------------------
    @property
    def has_fast_chain(self) -> bool:
        return self._chain is not None

    def evaluate(self, A) -> float:
        mask = as_mask(A, self.p)
        if not self._use_cache:
            with self._lock:
                self.calls += 1
            return float(self._value(mask)) - self._offset
        key = _key(mask)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        val = float(self._value(mask)) - self._offset
        with self._lock:
            if key not in self._cache:
                self._cache[key] = val
                self.calls += 1
        return val

    __call__ = evaluate

    def prefix_values(self, perm: Sequence[int]) -> np.ndarray:
        """Values ``F({perm[0..k-1]})`` for ``k = 0..p`` (first entry is 0)."""
        perm = np.asarray(perm, dtype=np.int64)
        out = np.empty(self.p + 1)
        out[0] = 0.0
        with self._lock:
            self.sweeps += 1
        if self._chain is not None:
            out[1:] = np.asarray(self._chain(perm), dtype=float) - self._offset
            with self._lock:
                self.calls += self.p
            return out
        mask = np.zeros(self.p, dtype=bool)
        for k, j in enumerate(perm):
            mask[j] = True
            out[k + 1] = self.evaluate(mask)
        return out

    def values_all(self) -> np.ndarray:
        """Values on all ``2**p`` subsets, indexed by the integer bit encoding."""
        if self.p > 22:
            raise CapabilityError(f"exhaustive enumeration needs p <= 22 (got {self.p})")
        masks = all_masks(self.p)
        if 2**self.p <= 65536:
            return np.array([self.evaluate(m) for m in masks])
        vals = np.fromiter((self._value(m) for m in masks), dtype=float, count=len(masks))
        vals -= self._offset
        with self._lock:
            self.calls += len(vals)
        return vals

    def reset_counters(self):
        with self._lock:
            self.calls = 0
            self.sweeps = 0
            self._cache.clear()

    # -- structural operations (subclasses may specialise) ----------------
    def restrict(self, A) -> "SetFunction":
        """Restriction to ``A``: ``B -> F(B)`` for ``B`` inside ``A``."""
        return Restriction(self, as_mask(A, self.p))

    def contract(self, A) -> "SetFunction":
        """Contraction on ``A``: ``B -> F(A | B) - F(A)`` on the complement."""
        return Contraction(self, as_mask(A, self.p))

    def min_minus_modular(self, z: np.ndarray):
        """Exact ``min_A F(A) - z(A)`` when a fast specialisation exists, else None."""
        return None

    def __repr__(self):
        return f"<{self.name} p={self.p}>"


class FunctionOracle(SetFunction):
    """Wrap a plain callable ``mask -> float`` (optionally with a chain fast path)."""

    def __init__(self, p, fn, chain=None, **kw):
        self._fn = fn
        if chain is not None:
            self._chain = chain
        super().__init__(p, **kw)

    def _value(self, mask):
        return self._fn(mask)


class Restriction(SetFunction):
    def __init__(self, parent: SetFunction, mask: np.ndarray):
        self.parent = parent
        self.support = np.flatnonzero(mask)
        self._rest = np.flatnonzero(~mask)
        if parent.has_fast_chain:
            self._chain = self._chain_via_parent
        super().__init__(len(self.support), name=f"restrict({parent.name})")

    def _embed(self, mask):
        full = np.zeros(self.parent.p, dtype=bool)
        full[self.support[mask]] = True
        return full

    def _value(self, mask):
        return self.parent.evaluate(self._embed(mask))

    def _chain_via_parent(self, perm):
        full = np.concatenate([self.support[perm], self._rest])
        return self.parent.prefix_values(full)[1 : self.p + 1]


class Contraction(SetFunction):
    def __init__(self, parent: SetFunction, mask: np.ndarray):
        self.parent = parent
        self.base = mask.copy()
        self.base_idx = np.flatnonzero(mask)
        self.support = np.flatnonzero(~mask)
        self.base_value = parent.evaluate(mask)
        if parent.has_fast_chain:
            self._chain = self._chain_via_parent
        super().__init__(len(self.support), name=f"contract({parent.name})")

    def _value(self, mask):
        full = self.base.copy()
        full[self.support[mask]] = True
        return self.parent.evaluate(full) - self.base_value

    def _chain_via_parent(self, perm):
        full = np.concatenate([self.base_idx, self.support[perm]])
        vals = self.parent.prefix_values(full)
        return vals[len(self.base_idx) + 1 :] - self.base_value


def tolerance(F: SetFunction) -> float:
    return TOL * (1.0 + abs(F.evaluate(np.ones(F.p, dtype=bool))))


# ---------------------------------------------------------------------------
# bases and the greedy algorithm


@dataclass
class BaseVector:
    """A point of the base polyhedron with its greedy-vertex provenance.

    ``orderings[i]`` is a permutation whose greedy vertex enters ``s`` with
    weight ``weights[i]``.  Certificates produced without a vertex
    decomposition (e.g. from a maximum flow) carry empty orderings.
    """

    s: np.ndarray
    orderings: list = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def neg_part(self) -> float:
        """``s_-(V)``, the dual objective of submodular minimization."""
        return float(np.minimum(self.s, 0.0).sum())

    def reconstruct(self, F: SetFunction) -> np.ndarray:
        out = np.zeros(F.p)
        for perm, wt in zip(self.orderings, self.weights):
            out += wt * greedy_vertex(F, perm)
        return out


def decreasing_order(w: np.ndarray) -> np.ndarray:
    """Indices sorting ``w`` decreasingly, ties by ascending index."""
    return np.argsort(-np.asarray(w, dtype=float), kind="stable")


def greedy_vertex(F: SetFunction, perm: Sequence[int]) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    vals = F.prefix_values(perm)
    s = np.empty(F.p)
    s[perm] = np.diff(vals)
    return s


def _check_weights(F, w):
    w = np.asarray(w, dtype=float)
    if w.shape != (F.p,):
        raise InputError(f"weight vector of length {w.shape} for p={F.p}")
    if not np.all(np.isfinite(w)):
        raise InputError("weights must be finite")
    return w


def greedy(F: SetFunction, w) -> tuple[BaseVector, float]:
    """Maximize ``w^T s`` over the base polyhedron.

    Returns the greedy base for the decreasing order of ``w`` and the value
    ``f(w) = w^T s`` of the Lovász extension.
    """
    w = _check_weights(F, w)
    perm = decreasing_order(w)
    s = greedy_vertex(F, perm)
    return BaseVector(s, [perm], np.ones(1)), float(w @ s)


def lovasz(F: SetFunction, w) -> float:
    """Lovász extension through the telescoping formula over sorted components."""
    w = _check_weights(F, w)
    levels = np.unique(w)
    if levels.size <= 2:
        # indicator-like vectors: direct level-set values, so f(1_A) = F(A) bit for bit
        hi = levels[-1]
        lo = levels[0]
        out = F.evaluate(np.ones(F.p, dtype=bool)) * lo
        if levels.size == 2:
            out = F.evaluate(w == hi) * (hi - lo) + out
        return float(out)
    perm = decreasing_order(w)
    vals = F.prefix_values(perm)[1:]
    ws = w[perm]
    return float(vals[:-1] @ (ws[:-1] - ws[1:]) + vals[-1] * ws[-1])


# ---------------------------------------------------------------------------
# exhaustive reference computations


class SubmodularityCheck(NamedTuple):
    is_submodular: bool
    witness: Optional[tuple] = None  # (A as index tuple, j, k)

    def __bool__(self):
        return self.is_submodular


def is_submodular_bruteforce(F: SetFunction, slack: float = SUBMODULAR_SLACK) -> SubmodularityCheck:
    """Test all second-order differences ``F(A+k)-F(A) >= F(A+j+k)-F(A+j)``."""
    p = F.p
    if p > 20:
        raise CapabilityError(f"exhaustive submodularity test needs p <= 20 (got {p})")
    vals = F.values_all()
    ints = np.arange(2**p, dtype=np.int64)
    for j in range(p):
        for k in range(j + 1, p):
            bj, bk = 1 << j, 1 << k
            A = ints[(ints & (bj | bk)) == 0]
            d = (vals[A | bk] - vals[A]) - (vals[A | bj | bk] - vals[A | bj])
            bad = np.flatnonzero(d < -slack)
            if bad.size:
                a = int(A[bad[0]])
                return SubmodularityCheck(False, (tuple(i for i in range(p) if a >> i & 1), j, k))
    return SubmodularityCheck(True, None)


def in_polyhedron(F: SetFunction, s, which: str = "B") -> bool:
    """Membership of ``s`` in P, B, P+ or |P| of ``F``.

    Exhaustive for ``p <= 20``; otherwise decided by minimizing ``F - s``.
    """
    s = np.asarray(s, dtype=float)
    tol = tolerance(F)
    if which == "|P|":
        s = np.abs(s)
    elif which == "P+":
        if np.any(s < -tol):
            return False
    elif which == "B":
        if abs(s.sum() - F.evaluate(np.ones(F.p, dtype=bool))) > tol:
            return False
    elif which != "P":
        raise InputError(f"unknown polyhedron {which!r}")
    if F.p <= 20:
        return bool(np.min(F.values_all() - subset_sums(s)) >= -tol)
    from .sfm import min_norm_point
    from .zoo import add_modular

    res = min_norm_point(add_modular(F, -s))
    return bool(res.min_value >= -tol)


def maximizer_optimality(F: SetFunction, w, s, tol: float = 1e-8) -> bool:
    """Whether every weak sup-level set of ``w`` is tight for ``s``."""
    w = _check_weights(F, w)
    s = s.s if isinstance(s, BaseVector) else np.asarray(s, dtype=float)
    for v in np.unique(w)[::-1]:
        A = w >= v
        if abs(s[A].sum() - F.evaluate(A)) > tol:
            return False
    return True


def extreme_points(F: SetFunction, tol: float = 1e-10) -> list[BaseVector]:
    """All distinct greedy vertices, by running every ordering (``p <= 8``)."""
    if F.p > 8:
        raise CapabilityError(f"vertex enumeration needs p <= 8 (got {F.p})")
    found: list[BaseVector] = []
    for perm in itertools.permutations(range(F.p)):
        perm = np.array(perm)
        s = greedy_vertex(F, perm)
        if all(np.max(np.abs(s - b.s)) > tol for b in found):
            found.append(BaseVector(s, [perm], np.ones(1)))
    return found


def brute_force_minimizers(F: SetFunction, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Minimum value and the boolean matrix of all minimizing subsets."""
    vals = F.values_all()
    opt = vals.min()
    rows = np.flatnonzero(vals <= opt + tol)
    return float(opt), all_masks(F.p)[rows]
