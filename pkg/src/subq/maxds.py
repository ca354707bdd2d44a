"""Submodular maximization heuristics and difference-of-submodular minimization."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import InputError, PreconditionError, SetFunction, as_mask, greedy_vertex
from .sfm import exact_solver
from .zoo import MONOTONE_CHECK_MAX, _is_nondecreasing, add_modular

# a move must improve the objective by more than this to count
IMPROVE_EPS = 1e-12
# relative window in which a stale lazy-greedy bound is re-evaluated before a pick
TIE_SLACK = 1e-9


@dataclass
class MaxResult:
    chosen: np.ndarray
    value: float
    trace: list = field(default_factory=list)  # (element, gain) pairs, 0-based
    flagged: bool = False

    def to_json(self) -> dict:
        return {
            "chosen": [int(i) + 1 for i in np.flatnonzero(self.chosen)],
            "value": self.value,
            "trace": [[int(k) + 1, float(g)] for k, g in self.trace],
            "flagged": self.flagged,
        }


def greedy_max_cardinality(F: SetFunction, k: int, lazy: bool = True, assume_monotone: bool = False) -> MaxResult:
    """Add the element of largest marginal gain ``k`` times (ties: smallest index).

    The lazy variant keeps stale gains in a heap as upper bounds and only
    re-evaluates the top; it selects exactly the same elements as the eager
    scan.  Stops early once no gain is positive.
    """
    p = F.p
    if not 1 <= k <= p:
        raise InputError(f"k must lie in [1, {p}] (got {k})")
    if not assume_monotone and p <= MONOTONE_CHECK_MAX and not _is_nondecreasing(F):
        raise PreconditionError("greedy maximization needs a non-decreasing function")
    A = np.zeros(p, dtype=bool)
    cur = 0.0
    trace = []

    def gain(j):
        A[j] = True
        v = F.evaluate(A)
        A[j] = False
        return v - cur

    if lazy:
        heap = [(-gain(j), j, 0) for j in range(p)]
        heapq.heapify(heap)
    for rnd in range(k):
        if lazy:
            while True:
                neg, j, stamp = heap[0]
                if stamp != rnd:
                    heapq.heapreplace(heap, (-gain(j), j, rnd))
                    continue
                # stale bounds may undershoot by rounding; refresh near-ties before accepting
                slack = TIE_SLACK * (1.0 + abs(neg))
                near = [e for e in heap if e[2] != rnd and e[0] <= neg + slack]
                if near:
                    heap = [e for e in heap if not (e[2] != rnd and e[0] <= neg + slack)]
                    heap += [(-gain(e[1]), e[1], rnd) for e in near]
                    heapq.heapify(heap)
                    continue
                heapq.heappop(heap)
                best, g = j, -neg
                break
        else:
            best, g = -1, -np.inf
            for j in np.flatnonzero(~A):
                gj = gain(int(j))
                if gj > g:
                    best, g = int(j), gj
        if g <= 0:
            break
        A[best] = True
        cur = F.evaluate(A)
        trace.append((best, g))
    return MaxResult(A, cur, trace)


def local_search_max(F: SetFunction, start=None, budget: int = 10_000) -> MaxResult:
    """Best single-element add/remove moves until none improves.

    At termination every subset and every superset of the result has a
    value no larger, provided ``F`` is submodular.
    """
    p = F.p
    A = np.zeros(p, dtype=bool) if start is None else as_mask(start, p).copy()
    cur = F.evaluate(A)
    trace = []
    for _ in range(budget):
        best, best_val = -1, cur
        for j in range(p):
            A[j] = not A[j]
            v = F.evaluate(A)
            A[j] = not A[j]
            if v > best_val + IMPROVE_EPS and (best < 0 or v > best_val):
                best, best_val = j, v
        if best < 0:
            return MaxResult(A, cur, trace)
        A[best] = not A[best]
        trace.append((best, best_val - cur))
        cur = best_val
    return MaxResult(A, cur, trace, flagged=True)


def _bound_order(A: np.ndarray, first: Optional[int] = None, last_of_A: Optional[int] = None) -> np.ndarray:
    """Elements of ``A`` first, then the rest, both by index.

    ``first`` is placed right after ``A``; ``last_of_A`` is moved to the end
    of the ``A`` block.  Either way the greedy base stays tight at ``A``.
    """
    inside = [int(i) for i in np.flatnonzero(A) if i != last_of_A]
    if last_of_A is not None:
        inside.append(int(last_of_A))
    rest = [int(i) for i in np.flatnonzero(~A) if i != first]
    if first is not None:
        rest.insert(0, int(first))
    return np.array(inside + rest, dtype=np.int64)


def ds_minimize(F: SetFunction, G: SetFunction, start=None, sfm=None, max_rounds: int = 100):
    """Minimize ``F - G`` by iterated modular lower bounds of ``G``.

    Each round takes the greedy base of ``G`` for an ordering listing the
    current set first (a modular minorant tight there) and moves to a
    minimizer of ``F`` minus that bound.  When that stalls, orderings tight
    at both the current set and one of its single-element neighbours are
    tried, so the result cannot be improved by one flip.

    Returns the final set and the objective value after each round.
    """
    if F.p != G.p:
        raise InputError("F and G must share the ground set")
    p = F.p
    solve = sfm or exact_solver("auto")
    A = np.zeros(p, dtype=bool) if start is None else as_mask(start, p).copy()

    def obj(B):
        return F.evaluate(B) - G.evaluate(B)

    cur = obj(A)
    trace = [cur]
    for _ in range(max_rounds):
        s = greedy_vertex(G, _bound_order(A))
        B, _ = solve(add_modular(F, -s))
        B = np.asarray(B, dtype=bool)
        val = obj(B)
        if val < cur - IMPROVE_EPS:
            A, cur = B, val
            trace.append(cur)
            continue
        # the default bound stalled: look for an improving single flip
        moved = False
        for j in range(p):
            flip = A.copy()
            flip[j] = not flip[j]
            if obj(flip) < cur - IMPROVE_EPS:
                order = _bound_order(A, last_of_A=j) if A[j] else _bound_order(A, first=j)
                s = greedy_vertex(G, order)
                B, _ = solve(add_modular(F, -s))
                B = np.asarray(B, dtype=bool)
                val = obj(B)
                if val >= cur - IMPROVE_EPS:
                    B, val = flip, obj(flip)
                A, cur = B, val
                trace.append(cur)
                moved = True
                break
        if not moved:
            break
    return A, trace
