"""Submodular function minimization with primal/dual certificates.

All iterative solvers work on the function left after restriction
preprocessing and report results for the original function.  Every solver
keeps a primal set ``A`` and a base ``s``; ``F(A) - s_-(V)`` is the certified
gap.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linprog

from .core import (
    BaseVector,
    CapabilityError,
    InputError,
    SetFunction,
    all_masks,
    format_subset,
    greedy_vertex,
    tolerance,
)

TRACE_HEADER = ("iter", "oracle_calls", "wall_ms", "primal_best", "dual_best", "gap")
MNP_DEFAULT_TOL = 1e-10
# vertex rejected when the new Cholesky pivot falls below this fraction of the largest diagonal
MNP_PIVOT_REL = 1e-12


@dataclass
class SolveTrace:
    """Best-so-far primal and dual values per iteration."""

    rows: list = field(default_factory=list)

    def record(self, iteration: int, calls: int, wall_ms: float, primal: float, dual: float):
        if self.rows:
            primal = min(primal, self.rows[-1][3])
            dual = max(dual, self.rows[-1][4])
        self.rows.append((int(iteration), int(calls), float(wall_ms), float(primal), float(dual), float(primal - dual)))

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r[5] for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([r[TRACE_HEADER.index(name)] for r in self.rows])

    def to_csv(self, fh=None, include_wall: bool = True) -> str:
        """CSV text; ``include_wall=False`` zeroes wall times for byte-stable output."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for it, calls, ms, pb, db, gap in self.rows:
            w.writerow([it, calls, f"{ms if include_wall else 0.0:.3f}", repr(pb), repr(db), repr(gap)])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


@dataclass
class SfmResult:
    minimizer: np.ndarray
    min_value: float
    dual: Optional[BaseVector]
    gap: float
    trace: SolveTrace
    algorithm: str = ""
    flagged: bool = False
    status: str = "converged"
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "minimizer": [int(i) + 1 for i in np.flatnonzero(self.minimizer)],
            "value": self.min_value,
            "gap": self.gap,
            "dual_value": None if self.dual is None else self.dual.neg_part,
            "status": self.status,
            "flagged": self.flagged,
            "iterations": len(self.trace.rows),
            "oracle_calls": self.trace.rows[-1][1] if self.trace.rows else 0,
            # per-iteration diagnostics stay out of the summary
            **{k: v for k, v in self.info.items()
               if isinstance(v, (int, float, str, bool)) or (isinstance(v, list) and all(isinstance(x, int) for x in v))},
        }


# ---------------------------------------------------------------------------
# restriction preprocessing


@dataclass
class Reduction:
    """Outcome of restriction preprocessing.

    Iterates as ``(a_min, a_max, reduced)``.  ``head`` lists the forced
    elements in discovery order and ``tail`` the excluded ones in reverse
    discovery order; a greedy ordering of the reduced function lifts to
    ``head + support[order] + tail``, which keeps forced components
    non-positive and excluded ones positive.
    """

    a_min: np.ndarray
    a_max: np.ndarray
    reduced: Optional[SetFunction]
    support: np.ndarray
    head: np.ndarray
    tail: np.ndarray
    offset: float  # F(a_min)
    calls: int  # oracle calls spent on preprocessing

    def __iter__(self):
        return iter((self.a_min, self.a_max, self.reduced))

    def lift_set(self, mask: np.ndarray) -> np.ndarray:
        out = self.a_min.copy()
        out[self.support[mask]] = True
        return out

    def lift_order(self, perm) -> np.ndarray:
        return np.concatenate([self.head, self.support[np.asarray(perm, dtype=np.int64)], self.tail]).astype(np.int64)


def restrict_search(F: SetFunction) -> Reduction:
    """Shrink the search space using singleton tests, iterated to a fixpoint.

    ``k`` is forced when ``F({k}) < 0`` and excluded when
    ``F(V) - F(V - k) > 0``, both relative to the current reduced function.
    """
    p = F.p
    support = np.arange(p)
    a_min = np.zeros(p, dtype=bool)
    head: list[np.ndarray] = []
    tail: list[np.ndarray] = []
    H: Optional[SetFunction] = F
    offset = 0.0
    calls = 0
    while H is not None:
        m = H.p
        before = H.calls
        eye = np.eye(m, dtype=bool)
        single = np.array([H.evaluate(eye[k]) for k in range(m)])
        full = H.evaluate(np.ones(m, dtype=bool))
        drop = np.array([full - H.evaluate(~eye[k]) for k in range(m)])
        forced = single < 0
        excluded = (drop > 0) & ~forced
        if not forced.any() and not excluded.any():
            calls += H.calls - before
            break
        # forced elements first, then exclusion tested on the contracted function
        if forced.any():
            head.append(support[forced])
            offset += H.evaluate(forced)
            calls += H.calls - before
            a_min[support[forced]] = True
            keep = ~forced
            H = H.contract(forced) if keep.any() else None
            support = support[keep]
            excluded = excluded[keep]
            if H is None:
                break
            before = H.calls
        if excluded.any():
            tail.append(support[excluded])
            keep = ~excluded
            H = H.restrict(keep) if keep.any() else None
            support = support[keep]
    a_max = a_min.copy()
    a_max[support] = True
    if H is not None and H is not F:
        # count the reduced oracle from zero from here on
        H.calls = 0
    tail_arr = np.concatenate(tail[::-1]) if tail else np.zeros(0, dtype=np.int64)
    head_arr = np.concatenate(head) if head else np.zeros(0, dtype=np.int64)
    return Reduction(a_min, a_max, H, support, head_arr, tail_arr, float(offset), int(calls))


def _identity_reduction(F: SetFunction) -> Reduction:
    z = np.zeros(0, dtype=np.int64)
    return Reduction(np.zeros(F.p, dtype=bool), np.ones(F.p, dtype=bool), F, np.arange(F.p), z, z, 0.0, 0)


# ---------------------------------------------------------------------------
# shared bookkeeping


class _Run:
    """Best primal set and best dual base of one solve, in reduced coordinates."""

    def __init__(self, F: SetFunction, red: Reduction, algorithm: str, max_calls: Optional[int], tol: Optional[float]):
        self.F, self.red, self.G = F, red, red.reduced
        self.algorithm = algorithm
        self.max_calls = max_calls
        self.tol = tolerance(F) * 0.1 if tol is None else tol
        self.t0 = time.perf_counter()
        self._start = F.calls if self.G is F else self.G.calls
        self.trace = SolveTrace()
        self.best_val = 0.0  # the empty set
        self.best_set = np.zeros(self.G.p, dtype=bool)
        self.best_dual = -np.inf
        self.dual_s: Optional[np.ndarray] = None
        self.dual_orders: list = []
        self.dual_weights = np.zeros(0)

    def calls(self) -> int:
        if self.G is self.F:
            return self.F.calls - self._start + self.red.calls
        return self.G.calls - self._start + self.red.calls

    def offer_prefixes(self, perm: np.ndarray, vals: np.ndarray):
        """Candidate sets are the prefixes of a greedy sweep; ties keep the smaller set."""
        k = int(np.argmin(vals))
        if vals[k] < self.best_val:
            self.best_val = float(vals[k])
            mask = np.zeros(self.G.p, dtype=bool)
            mask[perm[:k]] = True
            self.best_set = mask

    def offer_set(self, mask: np.ndarray):
        val = self.G.evaluate(mask)
        if val < self.best_val or (val == self.best_val and mask.sum() < self.best_set.sum()):
            self.best_val, self.best_set = float(val), mask.copy()

    def offer_dual(self, s: np.ndarray, orders, weights) -> bool:
        d = float(np.minimum(s, 0.0).sum())
        if d > self.best_dual:
            self.best_dual = d
            self.dual_s = np.array(s, dtype=float)
            self.dual_orders = list(orders)
            self.dual_weights = np.array(weights, dtype=float)
            return True
        return False

    @property
    def gap(self) -> float:
        return self.best_val - self.best_dual

    def record(self, it: int):
        ms = (time.perf_counter() - self.t0) * 1e3
        off = self.red.offset
        self.trace.record(it, self.calls(), ms, off + self.best_val, off + self.best_dual)

    def exhausted(self) -> bool:
        return self.max_calls is not None and self.calls() >= self.max_calls

    def converged(self) -> bool:
        return self.gap <= self.tol

    def finish(self, status: Optional[str] = None, **info) -> SfmResult:
        red, F = self.red, self.F
        A = red.lift_set(self.best_set)
        value = F.evaluate(A)
        s_full = _lift_base(F, red, self.dual_s)
        dual = BaseVector(s_full, [red.lift_order(o) for o in self.dual_orders], self.dual_weights)
        gap = value - dual.neg_part
        if status is None:
            status = "converged" if self.converged() else ("budget" if self.exhausted() else "iterations")
        info.setdefault("reduced_size", int(self.G.p))
        return SfmResult(A, value, dual, max(gap, 0.0), self.trace, self.algorithm, status != "converged", status, info)


def _lift_base(F: SetFunction, red: Reduction, s_red: np.ndarray) -> np.ndarray:
    if red.reduced is F:
        return np.asarray(s_red, dtype=float).copy()
    # forced and excluded components do not depend on the reduced ordering
    order = red.lift_order(np.arange(len(red.support)))
    s = greedy_vertex(F, order)
    if len(red.support):
        s[red.support] = s_red
    return s


def _trivial(F: SetFunction, red: Reduction, algorithm: str) -> SfmResult:
    """Preprocessing alone determined the minimizer."""
    order = red.lift_order(np.zeros(0, dtype=np.int64))
    s = greedy_vertex(F, order)
    value = F.evaluate(red.a_min)
    dual = BaseVector(s, [order], np.ones(1))
    trace = SolveTrace()
    trace.record(0, red.calls, 0.0, value, dual.neg_part)
    # nothing left free, so the minimizer lattice is the single set a_min
    extremes = [int(i) + 1 for i in np.flatnonzero(red.a_min)]
    info = {"reduced_size": 0, "minimal_minimizer": extremes, "maximal_minimizer": list(extremes)}
    return SfmResult(red.a_min.copy(), value, dual, max(value - dual.neg_part, 0.0), trace, algorithm, info=info)


def _alphas(G: SetFunction) -> np.ndarray:
    """Widths ``F({k}) + F(V - k) - F(V)`` of the box enclosing the base polyhedron."""
    m = G.p
    eye = np.eye(m, dtype=bool)
    full = G.evaluate(np.ones(m, dtype=bool))
    return np.array([G.evaluate(eye[k]) + G.evaluate(~eye[k]) - full for k in range(m)])


# ---------------------------------------------------------------------------
# solvers


def brute_force(F: SetFunction) -> SfmResult:
    """Exhaustive minimization (``p <= 22``); returns the smallest minimizer."""
    if F.p > 22:
        raise CapabilityError(f"brute force needs p <= 22 (got {F.p})")
    t0 = time.perf_counter()
    start = F.calls
    vals = F.values_all()
    opt = float(vals.min())
    slack = 1e-12 * (1.0 + abs(opt))
    hits = np.flatnonzero(vals <= opt + slack)
    # the smallest integer code is the intersection of all minimizers
    code = int(hits[0])
    A = np.array([(code >> k) & 1 for k in range(F.p)], dtype=bool)
    union = np.bitwise_or.reduce(hits)
    trace = SolveTrace()
    trace.record(0, F.calls - start, (time.perf_counter() - t0) * 1e3, float(vals[code]), float(vals[code]))
    info = {"maximal_minimizer": [k + 1 for k in range(F.p) if (int(union) >> k) & 1]}
    return SfmResult(A, float(vals[code]), None, 0.0, trace, "brute", info=info)


def subgradient(
    F: SetFunction,
    steps: int = 1000,
    rule: str = "fixed_sqrt",
    max_calls: Optional[int] = None,
    tol: Optional[float] = None,
    reduction: Optional[Reduction] = None,
) -> SfmResult:
    """Projected subgradient descent on the Lovász extension over the unit cube.

    ``rule`` is ``fixed_sqrt`` (step ``sqrt(p) / (D sqrt(2 t))`` with ``D`` the
    norm of the box widths, the Lipschitz constant of the extension) or ``polyak`` (step ``(f(w) - d) / |s|^2`` with
    ``d`` the best dual value so far).  The certificate is the running
    average of all subgradients.
    """
    if rule not in ("fixed_sqrt", "polyak"):
        raise InputError(f"unknown step rule {rule!r}")
    red = reduction or restrict_search(F)
    name = "sg-polyak" if rule == "polyak" else "sg-sqrt"
    if red.reduced is None:
        return _trivial(F, red, name)
    G = red.reduced
    run = _Run(F, red, name, max_calls, tol)
    m = G.p
    D = float(np.linalg.norm(_alphas(G)))
    w = np.full(m, 0.5)
    s_sum = np.zeros(m)
    orders: list = []
    t = 0
    while True:
        perm = np.argsort(-w, kind="stable")
        vals = G.prefix_values(perm)
        s = np.empty(m)
        s[perm] = np.diff(vals)
        f_w = float(w @ s)
        orders.append(perm)
        s_sum += s
        run.offer_prefixes(perm, vals)
        avg = s_sum / (t + 1)
        run.offer_dual(avg, orders, np.full(t + 1, 1.0 / (t + 1)))
        run.record(t)
        if t >= steps or run.converged() or run.exhausted():
            break
        t += 1
        nrm2 = float(s @ s)
        if nrm2 == 0.0:
            break
        if rule == "fixed_sqrt":
            gamma = 0.0 if D == 0.0 else math.sqrt(m) / (D * math.sqrt(2.0 * t))
        else:
            gamma = max(f_w - run.best_dual, 0.0) / nrm2
        w = np.clip(w - gamma * s, 0.0, 1.0)
    return run.finish(bound_constant=D * math.sqrt(m / 2.0), D=D, p_reduced=m)


def sg_bound(result: SfmResult, t: int) -> float:
    """``D sqrt(p) / sqrt(2 t)`` for a subgradient result."""
    return result.info["bound_constant"] / math.sqrt(t) if t > 0 else math.inf


def conditional_gradient(
    F: SetFunction,
    steps: int = 1000,
    rule: str = "line_search",
    max_calls: Optional[int] = None,
    tol: Optional[float] = None,
    reduction: Optional[Reduction] = None,
    history: bool = False,
) -> SfmResult:
    """Frank-Wolfe on ``min 1/2 |s|^2`` over the base polyhedron.

    Row ``t`` of the trace certifies ``s_t`` against the best sub-level set
    of all iterates so far.  With ``history=True`` the iterates ``s_t`` and
    the greedy vertices are kept in ``info`` (used for primal-correction
    studies).
    """
    if rule not in ("line_search", "fixed_2_over_t"):
        raise InputError(f"unknown step rule {rule!r}")
    red = reduction or restrict_search(F)
    name = "cg-ls" if rule == "line_search" else "cg-2/(t+1)"
    if red.reduced is None:
        return _trivial(F, red, name)
    G = red.reduced
    run = _Run(F, red, name, max_calls, tol)
    m = G.p
    alphas = _alphas(G)
    perm0 = np.arange(m)
    s = greedy_vertex(G, perm0)
    keys = {perm0.tobytes(): 0}
    orders = [perm0]
    weights = [1.0]
    iterates, fw_gaps = [], []
    t = 0
    while True:
        perm = np.argsort(s, kind="stable")
        vals = G.prefix_values(perm)
        v = np.empty(m)
        v[perm] = np.diff(vals)
        run.offer_prefixes(perm, vals)
        run.offer_dual(s, orders, weights)
        fw_gaps.append(float(s @ (s - v)))
        if history:
            iterates.append(s.copy())
        run.record(t)
        if t >= steps or run.converged() or run.exhausted():
            break
        t += 1
        d = v - s
        if rule == "line_search":
            dd = float(d @ d)
            rho = 0.0 if dd == 0.0 else min(max(-float(s @ d) / dd, 0.0), 1.0)
        else:
            rho = 2.0 / (t + 1)
        if rho == 0.0:
            # the current base already minimizes the quadratic
            break
        s = s + rho * d
        weights = [wt * (1.0 - rho) for wt in weights]
        key = perm.tobytes()
        if key in keys:
            weights[keys[key]] += rho
        else:
            keys[key] = len(orders)
            orders.append(perm)
            weights.append(rho)
    info = dict(alpha_sq_sum=float(alphas @ alphas), p_reduced=m, fw_gaps=fw_gaps)
    if history:
        info["iterates"] = iterates
    return run.finish(**info)


def cg_bound(result: SfmResult, t: int) -> float:
    """``sqrt(p * sum(alpha^2) / (2 (t + 1)))`` for a conditional-gradient result."""
    return math.sqrt(result.info["p_reduced"] * result.info["alpha_sq_sum"] / (2.0 * (t + 1)))


# ---------------------------------------------------------------------------
# minimum-norm point


@dataclass
class WolfeState:
    x: np.ndarray
    orders: list
    weights: np.ndarray
    quad_gap: float
    iterations: int
    status: str


def _delete_column(R: np.ndarray, k: int) -> np.ndarray:
    """Cholesky factor of the Gram matrix with row/column ``k`` removed (Givens)."""
    R = np.delete(R, k, axis=1)
    m = R.shape[0]
    for j in range(k, m - 1):
        a, b = R[j, j], R[j + 1, j]
        r = math.hypot(a, b)
        if r == 0.0:
            continue
        c, s = a / r, b / r
        rj, rj1 = R[j, j:].copy(), R[j + 1, j:].copy()
        R[j, j:] = c * rj + s * rj1
        R[j + 1, j:] = -s * rj + c * rj1
    return np.triu(R[: m - 1])


def wolfe(
    G: SetFunction,
    tol: float = MNP_DEFAULT_TOL,
    max_iter: Optional[int] = None,
    run: Optional[_Run] = None,
    stop_on_sfm_gap: bool = False,
    observer=None,
) -> WolfeState:
    """Minimum-norm point of the base polyhedron by Wolfe's active-set method.

    Affine minimizations solve ``(X^T X + M 1 1^T) y = 1`` through an
    incrementally updated Cholesky factor.  Stops when
    ``|x|^2 - x^T q <= tol`` for the greedy vertex ``q`` at ``-x``.
    ``observer(iteration, x)`` is called once per major cycle.
    """
    m = G.p
    max_iter = max_iter or 50 * m + 100
    perm = np.arange(m)
    q = greedy_vertex(G, perm)
    X = q[:, None].copy()
    orders = [perm]
    lam = np.ones(1)
    M = max(float(q @ q), 1.0)
    R = np.array([[math.sqrt(q @ q + M)]])
    x = q.copy()
    status = "iterations"
    quad_gap = math.inf
    it = 0
    best_norm = math.inf
    stall = 0
    while it < max_iter:
        perm = np.argsort(x, kind="stable")
        vals = G.prefix_values(perm)
        q = np.empty(m)
        q[perm] = np.diff(vals)
        xx = float(x @ x)
        quad_gap = xx - float(x @ q)
        if run is not None:
            run.offer_prefixes(perm, vals)
            run.offer_dual(x, orders, lam)
            run.record(it)
        if observer is not None:
            observer(it, x)
        if quad_gap <= tol:
            status = "converged"
            break
        if run is not None and (run.exhausted() or (stop_on_sfm_gap and run.converged())):
            status = "budget" if run.exhausted() else "converged"
            break
        if xx < best_norm * (1 - 1e-15):
            best_norm, stall = xx, 0
        else:
            stall += 1
            if stall > 2 * m + 10:
                status = "stalled"
                break
        it += 1
        # add the new vertex to the factor
        r = solve_triangular(R, X.T @ q + M, trans="T")
        d2 = float(q @ q) + M - float(r @ r)
        maxdiag = max(float(np.max(np.diag(R))) ** 2, float(q @ q) + M)
        if d2 <= MNP_PIVOT_REL * maxdiag:
            status = "degenerate"
            break
        n = R.shape[0]
        R2 = np.zeros((n + 1, n + 1))
        R2[:n, :n] = R
        R2[:n, n] = r
        R2[n, n] = math.sqrt(d2)
        R = R2
        X = np.column_stack([X, q])
        orders.append(perm)
        lam = np.append(lam, 0.0)
        # minor cycles
        while True:
            y = solve_triangular(R, solve_triangular(R, np.ones(R.shape[0]), trans="T"))
            zeta = y / y.sum()
            if np.all(zeta > 1e-14):
                lam = zeta
                break
            neg = zeta <= 1e-14
            ratios = lam[neg] / (lam[neg] - zeta[neg])
            theta = float(np.min(ratios))
            lam = lam + theta * (zeta - lam)
            drop = np.flatnonzero(neg)[int(np.argmin(ratios))]
            lam[drop] = 0.0
            for k in sorted(np.flatnonzero(lam <= 1e-15), reverse=True):
                R = _delete_column(R, int(k))
                X = np.delete(X, k, axis=1)
                del orders[k]
                lam = np.delete(lam, k)
            lam = lam / lam.sum()
        x = X @ lam
    return WolfeState(x, orders, lam, quad_gap, it, status)


def min_norm_point(
    F: SetFunction,
    tol: float = MNP_DEFAULT_TOL,
    max_iter: Optional[int] = None,
    max_calls: Optional[int] = None,
    reduction: Optional[Reduction] = None,
    sfm_tol: Optional[float] = None,
) -> SfmResult:
    """Minimize ``F`` by thresholding the minimum-norm base.

    The minimizer is the best of ``{s < 0}``, ``{s <= 0}`` and all greedy
    prefixes seen; both lattice extremes are reported in ``info``.
    """
    red = reduction or restrict_search(F)
    if red.reduced is None:
        return _trivial(F, red, "mnp")
    G = red.reduced
    run = _Run(F, red, "mnp", max_calls, sfm_tol)
    st = wolfe(G, tol, max_iter, run, stop_on_sfm_gap=sfm_tol is not None)
    run.offer_dual(st.x, st.orders, st.weights)
    eps = 1e-9 * (1.0 + float(np.max(np.abs(st.x))))
    low, high = st.x < -eps, st.x <= eps
    run.offer_set(low)
    run.offer_set(high)
    status = {"converged": "converged", "budget": "budget"}.get(st.status, st.status)
    if status == "converged" or run.converged():
        status = "converged"
    res = run.finish(
        status=status,
        quad_gap=st.quad_gap,
        major_cycles=st.iterations,
        minimal_minimizer=[int(i) + 1 for i in np.flatnonzero(red.lift_set(low))],
        maximal_minimizer=[int(i) + 1 for i in np.flatnonzero(red.lift_set(high))],
    )
    res.info["min_norm_base"] = st.x
    return res


# ---------------------------------------------------------------------------
# ellipsoid


def _best_combination(vertices: list) -> tuple[np.ndarray, np.ndarray]:
    """Convex combination of the given vertices maximizing the negative-part sum."""
    V = np.array(vertices).T  # m x n
    m, n = V.shape
    # variables: lambda (n), u (m); maximize sum u  s.t. u <= V lambda, u <= 0, sum lambda = 1
    c = np.concatenate([np.zeros(n), -np.ones(m)])
    A_ub = np.hstack([-V, np.eye(m)])
    A_eq = np.concatenate([np.ones(n), np.zeros(m)])[None, :]
    bounds = [(0, None)] * n + [(None, 0)] * m
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        lam = np.full(n, 1.0 / n)
    else:
        lam = np.clip(res.x[:n], 0.0, None)
        lam /= lam.sum()
    return V @ lam, lam


def ellipsoid(
    F: SetFunction,
    steps: int = 1000,
    max_calls: Optional[int] = None,
    tol: Optional[float] = None,
    reduction: Optional[Reduction] = None,
    lp_every: int = 10,
    track_volume: bool = False,
) -> SfmResult:
    """Central-cut ellipsoid method for the Lovász extension on the unit cube.

    The ellipsoid is ``{c + V u : |u| <= 1}``; the shape ``P = V V^T`` starts
    at ``(p/4) I`` around ``c = 1/2``.  Infeasible centres are cut by the
    violated coordinate bound.  The dual certificate is the best convex
    combination of the greedy vertices met so far, found by a small linear
    program every ``lp_every`` steps.
    """
    red = reduction or restrict_search(F)
    if red.reduced is None:
        return _trivial(F, red, "ellipsoid")
    G = red.reduced
    m = G.p
    if m > 200:
        raise CapabilityError(f"ellipsoid keeps an O(p^2) shape matrix; needs reduced p <= 200 (got {m})")
    run = _Run(F, red, "ellipsoid", max_calls, tol)
    c = np.full(m, 0.5)
    P = np.eye(m) * (m / 4.0)
    logvol = [0.5 * m * math.log(m / 4.0)] if track_volume else []
    vertices: list = []
    orders: list = []
    keys: dict = {}
    best_center = math.inf
    center_trace = []
    for t in range(steps + 1):
        lo, hi = -c, c - 1.0
        viol = np.maximum(lo, hi)
        k = int(np.argmax(viol))
        if viol[k] > 0:
            g = np.zeros(m)
            g[k] = 1.0 if hi[k] > 0 else -1.0
        else:
            perm = np.argsort(-c, kind="stable")
            vals = G.prefix_values(perm)
            g = np.empty(m)
            g[perm] = np.diff(vals)
            best_center = min(best_center, float(c @ g))
            run.offer_prefixes(perm, vals)
            key = perm.tobytes()
            if key not in keys:
                keys[key] = len(vertices)
                vertices.append(g.copy())
                orders.append(perm)
            if len(vertices) == 1:
                run.offer_dual(g, orders, [1.0])
            elif t % lp_every == 0 or t == steps:
                s, lam = _best_combination(vertices)
                run.offer_dual(s, orders, lam)
        center_trace.append(best_center)
        run.record(t)
        if t == steps or run.converged() or run.exhausted():
            break
        Pg = P @ g
        gPg = float(g @ Pg)
        if gPg <= 0.0:
            break
        if m == 1:
            r = math.sqrt(P[0, 0])
            c = c - np.sign(g) * r / 2.0
            P = P / 4.0
        else:
            ptil = Pg / math.sqrt(gPg)
            c = c - ptil / (m + 1)
            P = (m * m / (m * m - 1.0)) * (P - (2.0 / (m + 1)) * np.outer(ptil, ptil))
            P = 0.5 * (P + P.T)
        if track_volume:
            logvol.append(0.5 * np.linalg.slogdet(P)[1])
    if vertices and len(vertices) > 1:
        s, lam = _best_combination(vertices)
        run.offer_dual(s, orders, lam)
    return run.finish(logvol=logvol, best_center_value=best_center, center_trace=center_trace, p_reduced=m)


# ---------------------------------------------------------------------------
# min-cut fast path and the dispatching facade


def mincut(F: SetFunction) -> SfmResult:
    """Exact minimization through a max-flow when ``F`` is a cut plus modular term."""
    from .graph import CutPlusModular, min_cut_certificate
    from .zoo import AddModular

    t0 = time.perf_counter()
    start = F.calls
    shift = np.zeros(F.p)
    H = F
    while isinstance(H, AddModular):
        shift += H.z
        H = H.inner
    if not isinstance(H, CutPlusModular):
        raise CapabilityError("the min-cut path needs a cut function plus a modular term")
    z = H.z + shift
    A, value, s = min_cut_certificate(H.graph, -z)
    dual = BaseVector(s, [], np.zeros(0))
    trace = SolveTrace()
    trace.record(0, F.calls - start, (time.perf_counter() - t0) * 1e3, value, dual.neg_part)
    return SfmResult(A, F.evaluate(A), dual, max(value - dual.neg_part, 0.0), trace, "mincut")


ALGORITHMS = ("auto", "brute", "mnp", "sg", "sg-polyak", "cg", "cg-fixed", "ellipsoid", "mincut")


def minimize(F: SetFunction, algo: str = "auto", budget: Optional[int] = None, steps: Optional[int] = None, tol: Optional[float] = None) -> SfmResult:
    """Dispatch to a solver.

    ``budget`` caps oracle calls (the result is then flagged with a valid
    certificate).  ``auto`` uses the min-cut path on cut functions and the
    minimum-norm point otherwise.
    """
    if algo not in ALGORITHMS:
        raise InputError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    if algo == "auto":
        algo = "mincut" if _is_cut_like(F) else "mnp"
    if algo == "mincut":
        return mincut(F)
    if algo == "brute":
        return brute_force(F)
    red = restrict_search(F)
    n = steps if steps is not None else 10**9 if budget is not None else 1000
    if algo == "mnp":
        return min_norm_point(F, tol=MNP_DEFAULT_TOL if tol is None else tol, max_calls=budget, reduction=red, max_iter=steps)
    if algo in ("sg", "sg-polyak"):
        return subgradient(F, n, "polyak" if algo == "sg-polyak" else "fixed_sqrt", budget, tol, red)
    if algo in ("cg", "cg-fixed"):
        return conditional_gradient(F, n, "fixed_2_over_t" if algo == "cg-fixed" else "line_search", budget, tol, red)
    return ellipsoid(F, n, budget, tol, red)


def _is_cut_like(F: SetFunction) -> bool:
    from .graph import CutPlusModular
    from .zoo import AddModular

    while isinstance(F, AddModular):
        F = F.inner
    return isinstance(F, CutPlusModular)


def exact_solver(algo: str = "auto"):
    """Solver handle ``F -> (maximal minimizer mask, minimum)`` for nested minimizations."""

    def solve(F: SetFunction):
        if algo == "brute" or (algo == "auto" and F.p <= 10 and not _is_cut_like(F)):
            res = brute_force(F)
            A = np.zeros(F.p, dtype=bool)
            A[np.array(res.info["maximal_minimizer"], dtype=np.int64) - 1] = True
            return A, F.evaluate(A)
        if algo in ("auto", "mincut") and _is_cut_like(F):
            out = F.min_minus_modular(np.zeros(F.p))
            if out is not None:
                return _maximal_cut(F)
        res = min_norm_point(F)
        high = np.zeros(F.p, dtype=bool)
        high[np.array(res.info["maximal_minimizer"], dtype=np.int64) - 1] = True
        vh = F.evaluate(high)
        if vh <= res.min_value + 1e-12 * (1 + abs(res.min_value)):
            return high, vh
        return res.minimizer, res.min_value

    return solve


def _maximal_cut(F: SetFunction):
    from .graph import CutPlusModular
    from .zoo import AddModular

    shift = np.zeros(F.p)
    H = F
    while isinstance(H, AddModular):
        shift += H.z
        H = H.inner
    assert isinstance(H, CutPlusModular)
    from .graph import min_cut_minus_modular

    A, _ = min_cut_minus_modular(H.graph, -(H.z + shift), maximal=True)
    return A, F.evaluate(A)


def result_json(res: SfmResult) -> str:
    return json.dumps(res.to_json(), indent=2, sort_keys=True)
