"""Separable convex optimization over submodular polyhedra.

The central problem is ``min_w f(w) + sum_k psi_k(w_k)`` with ``f`` the
Lovász extension, whose dual maximizes ``-sum_k psi*_k(-s_k)`` over the base
polyhedron.  Two exact solvers are provided (minimum-norm point for quadratic
``psi`` and divide-and-conquer for any smooth strictly convex ``psi``),
together with pool-adjacent-violators tooling, transfers of a base-polyhedron
solution to ``P``, ``P+`` and ``|P|``, and the structured-norm machinery built
on these.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (
    BaseVector,
    InputError,
    NumericalError,
    PreconditionError,
    SetFunction,
    greedy_vertex,
    lovasz,
)
from .graph import CutPlusModular, WeightedDigraph
from .sfm import MNP_DEFAULT_TOL, exact_solver, wolfe
from .zoo import MONOTONE_CHECK_MAX, _is_nondecreasing, add_modular

# inner minimum above -SPLIT_TOL * scale counts as "t already in the polyhedron"
SPLIT_TOL = 1e-10
# breakpoint integration must reproduce the closed-form gap to this accuracy
GAP_IDENTITY_TOL = 1e-8

CoordFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SeparableProblem:
    """Per-coordinate convex terms ``psi_k``.

    Quadratic problems are ``psi_k(w) = weights_k / 2 * (w - z_k)^2``.
    Custom problems give vectorized callables ``fn(x, idx)`` evaluating the
    term, its derivative, its conjugate and the conjugate's derivative at
    ``x[i]`` for coordinate ``idx[i]``.  ``signs`` composes every term with
    ``w -> signs_k * w``.
    """

    p: int
    z: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    psi_fn: Optional[CoordFn] = None
    dpsi_fn: Optional[CoordFn] = None
    conj_fn: Optional[CoordFn] = None
    dconj_fn: Optional[CoordFn] = None
    signs: Optional[np.ndarray] = None

    @classmethod
    def quadratic(cls, z, weights=None) -> "SeparableProblem":
        z = np.asarray(z, dtype=float).copy()
        if z.ndim != 1 or not np.all(np.isfinite(z)):
            raise InputError("z must be a finite vector")
        if weights is not None:
            weights = np.asarray(weights, dtype=float).copy()
            if weights.shape != z.shape or np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise InputError("quadratic weights must be positive and match z")
        return cls(len(z), z=z, weights=weights)

    @classmethod
    def custom(cls, p: int, psi: CoordFn, dpsi: CoordFn, conj: CoordFn, dconj: CoordFn) -> "SeparableProblem":
        prob = cls(int(p), psi_fn=psi, dpsi_fn=dpsi, conj_fn=conj, dconj_fn=dconj)
        prob._check_strictly_convex()
        return prob

    @property
    def kind(self) -> str:
        return "quadratic" if self.z is not None else "custom"

    def _check_strictly_convex(self):
        grid = np.linspace(-10.0, 10.0, 41)
        for k in range(self.p):
            d = np.asarray(self.dpsi_fn(grid, np.full(grid.size, k)), dtype=float)
            if not np.all(np.diff(d) > 0):
                raise PreconditionError(f"psi_{k + 1} is not strictly convex (derivative not increasing)")

    def _c(self, idx):
        return np.ones(len(idx)) if self.weights is None else self.weights[idx]

    def _sg(self, idx):
        return np.ones(len(idx)) if self.signs is None else self.signs[idx]

    def _idx(self, idx):
        return np.arange(self.p) if idx is None else np.asarray(idx, dtype=np.int64)

    # psi_k(eps_k x), with derivative eps_k psi'_k(eps_k x); the conjugate is psi*_k(eps_k s)
    def psi(self, w, idx=None) -> np.ndarray:
        idx = self._idx(idx)
        x = self._sg(idx) * np.asarray(w, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * self._c(idx) * (x - self.z[idx]) ** 2
        return np.asarray(self.psi_fn(x, idx), dtype=float)

    def dpsi(self, w, idx=None) -> np.ndarray:
        idx = self._idx(idx)
        e = self._sg(idx)
        x = e * np.asarray(w, dtype=float)
        if self.kind == "quadratic":
            return e * self._c(idx) * (x - self.z[idx])
        return e * np.asarray(self.dpsi_fn(x, idx), dtype=float)

    def conj(self, s, idx=None) -> np.ndarray:
        idx = self._idx(idx)
        y = self._sg(idx) * np.asarray(s, dtype=float)
        if self.kind == "quadratic":
            return y * self.z[idx] + 0.5 * y**2 / self._c(idx)
        return np.asarray(self.conj_fn(y, idx), dtype=float)

    def dconj(self, s, idx=None) -> np.ndarray:
        idx = self._idx(idx)
        e = self._sg(idx)
        y = e * np.asarray(s, dtype=float)
        if self.kind == "quadratic":
            return e * (self.z[idx] + y / self._c(idx))
        return e * np.asarray(self.dconj_fn(y, idx), dtype=float)

    def unconstrained_minimizer(self, idx=None) -> np.ndarray:
        """``argmin psi_k``, i.e. ``(psi*_k)'(0)``."""
        return self.dconj(np.zeros(len(self._idx(idx))), idx)

    def sign_flipped(self) -> "SeparableProblem":
        """The problem in ``|w|``-coordinates: every term composed with the sign of its minimizer."""
        m = self.unconstrained_minimizer()
        eps = np.where(m < 0, -1.0, 1.0)
        base = self._sg(np.arange(self.p))
        return replace(self, signs=base * eps)

    def level(self, rhs: float, idx) -> float:
        """The constant ``alpha`` with ``sum_k -psi'_k(alpha) = rhs`` over ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.kind == "quadratic" and self.signs is None:
            c = self._c(idx)
            return float((c @ self.z[idx] - rhs) / c.sum())

        def h(a):
            return float(np.sum(self.dpsi(np.full(len(idx), a), idx))) + rhs

        lo, hi = -1.0, 1.0
        while h(lo) > 0:
            lo *= 2.0
            if lo < -1e300:
                raise PreconditionError("psi' is not unbounded below")
        while h(hi) < 0:
            hi *= 2.0
            if hi > 1e300:
                raise PreconditionError("psi' is not unbounded above")
        return float(brentq(h, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass
class ProxResult:
    w: np.ndarray
    s: np.ndarray
    gap: float
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# duality gap


def gap(F: SetFunction, w, s, problem: SeparableProblem, support: str = "B") -> float:
    """``max_s' w^T s' - w^T s + sum_k [psi_k(w_k) + psi*_k(-s_k) + w_k s_k]``.

    The first term is the Lovász extension at ``w`` for the base polyhedron
    and at ``w_+`` / ``|w|`` for ``P+`` / ``|P|``.
    """
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    if support in ("B", "P"):
        head = lovasz(F, w)
    elif support == "P+":
        head = lovasz(F, np.maximum(w, 0.0))
    elif support == "|P|":
        head = lovasz(F, np.abs(w))
    else:
        raise InputError(f"unknown polyhedron {support!r}")
    fenchel = problem.psi(w) + problem.conj(-s) + w * s
    return float(head - w @ s + fenchel.sum())


def _gap_integral(F: SetFunction, w: np.ndarray, s: np.ndarray, problem: SeparableProblem) -> float:
    """Integral over level ``a`` of ``(F + psi'(a))({w >= a}) - (s + psi'(a))_-(V)``.

    For quadratic terms the integrand is affine between consecutive
    breakpoints (the values of ``w`` and the roots of ``s_k + psi'_k(a)``),
    so the midpoint rule on each piece is exact.
    """
    p = len(w)
    roots = problem.dconj(-s)
    knots = np.unique(np.concatenate([w, roots]))
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        a = 0.5 * (lo + hi)
        d = problem.dpsi(np.full(p, a))
        up = w >= a
        val = F.evaluate(up) + d[up].sum() - np.minimum(s + d, 0.0).sum()
        total += (hi - lo) * val
    return float(total)


def gap_decomposed(F: SetFunction, w, s, problem: SeparableProblem) -> float:
    """The duality gap, cross-checked against its level-set integral for quadratic terms."""
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    closed = gap(F, w, s, problem)
    if problem.kind == "quadratic":
        integral = _gap_integral(F, w, s, problem)
        if abs(integral - closed) > GAP_IDENTITY_TOL * (1.0 + abs(closed)):
            raise NumericalError(f"gap identity violated: closed form {closed!r}, integral {integral!r}")
    return closed


# ---------------------------------------------------------------------------
# exact solvers on the base polyhedron


def prox_quadratic_mnp(F: SetFunction, z, tol: float = MNP_DEFAULT_TOL, max_iter: Optional[int] = None) -> ProxResult:
    """``argmin 1/2 |w - z|^2 + f(w)`` through the minimum-norm base of ``F - z``.

    The projection of ``z`` onto the base polyhedron is ``z + x`` with ``x``
    the minimum-norm point for ``F - z``; the primal is ``w = -x``.  The
    quadratic duality gap of the Wolfe iteration equals the prox gap.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (F.p,):
        raise InputError("z has the wrong length")
    st = wolfe(add_modular(F, -z), tol=tol, max_iter=max_iter)
    w = -st.x
    s = st.x + z
    return ProxResult(w, s, max(st.quad_gap, 0.0), {"status": st.status, "major_cycles": st.iterations})


def prox_quadratic(F: SetFunction, z=None, method: str = "mnp", sfm=None) -> ProxResult:
    """Quadratic prox by the minimum-norm point (default) or divide-and-conquer."""
    z = np.zeros(F.p) if z is None else np.asarray(z, dtype=float)
    if method == "mnp":
        return prox_quadratic_mnp(F, z)
    if method == "dc":
        return divide_and_conquer(F, SeparableProblem.quadratic(z), sfm)
    raise InputError(f"unknown prox method {method!r}")


def divide_and_conquer(F: SetFunction, problem: SeparableProblem, sfm=None) -> ProxResult:
    """Exact separable optimization on the base polyhedron by recursive splitting.

    Each node solves the problem under the single constraint ``t(V) = F(V)``
    (the primal is then constant), minimizes ``F - t`` with ``sfm`` and, if
    the minimum is negative at ``A``, recurses on the restriction to ``A``
    and the contraction by ``A``.  ``sfm`` maps a set function to
    ``(minimizer_mask, value)``; the default uses the min-cut fast path when
    available.
    """
    if problem.p != F.p:
        raise InputError("problem and function sizes differ")
    solve = sfm or exact_solver("auto")
    w = np.empty(F.p)
    s = np.empty(F.p)
    stack = [(F, np.arange(F.p), 1)]
    nodes = 0
    max_depth = 0
    while stack:
        H, idx, depth = stack.pop()
        nodes += 1
        max_depth = max(max_depth, depth)
        if depth > F.p:
            raise NumericalError("recursion deeper than the ground set; inner solver is not exact")
        full = np.ones(H.p, dtype=bool)
        FV = H.evaluate(full)
        alpha = problem.level(FV, idx)
        t = -problem.dpsi(np.full(len(idx), alpha), idx)
        A, val = solve(add_modular(H, -t))
        A = np.asarray(A, dtype=bool)
        scale = 1.0 + abs(FV) + float(np.abs(t).sum())
        if val >= -SPLIT_TOL * scale or A.all() or not A.any():
            w[idx] = alpha
            s[idx] = t
            continue
        stack.append((H.contract(A), idx[~A], depth + 1))
        stack.append((H.restrict(A), idx[A], depth + 1))
    g = gap(F, w, s, problem)
    return ProxResult(w, s, max(g, 0.0), {"depth": max_depth, "nodes": nodes})


def threshold_minimizers(prox: ProxResult, alpha: float, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """``({w > alpha}, {w >= alpha})``: the smallest and largest minimizers of ``F + alpha |A|``.

    Valid for the solution of ``1/2 |w|^2 + f(w)``.
    """
    if prox.gap > tol:
        raise PreconditionError(f"prox not solved to tolerance (gap {prox.gap:.3g} > {tol:.3g})")
    return prox.w > alpha, prox.w >= alpha


# ---------------------------------------------------------------------------
# pool adjacent violators


def pava(z, weights=None) -> np.ndarray:
    """Weighted least-squares fit of ``z`` by a non-increasing sequence.

    Linear time: a stack of pooled blocks is merged while the last block's
    mean exceeds the previous one's.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if n == 0:
        return z.copy()
    zs = z.tolist()
    if weights is None:
        ws = [1.0] * n
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != z.shape or np.any(weights <= 0):
            raise InputError("pava weights must be positive and match z")
        ws = weights.tolist()
    sums: list = []
    wts: list = []
    lens: list = []
    for i in range(n):
        sm = ws[i] * zs[i]
        wt = ws[i]
        ln = 1
        # pool while the previous block mean is below the current one
        while sums and sums[-1] * wt < sm * wts[-1]:
            sm += sums.pop()
            wt += wts.pop()
            ln += lens.pop()
        sums.append(sm)
        wts.append(wt)
        lens.append(ln)
    return np.repeat(np.array(sums) / np.array(wts), lens)


def improve_primal_isotonic(F: SetFunction, s) -> tuple[np.ndarray, float]:
    """Best primal for ``1/2 |w|^2 + f(w)`` among vectors ordered like ``-s``.

    With the order fixed, ``f(w) = w^T t`` for the greedy base ``t`` of that
    order, and the problem becomes an isotonic regression of ``-t``.
    Returns ``w`` and its duality gap against ``s``.
    """
    w, g, _ = primal_candidates(F, s)
    return w, g


def naive_primal_gap(F: SetFunction, s) -> float:
    """Gap of the candidate ``w = -s`` for ``1/2 |w|^2 + f(w)``."""
    s = s.s if isinstance(s, BaseVector) else np.asarray(s, dtype=float)
    return max(lovasz(F, -s) + float(s @ s), 0.0)


def primal_candidates(F: SetFunction, s) -> tuple[np.ndarray, float, float]:
    """Isotonic primal, its gap, and the gap of ``w = -s``, from a single greedy sweep.

    The sweep along increasing ``s`` gives both ``f(-s) = -s^T t`` and the
    base ``t`` of the isotonic problem.
    """
    s = s.s if isinstance(s, BaseVector) else np.asarray(s, dtype=float)
    perm = np.argsort(s, kind="stable")
    t = greedy_vertex(F, perm)
    w = np.empty(F.p)
    w[perm] = pava(-t[perm])
    ss = float(s @ s)
    improved = float(w @ t + 0.5 * (w @ w) + 0.5 * ss)
    naive = float(-(s @ t) + ss)
    return w, max(improved, 0.0), max(naive, 0.0)


# ---------------------------------------------------------------------------
# other polyhedra


def _require_nondecreasing(F: SetFunction):
    if F.p <= MONOTONE_CHECK_MAX and not _is_nondecreasing(F):
        raise PreconditionError("this polyhedron transfer needs a non-decreasing function")


def _to_P(prox_B: ProxResult, problem: SeparableProblem) -> tuple[np.ndarray, np.ndarray]:
    w = np.maximum(prox_B.w, 0.0)
    # the concave map s -> -psi*(-s) peaks at -psi'(0)
    s = np.minimum(prox_B.s, -problem.dpsi(np.zeros(problem.p)))
    return w, s


def transfer_to_P(F: SetFunction, prox_B: ProxResult, problem: SeparableProblem) -> ProxResult:
    """Solution over ``P(F)`` (primal restricted to ``w >= 0``) from the one over ``B(F)``."""
    w, s = _to_P(prox_B, problem)
    return ProxResult(w, s, max(gap(F, w, s, problem, "P"), 0.0), {"polyhedron": "P"})


def transfer_to_Pplus(F: SetFunction, prox_B: ProxResult, problem: SeparableProblem) -> ProxResult:
    """Solution of ``min f(w_+) + sum psi`` and its dual over ``P+(F)``; ``F`` non-decreasing."""
    _require_nondecreasing(F)
    a, u = _to_P(prox_B, problem)
    w = np.minimum(a, problem.unconstrained_minimizer())
    s = np.maximum(u, 0.0)
    return ProxResult(w, s, max(gap(F, w, s, problem, "P+"), 0.0), {"polyhedron": "P+"})


def transfer_to_absP(F: SetFunction, prox_flipped: ProxResult, problem: SeparableProblem) -> ProxResult:
    """Solution of ``min f(|w|) + sum psi`` and its dual over ``|P|(F)``; ``F`` non-decreasing.

    ``prox_flipped`` must solve the base-polyhedron problem for
    ``problem.sign_flipped()``.
    """
    _require_nondecreasing(F)
    flipped = problem.sign_flipped()
    eps = flipped.signs if problem.signs is None else flipped.signs * problem.signs
    v, t = _to_P(prox_flipped, flipped)
    w, s = eps * v, eps * t
    return ProxResult(w, s, max(gap(F, w, s, problem, "|P|"), 0.0), {"polyhedron": "|P|"})


def prox_abs(F: SetFunction, problem: SeparableProblem, sfm=None) -> ProxResult:
    """``min f(|w|) + sum psi_k(w_k)`` by sign flipping and divide-and-conquer."""
    inner = divide_and_conquer(F, problem.sign_flipped(), sfm)
    return transfer_to_absP(F, inner, problem)


# ---------------------------------------------------------------------------
# norms


def dual_norm_newton(F: SetFunction, s_base, t, sfm=None) -> float:
    """Largest ``alpha >= 0`` with ``s_base + alpha t`` in ``P(F)``.

    Newton iterations on ``beta -> min_A G(A) - beta t(A)`` with
    ``G = F - s_base``, shrinking the search to the last minimizer.
    """
    s_base = np.asarray(s_base, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape != (F.p,) or s_base.shape != (F.p,):
        raise InputError("vectors have the wrong length")
    if np.any(t < 0) or not np.any(t > 0):
        raise InputError("direction must be non-negative and non-zero")
    solve = sfm or exact_solver("auto")
    G = add_modular(F, -s_base)
    B = np.ones(F.p, dtype=bool)
    beta = G.evaluate(B) / t.sum()
    for _ in range(F.p + 1):
        H = add_modular(G.restrict(B), -beta * t[B])
        A, val = solve(H)
        A = np.asarray(A, dtype=bool)
        full = np.zeros(F.p, dtype=bool)
        full[np.flatnonzero(B)[A]] = True
        if val >= -SPLIT_TOL * (1.0 + abs(beta) * t.sum()) or t[full].sum() <= 0:
            return float(beta)
        beta = G.evaluate(full) / t[full].sum()
        B = full
    raise NumericalError("Newton line search did not terminate within p steps")


def omega_inf_dual(F: SetFunction, s, sfm=None) -> float:
    """``max_A |s|(A) / F(A)`` over non-empty ``A``."""
    a = np.abs(np.asarray(s, dtype=float))
    if not np.any(a > 0):
        return 0.0
    return 1.0 / dual_norm_newton(F, np.zeros(F.p), a, sfm)


def _positive_dc(F: SetFunction, root_step, sfm) -> tuple[np.ndarray, int]:
    """Divide-and-conquer over ``P+(F)``; ``root_step(idx, F(V))`` solves one node."""
    solve = sfm or exact_solver("auto")
    u = np.empty(F.p)
    stack = [(F, np.arange(F.p), 1)]
    max_depth = 0
    while stack:
        H, idx, depth = stack.pop()
        max_depth = max(max_depth, depth)
        if depth > F.p:
            raise NumericalError("recursion deeper than the ground set")
        FV = H.evaluate(np.ones(H.p, dtype=bool))
        v = root_step(idx, FV)
        A, val = solve(add_modular(H, -v))
        A = np.asarray(A, dtype=bool)
        if val >= -SPLIT_TOL * (1.0 + abs(FV)) or A.all() or not A.any():
            u[idx] = v
            continue
        stack.append((H.contract(A), idx[~A], depth + 1))
        stack.append((H.restrict(A), idx[A], depth + 1))
    return u, max_depth


def omega_q_norm_and_prox(F: SetFunction, z, q: float = 2, sfm=None) -> tuple[float, np.ndarray]:
    """``Omega_2(z)`` and ``argmin_w 1/2 |w - z|^2 + Omega_2(w)``.

    Both come from maximizing a concave separable function of ``u = s^2``
    over ``P+(F)``; only ``q = 2`` is supported.
    """
    if q != 2:
        raise InputError("only q = 2 is implemented")
    z = np.asarray(z, dtype=float)
    if z.shape != (F.p,):
        raise InputError("z has the wrong length")
    if F.p <= MONOTONE_CHECK_MAX:
        _require_nondecreasing(F)
    eye = np.eye(F.p, dtype=bool)
    if any(F.evaluate(eye[k]) <= 0 for k in range(F.p)):
        raise PreconditionError("Omega_2 needs F({k}) > 0 for every k")
    z2 = z**2

    def prox_step(idx, FV):
        n2 = z2[idx].sum()
        return z2[idx] if n2 <= FV else z2[idx] * (FV / n2)

    def norm_step(idx, FV):
        n2 = z2[idx].sum()
        return np.zeros(len(idx)) if n2 == 0 else z2[idx] * (FV / n2)

    u_norm, _ = _positive_dc(F, norm_step, sfm)
    u_prox, _ = _positive_dc(F, prox_step, sfm)
    norm = float(np.abs(z) @ np.sqrt(np.maximum(u_norm, 0.0)))
    w = z - np.sign(z) * np.sqrt(np.maximum(u_prox, 0.0))
    return norm, w


# ---------------------------------------------------------------------------
# isotonic regression on a partial order


def isotonic_general(z, constraints: Sequence[tuple[int, int]], sfm=None) -> np.ndarray:
    """Euclidean projection of ``z`` onto ``{w : w_i >= w_j for all (i, j)}``.

    Solved as a prox of a large multiple of the directed-cut extension
    ``sum (w_j - w_i)_+``; the multiplier ``p (max z - min z) + 1`` bounds the
    optimal Lagrange multipliers, so the penalty is exact.
    """
    z = np.asarray(z, dtype=float)
    p = z.size
    if not constraints or p == 0:
        return z.copy()
    for i, j in constraints:
        if not (0 <= i < p and 0 <= j < p):
            raise InputError(f"constraint ({i}, {j}) outside [0, {p})")
    lam = p * float(z.max() - z.min()) + 1.0
    # arc j -> i is cut exactly when w_j > w_i at some level
    arcs = [(int(j), int(i), lam) for i, j in constraints if i != j]
    F = CutPlusModular(WeightedDigraph(p, arcs))
    res = divide_and_conquer(F, SeparableProblem.quadratic(z), sfm or exact_solver("mincut"))
    return res.w
